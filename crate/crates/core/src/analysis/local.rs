use crate::optim::{AdamConfig, AdamState, LrSchedule};
use crate::Result;

/// Budget for the small inner optimizations run by the analyses.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOptConfig {
    pub iterations: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Stop once the loss falls below this value.
    pub target: f64,
    /// Stop once the gradient's largest entry falls below this value.
    pub grad_tol: f64,
}

impl Default for LocalOptConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            lr_start: 5e-2,
            lr_end: 1e-4,
            target: 1e-13,
            grad_tol: 1e-10,
        }
    }
}

/// ADAM with a cosine learning rate over `f`, which returns the loss and
/// writes the gradient. Returns the lowest loss seen and its parameters.
pub(crate) fn minimize<F>(x0: Vec<f64>, cfg: &LocalOptConfig, mut f: F) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let lr = LrSchedule::Cosine {
        start: cfg.lr_start,
        end: cfg.lr_end,
        epochs: cfg.iterations,
    };
    let mut adam = AdamState::new(x0.len(), AdamConfig::default());
    let mut x = x0;
    let mut g = vec![0.0; x.len()];
    let mut best = (f64::INFINITY, x.clone());
    for it in 0..cfg.iterations {
        g.iter_mut().for_each(|v| *v = 0.0);
        let l = f(&x, &mut g)?;
        if l < best.0 {
            best = (l, x.clone());
        }
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if l <= cfg.target || gmax <= cfg.grad_tol {
            break;
        }
        adam.step(&mut x, &g, lr.at(it))?;
    }
    Ok(best)
}

/// Dense BFGS with Armijo backtracking, for small smooth problems that need
/// tight convergence. Returns the final loss and parameters.
pub(crate) fn bfgs<F>(x0: Vec<f64>, cfg: &LocalOptConfig, mut f: F) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g)?;
    let mut h = identity(n);
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut stalled = 0;
    for _ in 0..cfg.iterations {
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if fx <= cfg.target || gmax <= cfg.grad_tol {
            break;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            // lost descent: restart from steepest descent
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                xn[i] = x[i] + alpha * p[i];
            }
            gn.iter_mut().for_each(|v| *v = 0.0);
            let fnew = f(&xn, &mut gn)?;
            if fnew.is_finite() && fnew <= fx + 1e-4 * alpha * slope {
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-300 {
                    update_inverse_hessian(&mut h, &s, &y, sy);
                }
                x.copy_from_slice(&xn);
                g.copy_from_slice(&gn);
                stalled = if fx - fnew <= 1e-15 * fx.abs().max(1e-3) { stalled + 1 } else { 0 };
                fx = fnew;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || stalled >= 20 {
            break;
        }
    }
    Ok((fx, x))
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1 / (yᵀ s)`.
fn update_inverse_hessian(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
