//! Exact reverse-mode gradients of the protocol losses and a central
//! finite-difference harness to check them.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::feedback::Policy;
use crate::protocol::engine::{evaluate_with, Request};
use crate::protocol::{LossEval, MultiSize, Problem};
use crate::qsim::StateVector;
use crate::{Error, Result};

/// Gradient blocks: `θ₁` (tied classes collapsed) and the policy weights
/// (concatenated over rounds).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector {
    pub d_theta1: Vec<f64>,
    pub d_policy: Vec<f64>,
}

impl GradientVector {
    pub fn is_finite(&self) -> bool {
        self.d_theta1.iter().chain(&self.d_policy).all(|x| x.is_finite())
    }
}

/// Loss value and both gradient blocks.
pub fn loss_and_grad<R: Rng>(
    problem: &Problem,
    theta1: &[f64],
    policies: &[Policy],
    rng: Option<&mut R>,
) -> Result<(f64, GradientVector)> {
    let e = evaluate_with(problem, theta1, policies, rng, Request::FULL, None)?;
    Ok((
        e.loss,
        GradientVector {
            d_theta1: e.d_theta1.expect("requested"),
            d_policy: e.d_policy.expect("requested"),
        },
    ))
}

/// Aggregated evaluation over one or more problems.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub loss: f64,
    pub objective: f64,
    pub regularization: f64,
    pub infidelity: f64,
    pub d_theta1: Option<Vec<f64>>,
    pub d_policy: Option<Vec<f64>>,
    /// Per-problem results with their gradient fields taken out.
    pub parts: Vec<LossEval>,
}

impl Evaluation {
    fn mean(mut parts: Vec<LossEval>) -> Self {
        let k = parts.len() as f64;
        let avg = |f: &dyn Fn(&LossEval) -> f64| parts.iter().map(f).sum::<f64>() / k;
        let loss = avg(&|e| e.loss);
        let objective = avg(&|e| e.objective);
        let regularization = avg(&|e| e.regularization);
        let infidelity = avg(&|e| e.infidelity);
        let sum = |v: Vec<Option<Vec<f64>>>| -> Option<Vec<f64>> {
            let mut it = v.into_iter();
            let mut acc = it.next()??;
            for x in it {
                for (a, b) in acc.iter_mut().zip(x?) {
                    *a += b;
                }
            }
            acc.iter_mut().for_each(|a| *a /= k);
            Some(acc)
        };
        let d_theta1 = sum(parts.iter_mut().map(|e| e.d_theta1.take()).collect());
        let d_policy = sum(parts.iter_mut().map(|e| e.d_policy.take()).collect());
        Self {
            loss,
            objective,
            regularization,
            infidelity,
            d_theta1,
            d_policy,
            parts,
        }
    }

    /// First-round states, reusable through [`LossOracle::policy_step`].
    pub fn psi1_cache(&self) -> Vec<StateVector> {
        self.parts.iter().map(|e| e.psi1.clone()).collect()
    }
}

/// Anything the optimizer can train: one problem or a multi-size average.
pub trait LossOracle: Sync {
    fn n_theta1(&self) -> usize;

    fn rounds(&self) -> usize;

    /// Value and both gradient blocks.
    fn full(&self, theta1: &[f64], policies: &[Policy], rng: &mut ChaCha8Rng) -> Result<Evaluation>;

    /// Value and policy gradient, reusing first-round states computed at the
    /// current `θ₁`.
    fn policy_step(
        &self,
        theta1: &[f64],
        policies: &[Policy],
        rng: &mut ChaCha8Rng,
        psi1: &[StateVector],
    ) -> Result<Evaluation>;

    /// Value only.
    fn value(&self, theta1: &[f64], policies: &[Policy], rng: &mut ChaCha8Rng) -> Result<Evaluation>;

    /// `U₁(θ₁)|0⟩` for every problem, in the order expected by
    /// [`LossOracle::policy_step`].
    fn first_round_states(&self, theta1: &[f64]) -> Result<Vec<StateVector>>;
}

fn eval_problems(
    problems: &[Problem],
    theta1: &[f64],
    policies: &[Policy],
    rng: &mut ChaCha8Rng,
    req: Request,
    psi1: Option<&[StateVector]>,
) -> Result<Evaluation> {
    if let Some(c) = psi1 {
        if c.len() != problems.len() {
            return Err(Error::Shape("state cache does not match the problem list".into()));
        }
    }
    let parts = problems
        .iter()
        .enumerate()
        .map(|(i, p)| evaluate_with(p, theta1, policies, Some(&mut *rng), req, psi1.map(|c| &c[i])))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::mean(parts))
}

impl LossOracle for Problem {
    fn n_theta1(&self) -> usize {
        self.spec.u1().n_params()
    }

    fn rounds(&self) -> usize {
        self.spec.rounds()
    }

    fn full(&self, theta1: &[f64], policies: &[Policy], rng: &mut ChaCha8Rng) -> Result<Evaluation> {
        eval_problems(std::slice::from_ref(self), theta1, policies, rng, Request::FULL, None)
    }

    fn policy_step(
        &self,
        theta1: &[f64],
        policies: &[Policy],
        rng: &mut ChaCha8Rng,
        psi1: &[StateVector],
    ) -> Result<Evaluation> {
        eval_problems(std::slice::from_ref(self), theta1, policies, rng, Request::POLICY, Some(psi1))
    }

    fn value(&self, theta1: &[f64], policies: &[Policy], rng: &mut ChaCha8Rng) -> Result<Evaluation> {
        eval_problems(std::slice::from_ref(self), theta1, policies, rng, Request::VALUE, None)
    }

    fn first_round_states(&self, theta1: &[f64]) -> Result<Vec<StateVector>> {
        Ok(vec![self.spec.prepare(theta1)?])
    }
}

impl LossOracle for MultiSize {
    fn n_theta1(&self) -> usize {
        self.problems[0].spec.u1().n_params()
    }

    fn rounds(&self) -> usize {
        self.problems[0].spec.rounds()
    }

    fn full(&self, theta1: &[f64], policies: &[Policy], rng: &mut ChaCha8Rng) -> Result<Evaluation> {
        eval_problems(&self.problems, theta1, policies, rng, Request::FULL, None)
    }

    fn policy_step(
        &self,
        theta1: &[f64],
        policies: &[Policy],
        rng: &mut ChaCha8Rng,
        psi1: &[StateVector],
    ) -> Result<Evaluation> {
        eval_problems(&self.problems, theta1, policies, rng, Request::POLICY, Some(psi1))
    }

    fn value(&self, theta1: &[f64], policies: &[Policy], rng: &mut ChaCha8Rng) -> Result<Evaluation> {
        eval_problems(&self.problems, theta1, policies, rng, Request::VALUE, None)
    }

    fn first_round_states(&self, theta1: &[f64]) -> Result<Vec<StateVector>> {
        self.problems.iter().map(|p| p.spec.prepare(theta1)).collect()
    }
}

/// One finite-difference comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct FdRow {
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FdReport {
    pub rows: Vec<FdRow>,
}

impl FdReport {
    pub fn max_rel_err(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_err).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&FdRow> {
        self.rows.iter().max_by(|a, b| a.rel_err.total_cmp(&b.rel_err))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["coordinate", "analytic", "numeric", "relative_error"])?;
        for r in &self.rows {
            out.write_record([
                r.coordinate.to_string(),
                format!("{:e}", r.analytic),
                format!("{:e}", r.numeric),
                format!("{:e}", r.rel_err),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `|a − n| / max(|a|, |n|, 10⁻³)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Central differences of `f` at `x` on the given coordinates, compared
/// against `grad`.
pub fn fd_check_fn<F>(f: F, x: &[f64], grad: &[f64], eps: f64, coords: &[usize]) -> Result<FdReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut rows = Vec::with_capacity(coords.len());
    let mut y = x.to_vec();
    for &c in coords {
        y[c] = x[c] + eps;
        let up = f(&y)?;
        y[c] = x[c] - eps;
        let down = f(&y)?;
        y[c] = x[c];
        let numeric = (up - down) / (2.0 * eps);
        rows.push(FdRow {
            coordinate: c,
            analytic: grad[c],
            numeric,
            rel_err: relative_error(grad[c], numeric),
        });
    }
    Ok(FdReport { rows })
}

/// Checks the gradient of an exact-mode problem. Coordinates index the
/// concatenation `(θ₁, W_1, …, W_rounds)`; `None` checks all of them.
pub fn fd_check(
    problem: &Problem,
    theta1: &[f64],
    policies: &[Policy],
    eps: f64,
    coords: Option<&[usize]>,
) -> Result<FdReport> {
    if problem.loss.mode != crate::protocol::EvalMode::Exact {
        return Err(Error::InvalidSpec("finite-difference checks need exact evaluation".into()));
    }
    let (_, g) = loss_and_grad::<ChaCha8Rng>(problem, theta1, policies, None)?;
    let n1 = theta1.len();
    let sizes: Vec<usize> = policies.iter().map(|p| p.n_weights()).collect();
    let mut x = theta1.to_vec();
    for p in policies {
        x.extend_from_slice(p.weights());
    }
    let grad: Vec<f64> = g.d_theta1.iter().chain(&g.d_policy).copied().collect();
    let all: Vec<usize> = (0..x.len()).collect();
    let coords = coords.unwrap_or(&all);
    let f = |y: &[f64]| -> Result<f64> {
        let mut pols = policies.to_vec();
        let mut off = n1;
        for (p, &k) in pols.iter_mut().zip(&sizes) {
            p.weights_mut().copy_from_slice(&y[off..off + k]);
            off += k;
        }
        crate::protocol::total_loss::<ChaCha8Rng>(problem, &y[..n1], &pols, None)
    };
    fd_check_fn(f, &x, &grad, eps, coords)
}

/// `∂P(M)/∂θ₁` for every first-round outcome (rows indexed by `M`).
pub fn outcome_probability_jacobian(
    spec: &crate::protocol::ProtocolSpec,
    theta1: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let slots = spec.u1().expand(theta1)?;
    let psi = spec.prepare(theta1)?.into_amplitudes();
    let zero = crate::C64::new(0.0, 0.0);
    (0..1usize << spec.layout().n_ancilla())
        .map(|m| {
            let mut lam = vec![zero; psi.len()];
            spec.scatter_add(&mut lam, m, &spec.extract(&psi, m));
            let mut back = psi.clone();
            let mut g = vec![0.0; slots.len()];
            spec.prog1().backward(&mut back, &mut lam, &slots, &mut g);
            Ok(spec.u1().collapse(&g))
        })
        .collect()
}
