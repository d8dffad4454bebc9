use crate::qsim::ProbTable;
use crate::P_FLOOR;

/// Half-width `c = log₂(r) / (2 N_a)` of the flat window.
pub fn window_halfwidth(ratio: f64, n_ancilla: usize) -> f64 {
    ratio.log2() / (2.0 * n_ancilla as f64)
}

fn deviation(p: f64, n_ancilla: usize) -> f64 {
    1.0 + p.max(P_FLOOR).log2() / n_ancilla as f64
}

/// Hinge penalty pulling every outcome probability towards uniform.
///
/// With `d(M) = 1 + log₂ P(M) / N_a` (probabilities clamped at
/// [`P_FLOOR`]), each outcome contributes nothing while `|d| < c` and
/// `(|d| − c)²` outside; the result is the mean over all `2^{N_a}` outcomes.
/// `l_R = 0` exactly when `max P / min P ≤ r` holds in the strong sense that
/// every `P(M)` lies within a factor `√r` of uniform.
pub fn ancilla_regularization(table: &ProbTable, ratio: f64) -> f64 {
    let na = table.n_ancilla();
    if na == 0 {
        return 0.0;
    }
    let c = window_halfwidth(ratio, na);
    let sum: f64 = table
        .probs()
        .iter()
        .map(|&p| {
            let d = deviation(p, na);
            let excess = d.abs() - c;
            if excess > 0.0 {
                excess * excess
            } else {
                0.0
            }
        })
        .sum();
    sum / table.len() as f64
}

/// `∂l_R/∂P(M)` for every outcome; zero inside the window and wherever the
/// probability is clamped.
pub fn regularization_derivative(table: &ProbTable, ratio: f64) -> Vec<f64> {
    let na = table.n_ancilla();
    if na == 0 {
        return vec![0.0; table.len()];
    }
    let c = window_halfwidth(ratio, na);
    let scale = 1.0 / table.len() as f64;
    table
        .probs()
        .iter()
        .map(|&p| {
            if p < P_FLOOR {
                return 0.0;
            }
            let d = deviation(p, na);
            let excess = d.abs() - c;
            if excess > 0.0 {
                scale * 2.0 * excess * d.signum() / (na as f64 * p * std::f64::consts::LN_2)
            } else {
                0.0
            }
        })
        .collect()
}
