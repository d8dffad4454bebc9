use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::local::{bfgs, LocalOptConfig};
use crate::feedback::{MeasurementRecord, Policy};
use crate::protocol::Problem;
use crate::{Error, Result, C64, P_FLOOR};

/// How far the optimal feedback angles move when one ancilla bit flips.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectabilityReport {
    /// Ancilla index (layout order) that was flipped.
    pub index: usize,
    pub outcome: usize,
    pub flipped: usize,
    /// Physical position of the flipped ancilla.
    pub ancilla_position: usize,
    /// Physical position of every system site.
    pub site_positions: Vec<usize>,
    /// Largest `|θ − θ′|` over the angles attributed to each system site.
    pub delta: Vec<f64>,
    pub penalty: f64,
    pub fidelity: f64,
    pub fidelity_flipped: f64,
    /// False without a penalty: `θ′` is then not tied to `θ` and its
    /// deviation says nothing about locality.
    pub identifiable: bool,
}

impl CorrectabilityReport {
    /// Deviations of the sites left and right of the flipped ancilla.
    pub fn sides(&self) -> (Vec<f64>, Vec<f64>) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (&p, &d) in self.site_positions.iter().zip(&self.delta) {
            if p < self.ancilla_position {
                left.push(d);
            } else {
                right.push(d);
            }
        }
        (left, right)
    }
}

/// `1 − F(U₂(θ) φ)` plus `penalty · Σ (θ − reference)²`, with gradient.
fn feedback_loss(
    problem: &Problem,
    phi: &[C64],
    reference: Option<(&[f64], f64)>,
    x: &[f64],
    g: &mut [f64],
) -> Result<f64> {
    let spec = &problem.spec;
    let mut chi = phi.to_vec();
    spec.prog2().apply(&mut chi, x);
    let mut pi = vec![C64::new(0.0, 0.0); chi.len()];
    problem.target.project_into(&chi, &mut pi);
    let f: f64 = pi.iter().zip(&chi).map(|(a, b)| (b.conj() * a).re).sum();
    let mut lam: Vec<C64> = pi.iter().map(|a| -a).collect();
    spec.prog2().backward(&mut chi, &mut lam, x, g);
    let mut loss = 1.0 - f;
    if let Some((r, w)) = reference {
        for i in 0..x.len() {
            let d = x[i] - r[i];
            loss += w * d * d;
            g[i] += 2.0 * w * d;
        }
    }
    Ok(loss)
}

fn branch_state(psi: &[C64], problem: &Problem, m: usize) -> (Vec<C64>, f64) {
    let mut phi = problem.spec.extract(psi, m);
    let p: f64 = phi.iter().map(|a| a.norm_sqr()).sum();
    if p > 0.0 {
        let inv = 1.0 / p.sqrt();
        phi.iter_mut().for_each(|a| *a *= inv);
    }
    (phi, p)
}

/// Feedback correctability check for ancilla `index`.
///
/// Draws `M` from the first-round distribution, optimizes the feedback
/// angles for `M` starting from the policy's output, flips bit `index` to
/// get `M′`, and re-optimizes from those angles with the penalty
/// `penalty · Σ (θ′ − θ)²` over all angle slots. Draws whose `M′` lies below
/// the probability floor are redrawn.
pub fn correctability_check(
    problem: &Problem,
    theta1: &[f64],
    policy: &Policy,
    index: usize,
    penalty: f64,
    seed: u64,
    cfg: &LocalOptConfig,
) -> Result<CorrectabilityReport> {
    let spec = &problem.spec;
    let layout = spec.layout();
    if index >= layout.n_ancilla() {
        return Err(Error::IndexOutOfRange {
            index,
            n_qubits: layout.n_ancilla(),
        });
    }
    if penalty < 0.0 {
        return Err(Error::InvalidSpec("penalty weight must be nonnegative".into()));
    }
    let psi1 = spec.prepare(theta1)?;
    let table = psi1.outcome_distribution();
    let psi = psi1.into_amplitudes();
    let weights: Vec<f64> = table.probs().iter().map(|&p| if p < P_FLOOR { 0.0 } else { p }).collect();
    let dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::NumericAbort(format!("outcome distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = None;
    for _ in 0..1000 {
        let m = dist.sample(&mut rng);
        if table.get(m ^ (1 << index)) >= P_FLOOR {
            chosen = Some(m);
            break;
        }
    }
    let m = chosen.ok_or(Error::ZeroProbabilityBranch { prob: 0.0 })?;
    let m2 = m ^ (1 << index);

    let rec = MeasurementRecord::from_outcome(layout, m)?;
    let start = spec.u2().expand(&policy.eval(spec.context(), &rec)?)?;
    let (phi, _) = branch_state(&psi, problem, m);
    let (l1, theta) = bfgs(start, cfg, |x, g| feedback_loss(problem, &phi, None, x, g))?;
    let (phi2, _) = branch_state(&psi, problem, m2);
    let (_, theta2) = bfgs(theta.clone(), cfg, |x, g| {
        feedback_loss(problem, &phi2, Some((&theta, penalty)), x, g)
    })?;
    let mut scratch = vec![0.0; theta2.len()];
    let f2 = 1.0 - feedback_loss(problem, &phi2, None, &theta2, &mut scratch)?;

    let n_sys = layout.n_system();
    let mut delta = vec![0.0f64; n_sys];
    for (k, c) in spec.u2().slot_coords().iter().enumerate() {
        delta[c.qubit] = delta[c.qubit].max((theta[k] - theta2[k]).abs());
    }
    Ok(CorrectabilityReport {
        index,
        outcome: m,
        flipped: m2,
        ancilla_position: layout.ancilla_qubits()[index],
        site_positions: layout.system_qubits().to_vec(),
        delta,
        penalty,
        fidelity: 1.0 - l1,
        fidelity_flipped: f2,
        identifiable: penalty > 0.0,
    })
}

/// `site,position,delta_theta` rows.
pub fn write_correctability_csv<W: Write>(w: W, report: &CorrectabilityReport) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(["site", "position", "delta_theta"])?;
    for (j, (&p, &d)) in report.site_positions.iter().zip(&report.delta).enumerate() {
        out.write_record([j.to_string(), p.to_string(), format!("{d:e}")])?;
    }
    out.flush()?;
    Ok(())
}
