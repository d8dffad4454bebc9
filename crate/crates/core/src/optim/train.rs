use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AdamConfig, AdamState, ScheduleSpec};
use crate::feedback::Policy;
use crate::gradients::{Evaluation, LossOracle};
use crate::qsim::{entanglement_entropy, shannon_entropy};
use crate::{Error, Result};

/// Infidelity at which training stops early.
pub const DEFAULT_EARLY_STOP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub schedule: ScheduleSpec,
    pub adam: AdamConfig,
    /// Stop once the epoch's infidelity drops to this value.
    pub early_stop: f64,
    /// Compute the system–ancilla entanglement entropy every this many
    /// epochs (and at the last one). `None` computes it only at the end.
    pub entropy_interval: Option<usize>,
    /// Keep a parameter snapshot every this many epochs.
    pub snapshot_interval: Option<usize>,
}

impl TrainConfig {
    pub fn new(epochs: usize, schedule: ScheduleSpec) -> Self {
        Self {
            epochs,
            schedule,
            adam: AdamConfig::default(),
            early_stop: DEFAULT_EARLY_STOP,
            entropy_interval: None,
            snapshot_interval: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradKind {
    Theta1,
    Policy,
}

/// One gradient evaluation made by [`update_parameters`], with the number
/// of ADAM steps each block had taken when it was requested.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradCall {
    pub kind: GradKind,
    pub theta1_steps: u64,
    pub policy_steps: u64,
}

/// One ADAM step on `θ₁` from the full gradient at `(θ₁, W)`, then `freq`
/// sequential steps on `W`, each from the policy gradient at the updated
/// `θ₁` and the current `W`. Returns the evaluation at the starting point.
#[allow(clippy::too_many_arguments)]
pub fn update_parameters<O: LossOracle + ?Sized>(
    oracle: &O,
    theta1: &mut [f64],
    policies: &mut [Policy],
    adam_theta1: &mut AdamState,
    adam_policy: &mut [AdamState],
    freq: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
    mut log: Option<&mut Vec<GradCall>>,
) -> Result<Evaluation> {
    if adam_policy.len() != policies.len() {
        return Err(Error::Arity {
            expected: policies.len(),
            got: adam_policy.len(),
        });
    }
    let policy_steps = |a: &[AdamState]| a.first().map_or(0, |s| s.steps());
    if let Some(l) = log.as_deref_mut() {
        l.push(GradCall {
            kind: GradKind::Theta1,
            theta1_steps: adam_theta1.steps(),
            policy_steps: policy_steps(adam_policy),
        });
    }
    let start = oracle.full(theta1, policies, rng)?;
    let g1 = start.d_theta1.as_ref().expect("full evaluation");
    check_finite(g1, "θ₁ gradient")?;
    adam_theta1.step(theta1, g1, lr)?;

    // ψ₁ only depends on θ₁, which stays fixed during the inner loop
    let states = if freq > 0 { oracle.first_round_states(theta1)? } else { Vec::new() };
    for _ in 0..freq {
        if let Some(l) = log.as_deref_mut() {
            l.push(GradCall {
                kind: GradKind::Policy,
                theta1_steps: adam_theta1.steps(),
                policy_steps: policy_steps(adam_policy),
            });
        }
        let e = oracle.policy_step(theta1, policies, rng, &states)?;
        let gw = e.d_policy.as_ref().expect("policy gradient");
        check_finite(gw, "policy gradient")?;
        let mut off = 0;
        for (p, a) in policies.iter_mut().zip(adam_policy.iter_mut()) {
            let k = p.n_weights();
            a.step(p.weights_mut(), &gw[off..off + k], lr)?;
            off += k;
        }
    }
    Ok(start)
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericAbort(format!("non-finite {what}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub infidelity: f64,
    /// Shannon entropy of the first-round outcome table, in bits.
    pub shannon: f64,
    /// System–ancilla entanglement entropy of `U₁|0⟩`, in bits.
    pub entanglement: Option<f64>,
    pub regularization: f64,
    pub lr: f64,
    pub freq: usize,
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub epoch: usize,
    pub theta1: Vec<f64>,
    pub policies: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Completed,
    /// Infidelity reached the early-stop threshold.
    Converged,
    NumericAbort(String),
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub seed: u64,
    pub metrics: Vec<EpochMetrics>,
    pub theta1: Vec<f64>,
    pub policies: Vec<Policy>,
    pub snapshots: Vec<Snapshot>,
    pub stop: StopReason,
}

impl RunRecord {
    pub fn final_metrics(&self) -> Option<&EpochMetrics> {
        self.metrics.last()
    }

    /// `epoch,loss,infidelity,H,S,l_R,lr,freq,noise`, LF line endings; `S`
    /// is empty where it was not computed.
    pub fn write_metrics_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(["epoch", "loss", "infidelity", "H", "S", "l_R", "lr", "freq", "noise"])?;
        for m in &self.metrics {
            out.write_record([
                m.epoch.to_string(),
                format!("{:e}", m.loss),
                format!("{:e}", m.infidelity),
                format!("{:e}", m.shannon),
                m.entanglement.map(|s| format!("{s:e}")).unwrap_or_default(),
                format!("{:e}", m.regularization),
                format!("{:e}", m.lr),
                m.freq.to_string(),
                format!("{:e}", m.noise),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn metrics_from(
    epoch: usize,
    e: &Evaluation,
    lr: f64,
    freq: usize,
    noise: f64,
    entanglement: Option<f64>,
) -> EpochMetrics {
    let shannon = e.parts.iter().map(|p| shannon_entropy(&p.table)).sum::<f64>() / e.parts.len() as f64;
    EpochMetrics {
        epoch,
        loss: e.loss,
        infidelity: e.infidelity,
        shannon,
        entanglement,
        regularization: e.regularization,
        lr,
        freq,
        noise,
    }
}

fn entanglement_of(e: &Evaluation) -> Result<f64> {
    let mut sum = 0.0;
    for p in &e.parts {
        let anc = p.psi1.layout().ancilla_qubits().to_vec();
        sum += if anc.is_empty() { 0.0 } else { entanglement_entropy(&p.psi1, &anc)? };
    }
    Ok(sum / e.parts.len() as f64)
}

/// Trains from the given starting point, one [`update_parameters`] call per
/// epoch.
///
/// Each epoch logs the metrics of the evaluation at its starting point,
/// then updates, then adds uniform noise of the scheduled amplitude to every
/// parameter. A numeric failure ends the run with
/// [`StopReason::NumericAbort`] and keeps the metrics gathered so far.
pub fn train<O: LossOracle + ?Sized>(
    oracle: &O,
    theta1: Vec<f64>,
    policies: Vec<Policy>,
    config: &TrainConfig,
    seed: u64,
) -> Result<RunRecord> {
    config.schedule.validate()?;
    if theta1.len() != oracle.n_theta1() {
        return Err(Error::Arity {
            expected: oracle.n_theta1(),
            got: theta1.len(),
        });
    }
    if policies.len() != oracle.rounds() {
        return Err(Error::Arity {
            expected: oracle.rounds(),
            got: policies.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta1 = theta1;
    let mut policies = policies;
    let mut adam1 = AdamState::new(theta1.len(), config.adam);
    let mut adamw: Vec<AdamState> =
        policies.iter().map(|p| AdamState::new(p.n_weights(), config.adam)).collect();
    let mut record = RunRecord {
        seed,
        metrics: Vec::with_capacity(config.epochs),
        theta1: Vec::new(),
        policies: Vec::new(),
        snapshots: Vec::new(),
        stop: StopReason::Completed,
    };

    for epoch in 0..config.epochs {
        if let Some(k) = config.snapshot_interval {
            if k > 0 && epoch % k == 0 {
                record.snapshots.push(snapshot(epoch, &theta1, &policies));
            }
        }
        let lr = config.schedule.lr.at(epoch);
        let freq = config.schedule.freq.at(epoch);
        let noise = config.schedule.noise.at(epoch);
        let before = (theta1.clone(), policies.clone());
        let e = match update_parameters(
            oracle,
            &mut theta1,
            &mut policies,
            &mut adam1,
            &mut adamw,
            freq,
            lr,
            &mut rng,
            None,
        ) {
            Ok(e) => e,
            Err(Error::NumericAbort(msg)) => {
                record.stop = StopReason::NumericAbort(format!("epoch {epoch}: {msg}"));
                theta1 = before.0;
                policies = before.1;
                break;
            }
            Err(e) => return Err(e),
        };
        let converged = e.infidelity <= config.early_stop;
        let last = epoch + 1 == config.epochs;
        let want_s = converged
            || last
            || config.entropy_interval.is_some_and(|k| k > 0 && epoch % k == 0);
        let s = if want_s { Some(entanglement_of(&e)?) } else { None };
        record.metrics.push(metrics_from(epoch, &e, lr, freq, noise, s));
        if converged {
            // keep the parameters that achieved the logged infidelity
            theta1 = before.0;
            policies = before.1;
            record.stop = StopReason::Converged;
            break;
        }
        if noise > 0.0 {
            for x in theta1.iter_mut() {
                *x += rng.random_range(-noise..noise);
            }
            for p in policies.iter_mut() {
                for x in p.weights_mut() {
                    *x += rng.random_range(-noise..noise);
                }
            }
        }
    }
    record.theta1 = theta1;
    record.policies = policies;
    Ok(record)
}

fn snapshot(epoch: usize, theta1: &[f64], policies: &[Policy]) -> Snapshot {
    Snapshot {
        epoch,
        theta1: theta1.to_vec(),
        policies: policies.iter().map(|p| p.weights().to_vec()).collect(),
    }
}
