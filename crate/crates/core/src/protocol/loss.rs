use crate::protocol::spec::ProtocolSpec;
use crate::qsim::StateVector;
use crate::targets::{QubitOperator, TargetManifold};
use crate::{Error, Result, C64};

/// What is minimized on each post-feedback branch.
#[derive(Clone, Debug)]
pub enum Objective {
    /// `1 − F`, with `F` the weight inside the target span.
    Fidelity,
    /// Infidelity per site `1 − F^{1/N_s}`.
    PerSite,
    /// GHZ loss with the local-minimum attenuation parameter `λ ∈ [0, 1]`.
    GhzLambda(f64),
    /// Energy `⟨H⟩`.
    Energy(QubitOperator),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularization {
    /// Allowed ratio `r > 1` between the largest and smallest outcome
    /// probability.
    pub ratio: f64,
    pub weight: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self {
            ratio: 2.0,
            weight: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Sum over every outcome branch.
    Exact,
    /// Mean of the normalized per-branch loss over outcomes drawn from
    /// `P(M)`. Gradients treat the drawn outcomes as fixed.
    Sampled { batch: usize },
}

#[derive(Clone, Debug)]
pub struct LossSpec {
    pub objective: Objective,
    pub regularization: Option<Regularization>,
    pub mode: EvalMode,
}

impl LossSpec {
    pub fn exact(objective: Objective) -> Self {
        Self {
            objective,
            regularization: None,
            mode: EvalMode::Exact,
        }
    }

    pub fn regularized(mut self, reg: Regularization) -> Self {
        self.regularization = Some(reg);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Objective::GhzLambda(l) = self.objective {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidSpec(format!("lambda {l} outside [0, 1]")));
            }
        }
        if let Some(r) = self.regularization {
            if r.ratio <= 1.0 || r.weight < 0.0 {
                return Err(Error::InvalidSpec(
                    "regularization needs ratio > 1 and weight >= 0".into(),
                ));
            }
        }
        if let EvalMode::Sampled { batch: 0 } = self.mode {
            return Err(Error::InvalidSpec("sampled mode needs batch >= 1".into()));
        }
        Ok(())
    }
}

/// A protocol together with its target and loss.
///
/// The target always defines the reported infidelity, whatever the
/// objective being minimized.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProtocolSpec,
    pub target: TargetManifold,
    pub loss: LossSpec,
}

impl Problem {
    pub fn new(spec: ProtocolSpec, target: TargetManifold, loss: LossSpec) -> Result<Self> {
        loss.validate()?;
        if target.n_qubits() != spec.layout().n_system() {
            return Err(Error::Shape(format!(
                "target on {} qubits, system register has {}",
                target.n_qubits(),
                spec.layout().n_system()
            )));
        }
        if let Objective::Energy(h) = &loss.objective {
            if h.n_qubits() != spec.layout().n_system() {
                return Err(Error::Shape("Hamiltonian does not match the system register".into()));
            }
        }
        if let Objective::GhzLambda(_) = loss.objective {
            if target.basis().len() != 1 {
                return Err(Error::InvalidSpec("GHZ loss needs a single-state target".into()));
            }
        }
        Ok(Self { spec, target, loss })
    }
}

/// Several problems sharing one tied `θ₁` and one policy, averaged.
#[derive(Clone, Debug)]
pub struct MultiSize {
    pub problems: Vec<Problem>,
}

impl MultiSize {
    pub fn new(problems: Vec<Problem>) -> Result<Self> {
        let first = problems
            .first()
            .ok_or_else(|| Error::InvalidSpec("size list is empty".into()))?;
        for p in &problems {
            if !p.spec.u1().is_tied() {
                return Err(Error::InvalidSpec(
                    "multi-size training needs a translation-invariant (tied) U1".into(),
                ));
            }
            if p.spec.u1().n_params() != first.spec.u1().n_params() {
                return Err(Error::InvalidSpec("tied U1 circuits differ in parameter count".into()));
            }
        }
        Ok(Self { problems })
    }
}

/// `(1 − λ/2) − (1−λ)/2 (|⟨0…0|ψ⟩|² + |⟨1…1|ψ⟩|²) − Re(⟨0…0|ψ⟩⟨ψ|1…1⟩)` for
/// a normalized state.
pub fn ghz_lambda_loss(state: &StateVector, lambda: f64) -> f64 {
    ghz_quadratic(state.amplitudes(), lambda) / state.norm_sqr()
}

/// `⟨v|K_λ|v⟩` for an unnormalized vector.
pub(crate) fn ghz_quadratic(v: &[C64], lambda: f64) -> f64 {
    let n2 = v.iter().map(|a| a.norm_sqr()).sum::<f64>();
    let a0 = v[0];
    let a1 = v[v.len() - 1];
    (1.0 - lambda / 2.0) * n2
        - (1.0 - lambda) / 2.0 * (a0.norm_sqr() + a1.norm_sqr())
        - (a0 * a1.conj()).re
}

/// `K_λ v`.
pub(crate) fn ghz_apply(v: &[C64], lambda: f64) -> Vec<C64> {
    let last = v.len() - 1;
    let mut out: Vec<C64> = v.iter().map(|a| a * (1.0 - lambda / 2.0)).collect();
    out[0] -= v[0] * ((1.0 - lambda) / 2.0) + v[last] * 0.5;
    out[last] -= v[last] * ((1.0 - lambda) / 2.0) + v[0] * 0.5;
    out
}
