use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::circuits::{ParamCircuit, Program};
use crate::feedback::{FeedbackContext, MeasurementRecord, Policy};
use crate::protocol::engine::{self, Request};
use crate::protocol::loss::{MultiSize, Problem};
use crate::qsim::{QubitLayout, RegisterMap, StateVector};
use crate::targets::{QubitOperator, TargetManifold};
use crate::{Error, Result, C64, P_FLOOR};

/// Register layout, the two circuits and the number of feedback rounds.
#[derive(Clone, Debug)]
pub struct ProtocolSpec {
    layout: QubitLayout,
    u1: ParamCircuit,
    u2: ParamCircuit,
    rounds: usize,
    map: RegisterMap,
    prog1: Program,
    prog2: Program,
}

impl ProtocolSpec {
    pub fn new(layout: QubitLayout, u1: ParamCircuit, u2: ParamCircuit) -> Result<Self> {
        if u1.n_qubits() != layout.n_qubits() {
            return Err(Error::InvalidSpec(format!(
                "U1 acts on {} qubits, layout has {}",
                u1.n_qubits(),
                layout.n_qubits()
            )));
        }
        if u2.n_qubits() != layout.n_system() {
            return Err(Error::InvalidSpec(format!(
                "U2 must act on the {} system qubits, not {}",
                layout.n_system(),
                u2.n_qubits()
            )));
        }
        if u2.is_tied() {
            return Err(Error::InvalidSpec("U2 angles come from the policy and cannot be tied".into()));
        }
        let map = layout.register_map();
        let prog1 = u1.compile();
        let prog2 = u2.compile();
        Ok(Self {
            layout,
            u1,
            u2,
            rounds: 1,
            map,
            prog1,
            prog2,
        })
    }

    pub fn with_rounds(mut self, rounds: usize) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::InvalidSpec("rounds must be at least 1".into()));
        }
        self.rounds = rounds;
        Ok(self)
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn u1(&self) -> &ParamCircuit {
        &self.u1
    }

    pub fn u2(&self) -> &ParamCircuit {
        &self.u2
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn context(&self) -> FeedbackContext<'_> {
        FeedbackContext {
            layout: &self.layout,
            u2: &self.u2,
        }
    }


    pub(crate) fn prog1(&self) -> &Program {
        &self.prog1
    }

    pub(crate) fn prog2(&self) -> &Program {
        &self.prog2
    }

    pub(crate) fn check_policies(&self, policies: &[Policy]) -> Result<()> {
        if policies.len() != self.rounds {
            return Err(Error::Arity {
                expected: self.rounds,
                got: policies.len(),
            });
        }
        Ok(())
    }

    /// `ψ₁ = U₁(θ₁)|0⟩` over the full register.
    pub fn prepare(&self, theta1: &[f64]) -> Result<StateVector> {
        let slots = self.u1.expand(theta1)?;
        let mut s = crate::qsim::zero_state(&self.layout)?;
        self.prog1.apply(s.amplitudes_mut(), &slots);
        Ok(s)
    }

    /// System amplitudes of `v` at ancilla outcome `m`.
    pub(crate) fn extract(&self, v: &[C64], m: usize) -> Vec<C64> {
        let off = self.map.ancilla_offset[m];
        self.map.system_offset.iter().map(|&s| v[s | off]).collect()
    }

    /// Full register with ancillas in `|0⟩` and the given system amplitudes.
    pub(crate) fn embed(&self, sys: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); 1 << self.layout.n_qubits()];
        for (&s, &a) in self.map.system_offset.iter().zip(sys) {
            out[s] = a;
        }
        out
    }

    pub(crate) fn scatter_add(&self, v: &mut [C64], m: usize, sys: &[C64]) {
        let off = self.map.ancilla_offset[m];
        for (&s, &a) in self.map.system_offset.iter().zip(sys) {
            v[s | off] += a;
        }
    }

    /// Feedback angles for outcome `m` in `round`, applied to `phi` in place.
    pub(crate) fn feedback(
        &self,
        policy: &Policy,
        m: usize,
        phi: &mut [C64],
    ) -> Result<(MeasurementRecord, Vec<f64>)> {
        let rec = MeasurementRecord::from_outcome(&self.layout, m)?;
        let theta2 = policy.eval(self.context(), &rec)?;
        let slots = self.u2.expand(&theta2)?;
        self.prog2.apply(phi, &slots);
        Ok((rec, slots))
    }

    fn system_layout(&self) -> QubitLayout {
        QubitLayout::system_only(self.layout.n_system()).expect("nonempty system")
    }
}

/// One measurement history with its probability and the normalized
/// post-feedback register (ancillas reset to `|0⟩`).
#[derive(Clone, Debug)]
pub struct OutcomeBranch {
    /// First-round outcome.
    pub m: MeasurementRecord,
    /// Outcomes of rounds after the first.
    pub later: Vec<MeasurementRecord>,
    pub prob: f64,
    pub state: StateVector,
    system: Vec<C64>,
}

impl OutcomeBranch {
    /// Normalized system amplitudes.
    pub fn system_amplitudes(&self) -> &[C64] {
        &self.system
    }

    pub fn system_state(&self) -> StateVector {
        let layout = QubitLayout::system_only(self.system.len().trailing_zeros() as usize)
            .expect("nonempty system");
        StateVector::from_amplitudes(&layout, self.system.clone()).expect("matching size")
    }
}

fn branch(spec: &ProtocolSpec, history: &[usize], sys: Vec<C64>) -> Result<OutcomeBranch> {
    let prob: f64 = sys.iter().map(|a| a.norm_sqr()).sum();
    let inv = 1.0 / prob.sqrt();
    let system: Vec<C64> = sys.iter().map(|a| a * inv).collect();
    let mut state = StateVector::from_amplitudes(spec.layout(), spec.embed(&system))?;
    state.normalize();
    let recs = history
        .iter()
        .map(|&m| MeasurementRecord::from_outcome(spec.layout(), m))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutcomeBranch {
        m: recs[0].clone(),
        later: recs[1..].to_vec(),
        prob,
        state,
        system,
    })
}

/// Every measurement history with probability at least [`P_FLOOR`], in
/// lexicographic order of the outcome bitstrings (round 1 first).
pub fn run_branches(
    spec: &ProtocolSpec,
    theta1: &[f64],
    policies: &[Policy],
) -> Result<Vec<OutcomeBranch>> {
    spec.check_policies(policies)?;
    let slots1 = spec.u1().expand(theta1)?;
    let mut out = Vec::new();
    let start = crate::qsim::zero_state(spec.layout())?.into_amplitudes();
    walk(spec, &slots1, policies, &start, &mut Vec::new(), &mut out)?;
    Ok(out)
}

fn walk(
    spec: &ProtocolSpec,
    slots1: &[f64],
    policies: &[Policy],
    input: &[C64],
    history: &mut Vec<usize>,
    out: &mut Vec<OutcomeBranch>,
) -> Result<()> {
    let mut psi = input.to_vec();
    spec.prog1().apply(&mut psi, slots1);
    let round = history.len();
    for m in 0..1usize << spec.layout().n_ancilla() {
        let mut phi = spec.extract(&psi, m);
        if phi.iter().map(|a| a.norm_sqr()).sum::<f64>() < P_FLOOR {
            continue;
        }
        spec.feedback(&policies[round], m, &mut phi)?;
        history.push(m);
        if round + 1 == spec.rounds() {
            out.push(branch(spec, history, phi)?);
        } else {
            walk(spec, slots1, policies, &spec.embed(&phi), history, out)?;
        }
        history.pop();
    }
    Ok(())
}

/// Draws one measurement history with probability `P(M)`.
pub fn sample_run<R: Rng>(
    spec: &ProtocolSpec,
    theta1: &[f64],
    policies: &[Policy],
    rng: &mut R,
) -> Result<OutcomeBranch> {
    spec.check_policies(policies)?;
    let slots1 = spec.u1().expand(theta1)?;
    let mut cur = crate::qsim::zero_state(spec.layout())?.into_amplitudes();
    let mut history = Vec::new();
    for round in 0..spec.rounds() {
        let mut psi = cur;
        spec.prog1().apply(&mut psi, &slots1);
        let probs: Vec<f64> = (0..1usize << spec.layout().n_ancilla())
            .map(|m| {
                let p: f64 = spec.extract(&psi, m).iter().map(|a| a.norm_sqr()).sum();
                if p < P_FLOOR {
                    0.0
                } else {
                    p
                }
            })
            .collect();
        let dist = WeightedIndex::new(&probs)
            .map_err(|e| Error::NumericAbort(format!("outcome distribution: {e}")))?;
        let m = dist.sample(rng);
        let mut phi = spec.extract(&psi, m);
        spec.feedback(&policies[round], m, &mut phi)?;
        history.push(m);
        cur = spec.embed(&phi);
        if round + 1 == spec.rounds() {
            return branch(spec, &history, phi);
        }
    }
    unreachable!("rounds >= 1")
}

/// `Σ_branches P · Σ_i |⟨ψ_i|branch⟩|²`.
pub fn manifold_fidelity(
    spec: &ProtocolSpec,
    theta1: &[f64],
    policies: &[Policy],
    manifold: &TargetManifold,
) -> Result<f64> {
    Ok(run_branches(spec, theta1, policies)?
        .iter()
        .map(|b| b.prob * manifold.weight(b.system_amplitudes()))
        .sum())
}

/// `Σ_branches P · ⟨branch|H|branch⟩`.
pub fn energy_loss(
    spec: &ProtocolSpec,
    theta1: &[f64],
    policies: &[Policy],
    h: &QubitOperator,
) -> Result<f64> {
    if h.n_qubits() != spec.layout().n_system() {
        return Err(Error::Shape("Hamiltonian does not match the system register".into()));
    }
    let _ = spec.system_layout();
    Ok(run_branches(spec, theta1, policies)?
        .iter()
        .map(|b| b.prob * h.expectation(b.system_amplitudes()))
        .sum())
}

/// Objective plus weighted regularization. Sampled problems need `rng`.
pub fn total_loss<R: Rng>(
    problem: &Problem,
    theta1: &[f64],
    policies: &[Policy],
    rng: Option<&mut R>,
) -> Result<f64> {
    Ok(engine::evaluate(problem, theta1, policies, rng, Request::VALUE)?.loss)
}

/// Mean over sizes of the per-size loss, each evaluated in its own mode.
pub fn per_site_multisize_loss<R: Rng>(
    task: &MultiSize,
    theta1: &[f64],
    policy: &Policy,
    rng: &mut R,
) -> Result<f64> {
    let mut sum = 0.0;
    for p in &task.problems {
        sum += engine::evaluate(p, theta1, std::slice::from_ref(policy), Some(&mut *rng), Request::VALUE)?.loss;
    }
    Ok(sum / task.problems.len() as f64)
}
