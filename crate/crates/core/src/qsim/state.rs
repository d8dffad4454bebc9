use crate::qsim::kernels;
use crate::qsim::layout::QubitLayout;
use crate::{Error, Result, C64, P_FLOOR};

/// Default cap on the dense register size.
pub const DEFAULT_MAX_QUBITS: usize = 24;

const UNITARY_TOL: f64 = 1e-10;

/// Complex amplitudes over a layout's full register.
///
/// States are normalized unless produced as an unnormalized branch, in which
/// case their squared norm equals the branch probability.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
    layout: QubitLayout,
    normalized: bool,
}

pub fn zero_state(layout: &QubitLayout) -> Result<StateVector> {
    StateVector::zero_with_capacity(layout, DEFAULT_MAX_QUBITS)
}

impl StateVector {
    pub fn zero_with_capacity(layout: &QubitLayout, max_qubits: usize) -> Result<Self> {
        let n = layout.n_qubits();
        if n > max_qubits {
            return Err(Error::Capacity {
                what: "statevector",
                requested: n,
                cap: max_qubits,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self {
            amps,
            layout: layout.clone(),
            normalized: true,
        })
    }

    /// Wraps raw amplitudes. The normalized flag is set when the squared
    /// norm is 1 within 1e-10.
    pub fn from_amplitudes(layout: &QubitLayout, amps: Vec<C64>) -> Result<Self> {
        if layout.n_qubits() > DEFAULT_MAX_QUBITS {
            return Err(Error::Capacity {
                what: "statevector",
                requested: layout.n_qubits(),
                cap: DEFAULT_MAX_QUBITS,
            });
        }
        if amps.len() != 1 << layout.n_qubits() {
            return Err(Error::Shape(format!(
                "{} amplitudes for {} qubits",
                amps.len(),
                layout.n_qubits()
            )));
        }
        let normalized = (norm_sqr(&amps) - 1.0).abs() < 1e-10;
        Ok(Self {
            amps,
            layout: layout.clone(),
            normalized,
        })
    }

    /// A computational basis state.
    pub fn basis(layout: &QubitLayout, index: usize) -> Result<Self> {
        let mut s = zero_state(layout)?;
        if index >= s.amps.len() {
            return Err(Error::IndexOutOfRange {
                index,
                n_qubits: layout.n_qubits(),
            });
        }
        s.amps[0] = C64::new(0.0, 0.0);
        s.amps[index] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.n_qubits()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amps.iter_mut().for_each(|a| *a *= inv);
        }
        self.normalized = true;
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Applies a 2×2 or 4×4 unitary (row-major). For 4×4 gates the basis is
    /// `|t0 t1⟩` with `targets[0]` the more significant bit.
    pub fn apply_gate(&mut self, gate: &[C64], targets: &[usize]) -> Result<()> {
        let n = self.n_qubits();
        for &t in targets {
            if t >= n {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    n_qubits: n,
                });
            }
        }
        match (gate.len(), targets) {
            (4, [q]) => {
                check_unitary(gate, 2)?;
                let m: [C64; 4] = gate.try_into().expect("length checked");
                kernels::apply_1q(&mut self.amps, *q, &m);
            }
            (16, [a, b]) => {
                if a == b {
                    return Err(Error::GateValidation("targets must be distinct".into()));
                }
                check_unitary(gate, 4)?;
                let m: [C64; 16] = gate.try_into().expect("length checked");
                kernels::apply_2q(&mut self.amps, *a, *b, &m);
            }
            _ => {
                return Err(Error::GateValidation(format!(
                    "{} matrix entries for {} targets",
                    gate.len(),
                    targets.len()
                )))
            }
        }
        Ok(())
    }

    /// Projects the ancillas onto outcome `m` and resets them to `|0⟩`.
    ///
    /// Returns the normalized post-measurement state and the outcome
    /// probability. Outcomes below [`P_FLOOR`] yield
    /// [`Error::ZeroProbabilityBranch`] so callers can skip them.
    pub fn project_ancillas(&self, m: usize) -> Result<(StateVector, f64)> {
        let n_anc = self.layout.n_ancilla();
        if m >> n_anc != 0 {
            return Err(Error::Shape(format!(
                "outcome {m} does not fit {n_anc} ancillas"
            )));
        }
        let map = self.layout.register_map();
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        let off = map.ancilla_offset[m];
        let mut prob = 0.0;
        for &s in &map.system_offset {
            let a = self.amps[s | off];
            prob += a.norm_sqr();
            out[s] = a;
        }
        if prob < P_FLOOR {
            return Err(Error::ZeroProbabilityBranch { prob });
        }
        let mut st = StateVector {
            amps: out,
            layout: self.layout.clone(),
            normalized: false,
        };
        st.normalize();
        Ok((st, prob))
    }

    /// Distribution of ancilla outcomes in the computational basis.
    pub fn outcome_distribution(&self) -> ProbTable {
        let map = self.layout.register_map();
        let total = self.norm_sqr();
        let probs = map
            .ancilla_offset
            .iter()
            .map(|&off| {
                map.system_offset
                    .iter()
                    .map(|&s| self.amps[s | off].norm_sqr())
                    .sum::<f64>()
                    / total
            })
            .collect();
        ProbTable::new(probs, self.layout.n_ancilla())
    }
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

fn check_unitary(m: &[C64], d: usize) -> Result<()> {
    for i in 0..d {
        for j in 0..d {
            let dot: C64 = (0..d).map(|k| m[k * d + i].conj() * m[k * d + j]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            if (dot - expect).norm() > UNITARY_TOL {
                return Err(Error::GateValidation(format!(
                    "matrix is not unitary (entry ({i},{j}) of U†U is {dot})"
                )));
            }
        }
    }
    Ok(())
}

/// Probabilities of the `2^{N_a}` ancilla outcomes, indexed by `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbTable {
    probs: Vec<f64>,
    n_ancilla: usize,
}

impl ProbTable {
    pub fn new(probs: Vec<f64>, n_ancilla: usize) -> Self {
        assert_eq!(probs.len(), 1 << n_ancilla, "table size must be 2^N_a");
        Self { probs, n_ancilla }
    }

    pub fn uniform(n_ancilla: usize) -> Self {
        let p = 1.0 / (1u64 << n_ancilla) as f64;
        Self::new(vec![p; 1 << n_ancilla], n_ancilla)
    }

    pub fn delta(n_ancilla: usize, m: usize) -> Self {
        let mut probs = vec![0.0; 1 << n_ancilla];
        probs[m] = 1.0;
        Self::new(probs, n_ancilla)
    }

    pub fn n_ancilla(&self) -> usize {
        self.n_ancilla
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, m: usize) -> f64 {
        self.probs[m]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Ratio of the largest to the smallest entry.
    pub fn max_min_ratio(&self) -> f64 {
        let max = self.probs.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.probs.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }
}

/// Shannon entropy in bits; `0·log 0 = 0`.
pub fn shannon_entropy(table: &ProbTable) -> f64 {
    -table
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}
