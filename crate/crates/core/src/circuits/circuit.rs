use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuits::exec::Program;
use crate::qsim::StateVector;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Ry,
    Cnot,
    Cirx,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Ry => 1,
            GateKind::Cnot | GateKind::Cirx => 2,
        }
    }

    pub fn is_parametric(self) -> bool {
        !matches!(self, GateKind::Cnot)
    }
}

/// One gate of a program. Two-qubit gates list the control first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
}

/// Position of a parameter slot: the ansatz layer (or block) it belongs to
/// and the leftmost qubit of its gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCoord {
    pub layer: usize,
    pub qubit: usize,
}

/// A two-qubit feedback block: its qubit pair and its contiguous slot range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpan {
    pub qubits: (usize, usize),
    pub slot_offset: usize,
    pub n_slots: usize,
}

/// A gate program with parameter slots and an optional sharing map.
///
/// Without sharing every slot is a free parameter. With sharing, slot `k`
/// reads parameter `sharing[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    slots: Vec<SlotCoord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sharing: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    blocks: Vec<BlockSpan>,
}

impl ParamCircuit {
    pub(crate) fn from_parts(
        n_qubits: usize,
        gates: Vec<Gate>,
        slots: Vec<SlotCoord>,
        blocks: Vec<BlockSpan>,
    ) -> Self {
        let c = Self {
            n_qubits,
            gates,
            slots,
            sharing: None,
            blocks,
        };
        debug_assert!(c.validate().is_ok());
        c
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_coords(&self) -> &[SlotCoord] {
        &self.slots
    }

    pub fn blocks(&self) -> &[BlockSpan] {
        &self.blocks
    }

    pub fn sharing(&self) -> Option<&[usize]> {
        self.sharing.as_deref()
    }

    pub fn is_tied(&self) -> bool {
        self.sharing.is_some()
    }

    /// Number of free parameters.
    pub fn n_params(&self) -> usize {
        match &self.sharing {
            Some(map) => map.iter().max().map_or(0, |&m| m + 1),
            None => self.slots.len(),
        }
    }

    /// Maximum number of gate layers acting on any qubit, with gates
    /// scheduled as early as possible.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        for g in &self.gates {
            let l = g.targets.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for &q in &g.targets {
                level[q] = l;
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    /// Per-slot angles from free parameters.
    pub fn expand(&self, params: &[f64]) -> Result<Vec<f64>> {
        if params.len() != self.n_params() {
            return Err(Error::Arity {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        Ok(match &self.sharing {
            Some(map) => map.iter().map(|&c| params[c]).collect(),
            None => params.to_vec(),
        })
    }

    /// Accumulates per-slot gradients into their parameter classes.
    pub fn collapse(&self, slot_grad: &[f64]) -> Vec<f64> {
        match &self.sharing {
            Some(map) => {
                let mut g = vec![0.0; self.n_params()];
                for (&c, &v) in map.iter().zip(slot_grad) {
                    g[c] += v;
                }
                g
            }
            None => slot_grad.to_vec(),
        }
    }

    /// Same gates in reverse order, slots unchanged. Applied with negated
    /// angles this is the inverse program.
    pub fn reversed(&self) -> ParamCircuit {
        let mut c = self.clone();
        c.gates.reverse();
        c
    }

    pub fn compile(&self) -> Program {
        Program::compile(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ParamCircuit = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.slots.len()];
        for g in &self.gates {
            if g.targets.len() != g.kind.arity() {
                return Err(Error::GateValidation(format!(
                    "{:?} expects {} targets",
                    g.kind,
                    g.kind.arity()
                )));
            }
            for &q in &g.targets {
                if q >= self.n_qubits {
                    return Err(Error::IndexOutOfRange {
                        index: q,
                        n_qubits: self.n_qubits,
                    });
                }
            }
            if g.targets.len() == 2 && g.targets[0] == g.targets[1] {
                return Err(Error::GateValidation("repeated target".into()));
            }
            match (g.kind.is_parametric(), g.slot) {
                (true, Some(s)) if s < seen.len() && !seen[s] => seen[s] = true,
                (false, None) => {}
                _ => {
                    return Err(Error::GateValidation(format!(
                        "bad slot assignment on {:?} {:?}",
                        g.kind, g.targets
                    )))
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::GateValidation("unused parameter slot".into()));
        }
        if let Some(map) = &self.sharing {
            if map.len() != self.slots.len() {
                return Err(Error::Shape("sharing map length".into()));
            }
            let n = self.n_params();
            let mut used = vec![false; n];
            map.iter().for_each(|&c| used[c] = true);
            if used.iter().any(|u| !u) {
                return Err(Error::Shape("sharing map skips a class".into()));
            }
        }
        Ok(())
    }
}

/// Ties slots `(layer, q)` and `(layer, q')` whenever `q ≡ q' (mod period)`.
///
/// Classes are ordered by `(layer, q mod period)`, so circuits of different
/// widths built with the same depth and period share one parameter vector.
pub fn tie_parameters(circuit: &ParamCircuit, period: usize) -> Result<ParamCircuit> {
    let n = circuit.n_qubits();
    if period == 0 || n % period != 0 {
        return Err(Error::InvalidPeriod {
            period,
            n_qubits: n,
        });
    }
    if circuit.is_tied() {
        return Err(Error::InvalidSpec("circuit is already tied".into()));
    }
    let keys: Vec<(usize, usize)> = circuit
        .slots
        .iter()
        .map(|c| (c.layer, c.qubit % period))
        .collect();
    let classes: BTreeMap<(usize, usize), usize> = {
        let mut m: BTreeMap<(usize, usize), usize> = keys.iter().map(|&k| (k, 0)).collect();
        m.values_mut().enumerate().for_each(|(i, v)| *v = i);
        m
    };
    let mut tied = circuit.clone();
    tied.sharing = Some(keys.iter().map(|k| classes[k]).collect());
    Ok(tied)
}

/// Applies `circuit` with free parameters `angles` to a copy of `state`.
pub fn apply_circuit(
    state: &StateVector,
    circuit: &ParamCircuit,
    angles: &[f64],
) -> Result<StateVector> {
    if circuit.n_qubits() != state.n_qubits() {
        return Err(Error::Shape(format!(
            "circuit on {} qubits, state on {}",
            circuit.n_qubits(),
            state.n_qubits()
        )));
    }
    let slots = circuit.expand(angles)?;
    let mut out = state.clone();
    circuit.compile().apply(out.amplitudes_mut(), &slots);
    Ok(out)
}
