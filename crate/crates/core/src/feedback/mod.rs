//! Classical feedback policies `f(M; W)` mapping ancilla outcomes to the
//! angles of the feedback circuit.
//!
//! Policies see the register layout and the feedback circuit through a
//! [`FeedbackContext`], so one set of recurrent weights can drive registers
//! of any size.

mod rnn;
mod tabular;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use rnn::{Direction, FrontEnd, RnnConfig, RnnPolicy};
pub use tabular::TabularPolicy;

use crate::circuits::ParamCircuit;
use crate::qsim::QubitLayout;
use crate::{Error, Result};

/// What a policy needs to know about the register it acts on.
#[derive(Clone, Copy, Debug)]
pub struct FeedbackContext<'a> {
    pub layout: &'a QubitLayout,
    pub u2: &'a ParamCircuit,
}

/// An ancilla outcome with the physical positions of the ancillas.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementRecord {
    bits: Vec<bool>,
    positions: Vec<usize>,
}

impl MeasurementRecord {
    /// Bit `k` of `m` is the outcome of the `k`-th ancilla in layout order.
    pub fn from_outcome(layout: &QubitLayout, m: usize) -> Result<Self> {
        let n = layout.n_ancilla();
        if n < usize::BITS as usize && m >> n != 0 {
            return Err(Error::Shape(format!("outcome {m} does not fit {n} ancillas")));
        }
        Ok(Self {
            bits: (0..n).map(|k| m >> k & 1 == 1).collect(),
            positions: layout.ancilla_qubits().to_vec(),
        })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn outcome(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &b)| acc | (b as usize) << k)
    }

    /// `'0'`/`'1'` per ancilla, ancilla 0 first.
    pub fn bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyKind {
    Tabular,
    Rnn(RnnConfig),
}

/// A feedback policy with a flat weight vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Tabular(TabularPolicy),
    Rnn(RnnPolicy),
}

impl Policy {
    pub fn n_weights(&self) -> usize {
        self.weights().len()
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Policy::Tabular(p) => p.weights(),
            Policy::Rnn(p) => p.weights(),
        }
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        match self {
            Policy::Tabular(p) => p.weights_mut(),
            Policy::Rnn(p) => p.weights_mut(),
        }
    }

    pub fn eval(&self, ctx: FeedbackContext<'_>, m: &MeasurementRecord) -> Result<Vec<f64>> {
        match self {
            Policy::Tabular(p) => p.eval(ctx, m),
            Policy::Rnn(p) => p.eval(ctx, m),
        }
    }

    /// `grad += (∂angles/∂W)ᵀ d_angles`.
    pub fn backprop(
        &self,
        ctx: FeedbackContext<'_>,
        m: &MeasurementRecord,
        d_angles: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        match self {
            Policy::Tabular(p) => p.backprop(ctx, m, d_angles, grad),
            Policy::Rnn(p) => p.backprop(ctx, m, d_angles, grad),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            Policy::Tabular(p) => p.write_csv(std::fs::File::create(path)?),
            Policy::Rnn(p) => p.write_binary(std::fs::File::create(path)?),
        }
    }

    /// Reads a file written by [`Policy::save`] for a policy of this kind.
    pub fn load(kind: &PolicyKind, path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Ok(match kind {
            PolicyKind::Tabular => Policy::Tabular(TabularPolicy::read_csv(f)?),
            PolicyKind::Rnn(cfg) => {
                let p = RnnPolicy::read_binary(f)?;
                if p.config() != cfg {
                    return Err(Error::Parse("stored network does not match its config".into()));
                }
                Policy::Rnn(p)
            }
        })
    }

    /// File extension used by [`Policy::save`].
    pub fn extension(&self) -> &'static str {
        match self {
            Policy::Tabular(_) => "csv",
            Policy::Rnn(_) => "bin",
        }
    }
}

/// Fresh policy. Tabular tables start at zero (identity feedback). Recurrent
/// weights are drawn uniformly in `±1/√fan_in` with zero biases, unit norm
/// gains and a zero output head, so both kinds start as identity feedback.
pub fn init_policy(kind: &PolicyKind, ctx: FeedbackContext<'_>, seed: u64) -> Result<Policy> {
    Ok(match kind {
        PolicyKind::Tabular => Policy::Tabular(TabularPolicy::zeros(
            ctx.layout.n_ancilla(),
            ctx.u2.n_params(),
        )?),
        PolicyKind::Rnn(cfg) => {
            if cfg.n_out != per_block_angles(ctx.u2)? {
                return Err(Error::Shape(format!(
                    "network emits {} angles per block, circuit blocks take {}",
                    cfg.n_out,
                    per_block_angles(ctx.u2)?
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Policy::Rnn(RnnPolicy::init(cfg.clone(), &mut rng)?)
        }
    })
}

pub(crate) fn per_block_angles(u2: &ParamCircuit) -> Result<usize> {
    let blocks = u2.blocks();
    let first = blocks
        .first()
        .ok_or_else(|| Error::Shape("feedback circuit has no blocks".into()))?;
    if blocks.iter().any(|b| b.n_slots != first.n_slots) {
        return Err(Error::Shape("feedback blocks differ in size".into()));
    }
    Ok(first.n_slots)
}
