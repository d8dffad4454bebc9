//! Variational quantum circuits augmented with projective mid-circuit
//! measurement and learned classical feedback.
//!
//! The crate is organised bottom-up:
//!
//! - [`qsim`]: dense statevector engine, ancilla projection, outcome
//!   distributions, reduced density matrices and entropies.
//! - [`circuits`]: parameterized ansätze (hardware-efficient brickwork, the
//!   CiRX feedback blocks), parameter tying and adjoint-mode application.
//! - [`targets`]: AKLT manifold under the spin-1 → qubit encoding, GHZ, and
//!   the encoded AKLT Hamiltonian.
//! - [`feedback`]: tabular and recurrent feedback policies `f(M; W)`.
//! - [`protocol`]: the measure-and-feedback pipeline and its loss functions.
//! - [`gradients`]: exact reverse-mode gradients and a finite-difference
//!   checker.
//! - [`optim`]: ADAM, the asymmetric update-frequency loop, schedules and the
//!   training driver.
//! - [`analysis`]: mutual-information profiles, correctability checks and
//!   teacher-student expressivity probes.
//! - [`validation`]: the oracle suite behind the `validate` command.

pub mod analysis;
pub mod circuits;
mod error;
pub mod feedback;
pub mod gradients;
pub mod optim;
pub mod protocol;
pub mod qsim;
pub mod targets;
pub mod validation;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;

/// Branches whose probability falls below this floor are skipped during
/// enumeration, and probabilities are clamped to it inside logarithms.
pub const P_FLOOR: f64 = 1e-12;
