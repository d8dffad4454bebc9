//! The measure-and-feedback pipeline and its loss functions.
//!
//! A protocol prepares `ψ₁ = U₁(θ₁)|0⟩`, projects the ancillas onto an
//! outcome `M` (resetting them to `|0⟩`), and applies the feedback circuit
//! `U₂(f(M; W))` to the system. With several rounds the same `U₁` is applied
//! again to the post-feedback register, with one policy per round.

pub(crate) mod engine;
mod loss;
mod regularization;
mod spec;

pub use engine::LossEval;
pub use loss::{
    ghz_lambda_loss, EvalMode, LossSpec, MultiSize, Objective, Problem, Regularization,
};
pub use regularization::{ancilla_regularization, regularization_derivative, window_halfwidth};
pub use spec::{
    energy_loss, manifold_fidelity, per_site_multisize_loss, run_branches, sample_run,
    total_loss, OutcomeBranch, ProtocolSpec,
};
