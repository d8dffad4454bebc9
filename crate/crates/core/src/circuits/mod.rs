//! Parameterized ansätze and their application.

mod build;
mod circuit;
mod exec;
pub mod gates;

pub use build::{
    block_params, build_feedback_ansatz, build_hardware_efficient, feedback_ansatz,
    hardware_efficient, DEFAULT_BLOCK_DEPTH,
};
pub use circuit::{
    apply_circuit, tie_parameters, BlockSpan, Gate, GateKind, ParamCircuit, SlotCoord,
};
pub use exec::Program;
