//! Dense statevector engine.
//!
//! Qubit ordering is little-endian: qubit 0 is the least significant bit of
//! the amplitude index. Ancilla outcomes `M` are integers whose bit `k` is the
//! outcome of the `k`-th ancilla in layout order.

mod density;
mod dump;
pub(crate) mod kernels;
mod layout;
mod state;

pub use density::{
    entanglement_entropy, hermitian_eigenvalues, reduced_density, reduced_density_with_cap, von_neumann_entropy,
    DensityMatrix, DEFAULT_RDM_CAP,
};
pub use dump::{read_amplitudes, write_amplitudes};
pub use layout::{QubitLayout, RegisterMap, Role};
pub use state::{shannon_entropy, zero_state, ProbTable, StateVector, DEFAULT_MAX_QUBITS};
