//! Target states and operators: the AKLT manifold under the spin-1 → qubit
//! encoding, GHZ, and the encoded AKLT Hamiltonian.

mod aklt;
mod hamiltonian;

pub use aklt::{aklt_manifold, build_aklt, encode_spin1, Boundary, Edge, TargetManifold};
pub use hamiltonian::{aklt_hamiltonian_qubit, spin2_projector, QubitOperator, Term};

use crate::qsim::{QubitLayout, StateVector};
use crate::{Error, Result, C64};

/// `(|0…0⟩ + |1…1⟩)/√2` on a system-only register.
pub fn build_ghz(n_qubits: usize) -> Result<StateVector> {
    if n_qubits < 2 {
        return Err(Error::InvalidSpec("GHZ needs at least two qubits".into()));
    }
    let layout = QubitLayout::system_only(n_qubits)?;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    amps[0] = C64::new(h, 0.0);
    amps[(1 << n_qubits) - 1] = C64::new(h, 0.0);
    StateVector::from_amplitudes(&layout, amps)
}
