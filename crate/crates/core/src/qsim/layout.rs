use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    System,
    Ancilla,
}

/// Role assignment over the qubits of a register.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QubitLayout {
    roles: Vec<Role>,
    system: Vec<usize>,
    ancilla: Vec<usize>,
}

/// The repeating block used by the AKLT experiments.
pub const AKLT_BLOCK: &str = "ASSSSA";

impl QubitLayout {
    pub fn new(roles: Vec<Role>) -> Result<Self> {
        if roles.is_empty() {
            return Err(Error::InvalidLayout("layout has zero qubits".into()));
        }
        let system = (0..roles.len())
            .filter(|&q| roles[q] == Role::System)
            .collect();
        let ancilla = (0..roles.len())
            .filter(|&q| roles[q] == Role::Ancilla)
            .collect();
        Ok(Self {
            roles,
            system,
            ancilla,
        })
    }

    /// Parses a role string such as `"ASSSSA"` (`A` ancilla, `S` system).
    pub fn from_pattern(pattern: &str) -> Result<Self> {
        let roles = pattern
            .chars()
            .map(|c| match c {
                'A' | 'a' => Ok(Role::Ancilla),
                'S' | 's' => Ok(Role::System),
                other => Err(Error::InvalidLayout(format!(
                    "unknown role character {other:?} in {pattern:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(roles)
    }

    /// `n_blocks` repetitions of `ASSSSA`: four system qubits (two spin-1
    /// sites) and two ancillas per block.
    pub fn aklt_blocks(n_blocks: usize) -> Result<Self> {
        if n_blocks == 0 {
            return Err(Error::InvalidLayout("need at least one block".into()));
        }
        Self::from_pattern(&AKLT_BLOCK.repeat(n_blocks))
    }

    pub fn system_only(n_qubits: usize) -> Result<Self> {
        Self::new(vec![Role::System; n_qubits])
    }

    pub fn n_qubits(&self) -> usize {
        self.roles.len()
    }

    pub fn n_system(&self) -> usize {
        self.system.len()
    }

    pub fn n_ancilla(&self) -> usize {
        self.ancilla.len()
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    /// Physical indices of the system qubits, ascending.
    pub fn system_qubits(&self) -> &[usize] {
        &self.system
    }

    /// Physical indices of the ancilla qubits, ascending.
    pub fn ancilla_qubits(&self) -> &[usize] {
        &self.ancilla
    }

    pub fn pattern(&self) -> String {
        self.roles
            .iter()
            .map(|r| match r {
                Role::System => 'S',
                Role::Ancilla => 'A',
            })
            .collect()
    }

    /// True when the role string is an integer repetition of `block`.
    pub fn is_repetition_of(&self, block: &str) -> bool {
        let p = self.pattern();
        !block.is_empty() && p.len() % block.len() == 0 && p == block.repeat(p.len() / block.len())
    }

    /// Checks the spin-1 pairing requirement (even number of system qubits).
    pub fn require_spin1_pairs(&self) -> Result<()> {
        if self.n_system() % 2 != 0 {
            return Err(Error::InvalidLayout(format!(
                "{} system qubits cannot be paired into spin-1 sites",
                self.n_system()
            )));
        }
        Ok(())
    }

    pub fn register_map(&self) -> RegisterMap {
        RegisterMap::new(self)
    }
}

impl fmt::Display for QubitLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pattern())
    }
}

/// Index tables splitting a full-register index into system and ancilla
/// parts: `full = system_offset[s] | ancilla_offset[m]`.
#[derive(Clone, Debug)]
pub struct RegisterMap {
    pub system_offset: Vec<usize>,
    pub ancilla_offset: Vec<usize>,
}

impl RegisterMap {
    fn new(layout: &QubitLayout) -> Self {
        Self {
            system_offset: scatter_table(layout.system_qubits()),
            ancilla_offset: scatter_table(layout.ancilla_qubits()),
        }
    }
}

fn scatter_table(positions: &[usize]) -> Vec<usize> {
    (0..1usize << positions.len())
        .map(|k| {
            positions
                .iter()
                .enumerate()
                .filter(|(bit, _)| k >> bit & 1 == 1)
                .fold(0, |acc, (_, &q)| acc | 1 << q)
        })
        .collect()
}
