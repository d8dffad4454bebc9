use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::qsim::{QubitLayout, StateVector};
use crate::{Error, Result, C64};

/// Spin-½ edge mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Up,
    Down,
}

impl Edge {
    fn index(self) -> usize {
        match self {
            Edge::Up => 0,
            Edge::Down => 1,
        }
    }
}

/// Boundary condition of an open AKLT chain. `(Up, Up)` is the state with
/// total `S^z = +1`, `(Down, Down)` the one with `S^z = -1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    pub left: Edge,
    pub right: Edge,
}

impl Boundary {
    pub const ALL: [Boundary; 4] = [
        Boundary::new(Edge::Up, Edge::Up),
        Boundary::new(Edge::Up, Edge::Down),
        Boundary::new(Edge::Down, Edge::Up),
        Boundary::new(Edge::Down, Edge::Down),
    ];

    pub const fn new(left: Edge, right: Edge) -> Self {
        Self { left, right }
    }
}

/// Qubit-pair basis index (first qubit as the high bit) of a spin-1 state
/// `m ∈ {+1, 0, −1}`: `|+⟩ → |10⟩`, `|0⟩ → |00⟩`, `|−⟩ → |01⟩`.
pub fn encode_spin1(m: i8) -> usize {
    match m {
        1 => 2,
        0 => 0,
        -1 => 1,
        _ => panic!("spin-1 projection must be -1, 0 or 1"),
    }
}

/// Bond matrices `A^m` for `m = +1, 0, −1` (rows, columns: ↑, ↓).
fn mps_tensors() -> [[[f64; 2]; 2]; 3] {
    let p = (2.0f64 / 3.0).sqrt();
    let z = (1.0f64 / 3.0).sqrt();
    [
        [[0.0, p], [0.0, 0.0]],  // √(2/3) σ⁺
        [[-z, 0.0], [0.0, z]],   // −√(1/3) σᶻ
        [[0.0, 0.0], [-p, 0.0]], // −√(2/3) σ⁻
    ]
}

/// The open-chain AKLT state on `2·n_spin1` qubits, normalized.
///
/// Amplitudes are `⟨l| A^{m_1} ⋯ A^{m_n} |r̄⟩` with `r̄` the flipped right
/// edge, encoded site by site onto qubit pairs `(2k, 2k+1)`.
pub fn build_aklt(n_spin1: usize, boundary: Boundary) -> Result<StateVector> {
    if n_spin1 < 2 {
        return Err(Error::InvalidSpec("AKLT chain needs at least two sites".into()));
    }
    let n_qubits = 2 * n_spin1;
    let layout = QubitLayout::system_only(n_qubits)?;
    let a = mps_tensors();
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
    let r = 1 - boundary.right.index();
    // vectors of ⟨l|A…A| partial products, keyed by site configurations
    let mut partial: Vec<(usize, [f64; 2])> = vec![(0, {
        let mut v = [0.0; 2];
        v[boundary.left.index()] = 1.0;
        v
    })];
    for site in 0..n_spin1 {
        let mut next = Vec::with_capacity(partial.len() * 3);
        for (idx, v) in &partial {
            for (k, m) in [1i8, 0, -1].into_iter().enumerate() {
                let w = [
                    v[0] * a[k][0][0] + v[1] * a[k][1][0],
                    v[0] * a[k][0][1] + v[1] * a[k][1][1],
                ];
                if w == [0.0, 0.0] {
                    continue;
                }
                let code = encode_spin1(m);
                // high bit of the pair code sits on the first qubit
                let bits = ((code >> 1) << (2 * site)) | ((code & 1) << (2 * site + 1));
                next.push((idx | bits, w));
            }
        }
        partial = next;
    }
    for (idx, v) in partial {
        amps[idx] = C64::new(v[r], 0.0);
    }
    let mut s = StateVector::from_amplitudes(&layout, amps)?;
    s.normalize();
    Ok(s)
}

/// Orthonormal basis of a target subspace on system qubits.
#[derive(Clone, Debug)]
pub struct TargetManifold {
    basis: Vec<StateVector>,
    orthonormalized: bool,
}

impl TargetManifold {
    pub fn single(state: StateVector) -> Self {
        let mut s = state;
        s.normalize();
        Self {
            basis: vec![s],
            orthonormalized: true,
        }
    }

    /// Raw (not orthonormalized) span of the given states.
    pub fn raw(basis: Vec<StateVector>) -> Self {
        Self {
            basis,
            orthonormalized: false,
        }
    }

    /// Löwdin orthonormalization `ψ' = ψ S^{-1/2}`.
    pub fn lowdin(basis: Vec<StateVector>) -> Result<Self> {
        let k = basis.len();
        let gram = DMatrix::from_fn(k, k, |i, j| basis[i].inner(&basis[j]));
        let eig = SymmetricEigen::new(gram);
        if eig.eigenvalues.iter().any(|&l| l < 1e-12) {
            return Err(Error::InvalidSpec("manifold states are linearly dependent".into()));
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0)));
        let s = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
        let layout = basis[0].layout().clone();
        let dim = basis[0].amplitudes().len();
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let mut amps = vec![C64::new(0.0, 0.0); dim];
            for (j, b) in basis.iter().enumerate() {
                let c = s[(j, i)];
                for (o, a) in amps.iter_mut().zip(b.amplitudes()) {
                    *o += c * a;
                }
            }
            out.push(StateVector::from_amplitudes(&layout, amps)?);
        }
        Ok(Self {
            basis: out,
            orthonormalized: true,
        })
    }

    pub fn basis(&self) -> &[StateVector] {
        &self.basis
    }

    pub fn is_orthonormalized(&self) -> bool {
        self.orthonormalized
    }

    pub fn n_qubits(&self) -> usize {
        self.basis[0].n_qubits()
    }

    pub fn gram(&self) -> DMatrix<C64> {
        let k = self.basis.len();
        DMatrix::from_fn(k, k, |i, j| self.basis[i].inner(&self.basis[j]))
    }

    /// `⟨v|Π|v⟩ = Σ_i |⟨ψ_i|v⟩|²` for a (possibly unnormalized) vector.
    pub fn weight(&self, v: &[C64]) -> f64 {
        self.overlaps(v).iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨ψ_i|v⟩` for every basis state.
    pub fn overlaps(&self, v: &[C64]) -> Vec<C64> {
        self.basis
            .iter()
            .map(|b| b.amplitudes().iter().zip(v).map(|(x, y)| x.conj() * y).sum())
            .collect()
    }

    /// `Π v` written into `out` (overwritten).
    pub fn project_into(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for (b, c) in self.basis.iter().zip(self.overlaps(v)) {
            for (o, x) in out.iter_mut().zip(b.amplitudes()) {
                *o += c * x;
            }
        }
    }
}

/// The four-fold AKLT ground-state manifold on `2·n_spin1` qubits,
/// Löwdin-orthonormalized.
pub fn aklt_manifold(n_spin1: usize) -> Result<TargetManifold> {
    let raw = Boundary::ALL
        .iter()
        .map(|&b| build_aklt(n_spin1, b))
        .collect::<Result<Vec<_>>>()?;
    TargetManifold::lowdin(raw)
}
