use nalgebra::{DMatrix, Matrix3};

use crate::targets::aklt::encode_spin1;
use crate::{Error, Result, C64};

/// A local term `coeff · matrix` on `targets`. The matrix basis index has
/// `targets[0]` as its most significant bit.
#[derive(Clone, Debug)]
pub struct Term {
    pub coeff: f64,
    pub matrix: DMatrix<C64>,
    pub targets: Vec<usize>,
}

/// Hermitian sum of local terms on a system-only register.
#[derive(Clone, Debug)]
pub struct QubitOperator {
    n_qubits: usize,
    terms: Vec<Term>,
    /// Spin-1 → qubit-pair isometry (4×3), columns ordered `+1, 0, −1`.
    encoding: DMatrix<f64>,
}

impl QubitOperator {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn encoding(&self) -> &DMatrix<f64> {
        &self.encoding
    }

    /// `out += H v`.
    pub fn apply_add(&self, v: &[C64], out: &mut [C64]) {
        assert_eq!(v.len(), 1 << self.n_qubits);
        for t in &self.terms {
            apply_local(t, v, out);
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.apply_add(v, &mut out);
        out
    }

    /// `⟨v|H|v⟩` (unnormalized).
    pub fn expectation(&self, v: &[C64]) -> f64 {
        self.apply(v)
            .iter()
            .zip(v)
            .map(|(h, x)| (x.conj() * h).re)
            .sum()
    }

    /// `⟨v|term|v⟩` for each term separately.
    pub fn term_expectations(&self, v: &[C64]) -> Vec<f64> {
        self.terms
            .iter()
            .map(|t| {
                let mut out = vec![C64::new(0.0, 0.0); v.len()];
                apply_local(t, v, &mut out);
                out.iter().zip(v).map(|(h, x)| (x.conj() * h).re).sum()
            })
            .collect()
    }

    /// Dense matrix, for exact diagonalization at small sizes.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(d, d);
        let mut e = vec![C64::new(0.0, 0.0); d];
        for j in 0..d {
            e[j] = C64::new(1.0, 0.0);
            for (i, x) in self.apply(&e).into_iter().enumerate() {
                m[(i, j)] = x;
            }
            e[j] = C64::new(0.0, 0.0);
        }
        m
    }
}

fn apply_local(t: &Term, v: &[C64], out: &mut [C64]) {
    let k = t.targets.len();
    let d = 1usize << k;
    let n = v.len().trailing_zeros() as usize;
    let mask: usize = t.targets.iter().map(|&q| 1 << q).sum();
    // offset of local index i in the full register
    let offs: Vec<usize> = (0..d)
        .map(|i| {
            (0..k)
                .filter(|&b| i >> (k - 1 - b) & 1 == 1)
                .map(|b| 1 << t.targets[b])
                .sum()
        })
        .collect();
    let mut loc = vec![C64::new(0.0, 0.0); d];
    for base in 0..1usize << n {
        if base & mask != 0 {
            continue;
        }
        let mut any = false;
        for i in 0..d {
            loc[i] = v[base | offs[i]];
            any |= loc[i] != C64::new(0.0, 0.0);
        }
        if !any {
            continue;
        }
        for i in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..d {
                acc += t.matrix[(i, j)] * loc[j];
            }
            out[base | offs[i]] += acc * t.coeff;
        }
    }
}

/// Projector onto total spin 2 of two spin-1s, `S·S/2 + (S·S)²/6 + 1/3`,
/// basis `3·a + b` with each site ordered `+1, 0, −1`.
pub fn spin2_projector() -> DMatrix<f64> {
    let r2 = 2f64.sqrt();
    let sz = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0);
    let sp = Matrix3::new(0.0, r2, 0.0, 0.0, 0.0, r2, 0.0, 0.0, 0.0);
    let sm = sp.transpose();
    let kron = |a: &Matrix3<f64>, b: &Matrix3<f64>| {
        DMatrix::from_fn(9, 9, |i, j| a[(i / 3, j / 3)] * b[(i % 3, j % 3)])
    };
    let ss = kron(&sz, &sz) + (kron(&sp, &sm) + kron(&sm, &sp)) * 0.5;
    &ss * 0.5 + (&ss * &ss) / 6.0 + DMatrix::identity(9, 9) / 3.0
}

fn encoding_isometry() -> DMatrix<f64> {
    let mut m = DMatrix::zeros(4, 3);
    for (col, s) in [1i8, 0, -1].into_iter().enumerate() {
        m[(encode_spin1(s), col)] = 1.0;
    }
    m
}

/// Encoded AKLT Hamiltonian on `2·n_spin1` qubits:
/// `Σ_i (M⊗M) P₂ (M⊗M)†` over neighbouring sites, plus the projector onto
/// the unused pair state `|11⟩` on every site.
pub fn aklt_hamiltonian_qubit(n_spin1: usize) -> Result<QubitOperator> {
    if n_spin1 < 2 {
        return Err(Error::InvalidSpec("AKLT chain needs at least two sites".into()));
    }
    let m = encoding_isometry();
    let mm = m.kronecker(&m);
    let bond = (&mm * spin2_projector() * mm.transpose()).map(|x| C64::new(x, 0.0));
    let mut penalty = DMatrix::zeros(4, 4);
    penalty[(3, 3)] = C64::new(1.0, 0.0);
    let mut terms = Vec::new();
    for i in 0..n_spin1 - 1 {
        terms.push(Term {
            coeff: 1.0,
            matrix: bond.clone(),
            targets: (2 * i..2 * i + 4).collect(),
        });
    }
    for i in 0..n_spin1 {
        terms.push(Term {
            coeff: 1.0,
            matrix: penalty.clone(),
            targets: vec![2 * i, 2 * i + 1],
        });
    }
    Ok(QubitOperator {
        n_qubits: 2 * n_spin1,
        terms,
        encoding: m,
    })
}
