use nalgebra::DMatrix;

use crate::qsim::state::StateVector;
use crate::{Error, Result, C64};

/// Largest subset `reduced_density` will materialize by default.
pub const DEFAULT_RDM_CAP: usize = 12;

/// Reduced density matrix over an ordered qubit subset. Local basis index
/// bit `k` is the value of qubit `subset[k]`.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub matrix: DMatrix<C64>,
    pub subset: Vec<usize>,
}

impl DensityMatrix {
    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Eigenvalues of a Hermitian matrix, unsorted.
///
/// All-zero rows are split off first: nalgebra's symmetric eigensolver can
/// return non-finite values when they are present. A shifted solve is the
/// fallback should that still happen.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let n = m.nrows();
    let zero = C64::new(0.0, 0.0);
    let support: Vec<usize> = (0..n).filter(|&i| m.row(i).iter().any(|&x| x != zero)).collect();
    let sub = DMatrix::from_fn(support.len(), support.len(), |i, j| m[(support[i], support[j])]);
    let mut eig: Vec<f64> = sub.clone().symmetric_eigenvalues().iter().copied().collect();
    if eig.iter().any(|l| !l.is_finite()) {
        let shift = 1.0 + sub.iter().map(|z| z.norm()).sum::<f64>();
        let shifted = sub + DMatrix::identity(support.len(), support.len()) * C64::new(shift, 0.0);
        eig = shifted.symmetric_eigenvalues().iter().map(|l| l - shift).collect();
    }
    eig.resize(n, 0.0);
    eig
}

pub fn reduced_density(state: &StateVector, subset: &[usize]) -> Result<DensityMatrix> {
    reduced_density_with_cap(state, subset, DEFAULT_RDM_CAP)
}

pub fn reduced_density_with_cap(
    state: &StateVector,
    subset: &[usize],
    cap: usize,
) -> Result<DensityMatrix> {
    let n = state.n_qubits();
    validate_subset(subset, n)?;
    if subset.len() > cap {
        return Err(Error::Capacity {
            what: "reduced density matrix",
            requested: subset.len(),
            cap,
        });
    }
    let rest: Vec<usize> = (0..n).filter(|q| !subset.contains(q)).collect();
    let sub_off = offsets(subset);
    let rest_off = offsets(&rest);
    let amps = state.amplitudes();
    let norm = state.norm_sqr();
    let d = sub_off.len();
    let mut rho = DMatrix::<C64>::zeros(d, d);
    let mut col = vec![C64::new(0.0, 0.0); d];
    for &r in &rest_off {
        for (a, &sa) in sub_off.iter().enumerate() {
            col[a] = amps[r | sa];
        }
        for a in 0..d {
            if col[a] == C64::new(0.0, 0.0) {
                continue;
            }
            for b in 0..d {
                rho[(a, b)] += col[a] * col[b].conj();
            }
        }
    }
    rho /= C64::new(norm, 0.0);
    Ok(DensityMatrix {
        matrix: rho,
        subset: subset.to_vec(),
    })
}

/// Von Neumann entropy in bits. Eigenvalues below 1e-14 contribute nothing.
pub fn von_neumann_entropy(dm: &DensityMatrix) -> f64 {
    -dm.eigenvalues()
        .into_iter()
        .filter(|&l| l > 1e-14)
        .map(|l| l * l.log2())
        .sum::<f64>()
}

/// Entanglement entropy (bits) of `part` against the rest of a pure state.
/// The smaller side is materialized.
pub fn entanglement_entropy(state: &StateVector, part: &[usize]) -> Result<f64> {
    let n = state.n_qubits();
    validate_subset(part, n)?;
    let complement: Vec<usize> = (0..n).filter(|q| !part.contains(q)).collect();
    let side = if complement.len() < part.len() {
        &complement[..]
    } else {
        part
    };
    if side.is_empty() {
        return Ok(0.0);
    }
    Ok(von_neumann_entropy(&reduced_density(state, side)?).max(0.0))
}

fn validate_subset(subset: &[usize], n: usize) -> Result<()> {
    for (i, &q) in subset.iter().enumerate() {
        if q >= n {
            return Err(Error::IndexOutOfRange {
                index: q,
                n_qubits: n,
            });
        }
        if subset[..i].contains(&q) {
            return Err(Error::Shape(format!("qubit {q} repeated in subset")));
        }
    }
    Ok(())
}

fn offsets(qubits: &[usize]) -> Vec<usize> {
    (0..1usize << qubits.len())
        .map(|k| {
            qubits
                .iter()
                .enumerate()
                .filter(|(bit, _)| k >> bit & 1 == 1)
                .fold(0, |acc, (_, &q)| acc | 1 << q)
        })
        .collect()
}
