//! In-place gate kernels on raw amplitude slices.

use crate::C64;

/// Row-major 2×2 matrix.
pub type Mat2 = [C64; 4];
/// Row-major 4×4 matrix in the basis `2·bit(a) + bit(b)`.
pub type Mat4 = [C64; 16];

#[inline]
pub fn insert_zero(k: usize, pos: usize) -> usize {
    ((k >> pos) << (pos + 1)) | (k & ((1 << pos) - 1))
}

pub fn apply_1q(amps: &mut [C64], q: usize, m: &Mat2) {
    let stride = 1usize << q;
    let dim = amps.len();
    let mut base = 0;
    while base < dim {
        for i in base..base + stride {
            let a = amps[i];
            let b = amps[i + stride];
            amps[i] = m[0] * a + m[1] * b;
            amps[i + stride] = m[2] * a + m[3] * b;
        }
        base += 2 * stride;
    }
}

/// Indices of the four basis states `|a b⟩` for the `k`-th quadruple.
#[inline]
pub fn quad(k: usize, qa: usize, qb: usize) -> [usize; 4] {
    let (lo, hi) = if qa < qb { (qa, qb) } else { (qb, qa) };
    let base = insert_zero(insert_zero(k, lo), hi);
    let ba = 1 << qa;
    let bb = 1 << qb;
    [base, base | bb, base | ba, base | ba | bb]
}

pub fn apply_2q(amps: &mut [C64], qa: usize, qb: usize, m: &Mat4) {
    debug_assert_ne!(qa, qb);
    for k in 0..amps.len() / 4 {
        let idx = quad(k, qa, qb);
        let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for (r, &i) in idx.iter().enumerate() {
            amps[i] = m[4 * r] * v[0] + m[4 * r + 1] * v[1] + m[4 * r + 2] * v[2] + m[4 * r + 3] * v[3];
        }
    }
}

/// Accumulates `G[i][j] = Σ_rest ψ(i, rest) · conj(λ(j, rest))` over a
/// single qubit.
pub fn outer_1q(psi: &[C64], lam: &[C64], q: usize) -> Mat2 {
    let stride = 1usize << q;
    let mut g = [C64::new(0.0, 0.0); 4];
    let mut base = 0;
    while base < psi.len() {
        for i in base..base + stride {
            let p = [psi[i], psi[i + stride]];
            let l = [lam[i].conj(), lam[i + stride].conj()];
            g[0] += p[0] * l[0];
            g[1] += p[0] * l[1];
            g[2] += p[1] * l[0];
            g[3] += p[1] * l[1];
        }
        base += 2 * stride;
    }
    g
}

/// Two-qubit analogue of [`outer_1q`].
pub fn outer_2q(psi: &[C64], lam: &[C64], qa: usize, qb: usize) -> Mat4 {
    let mut g = [C64::new(0.0, 0.0); 16];
    for k in 0..psi.len() / 4 {
        let idx = quad(k, qa, qb);
        let p = [psi[idx[0]], psi[idx[1]], psi[idx[2]], psi[idx[3]]];
        let l = [
            lam[idx[0]].conj(),
            lam[idx[1]].conj(),
            lam[idx[2]].conj(),
            lam[idx[3]].conj(),
        ];
        for i in 0..4 {
            for j in 0..4 {
                g[4 * i + j] += p[i] * l[j];
            }
        }
    }
    g
}
