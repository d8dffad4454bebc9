//! Gate matrices, row-major. Two-qubit matrices use the basis
//! `2·bit(first) + bit(second)`, so the first target is the control.

use crate::qsim::kernels::{Mat2, Mat4};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity2() -> Mat2 {
    [ONE, ZERO, ZERO, ONE]
}

pub fn identity4() -> Mat4 {
    let mut m = [ZERO; 16];
    for i in 0..4 {
        m[5 * i] = ONE;
    }
    m
}

pub fn pauli_x() -> Mat2 {
    [ZERO, ONE, ONE, ZERO]
}

pub fn hadamard() -> Mat2 {
    let h = re(std::f64::consts::FRAC_1_SQRT_2);
    [h, h, h, -h]
}

/// `exp(-iθY/2)`.
pub fn ry(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [re(c), re(-s), re(s), re(c)]
}

pub(crate) fn ry_deriv(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [re(-s / 2.0), re(-c / 2.0), re(c / 2.0), re(-s / 2.0)]
}

pub fn cnot() -> Mat4 {
    let mut m = identity4();
    m[10] = ZERO;
    m[15] = ZERO;
    m[11] = ONE;
    m[14] = ONE;
    m
}

/// Controlled `exp(-iθX/2)`: identity when the control is `|0⟩`, an X
/// rotation of the target otherwise. `θ = π` gives CNOT up to a `-i` phase
/// on the control-1 block.
pub fn cirx(theta: f64) -> Mat4 {
    let (s, c) = (theta / 2.0).sin_cos();
    let mut m = identity4();
    m[10] = re(c);
    m[11] = C64::new(0.0, -s);
    m[14] = C64::new(0.0, -s);
    m[15] = re(c);
    m
}

pub(crate) fn cirx_deriv(theta: f64) -> Mat4 {
    let (s, c) = (theta / 2.0).sin_cos();
    let mut m = [ZERO; 16];
    m[10] = re(-s / 2.0);
    m[11] = C64::new(0.0, -c / 2.0);
    m[14] = C64::new(0.0, -c / 2.0);
    m[15] = re(-s / 2.0);
    m
}
