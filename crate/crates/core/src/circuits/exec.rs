//! Compiled executor. Runs of consecutive gates touching at most two qubits
//! are fused into one 2×2 or 4×4 matrix, and the adjoint pass recovers
//! per-slot gradients from a single outer product per fused group.

use crate::circuits::circuit::{GateKind, ParamCircuit};
use crate::circuits::gates;
use crate::qsim::kernels;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Group matrix, row-major with stride `d`; a 2×2 uses the first four
/// entries.
type Mat = [C64; 16];

#[derive(Clone, Debug)]
struct Op {
    kind: GateKind,
    /// Positions inside the group: 0 is the group's first qubit.
    local: [usize; 2],
    slot: Option<usize>,
}

#[derive(Clone, Debug)]
struct Group {
    qubits: Vec<usize>,
    ops: Vec<Op>,
}

/// A fused, ready-to-run form of a [`ParamCircuit`]. Takes per-slot angles.
#[derive(Clone, Debug)]
pub struct Program {
    n_qubits: usize,
    n_slots: usize,
    groups: Vec<Group>,
}

impl Program {
    pub(crate) fn compile(circuit: &ParamCircuit) -> Self {
        let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for (gi, g) in circuit.gates().iter().enumerate() {
            let fits = groups.last().map(|(qs, _)| {
                let mut u = qs.clone();
                for &t in &g.targets {
                    if !u.contains(&t) {
                        u.push(t);
                    }
                }
                u.len() <= 2
            });
            if fits == Some(true) {
                let (qs, idx) = groups.last_mut().expect("nonempty");
                for &t in &g.targets {
                    if !qs.contains(&t) {
                        qs.push(t);
                    }
                }
                idx.push(gi);
            } else {
                groups.push((g.targets.clone(), vec![gi]));
            }
        }
        let groups = groups
            .into_iter()
            .map(|(qubits, idx)| {
                let ops = idx
                    .into_iter()
                    .map(|gi| {
                        let g = &circuit.gates()[gi];
                        let pos = |q: usize| qubits.iter().position(|&x| x == q).expect("in group");
                        let local = match g.targets.as_slice() {
                            [a] => [pos(*a), 0],
                            [a, b] => [pos(*a), pos(*b)],
                            _ => unreachable!("validated arity"),
                        };
                        Op {
                            kind: g.kind,
                            local,
                            slot: g.slot,
                        }
                    })
                    .collect();
                Group { qubits, ops }
            })
            .collect();
        Self {
            n_qubits: circuit.n_qubits(),
            n_slots: circuit.n_slots(),
            groups,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// `amps ← U amps`.
    pub fn apply(&self, amps: &mut [C64], slots: &[f64]) {
        self.check(amps, slots);
        for g in &self.groups {
            let m = g.fused(slots);
            g.apply(amps, &m);
        }
    }

    /// `amps ← U† amps`.
    pub fn apply_adjoint(&self, amps: &mut [C64], slots: &[f64]) {
        self.check(amps, slots);
        for g in self.groups.iter().rev() {
            let m = dagger(&g.fused(slots), g.dim());
            g.apply(amps, &m);
        }
    }

    /// Reverse sweep. On entry `psi = U ψ_in` and `lam` is the costate
    /// `∂L/∂ψ_out*`. On exit `psi = ψ_in`, `lam = U† lam`, and
    /// `grad[k] += 2 Re⟨lam_out| ∂_k U |ψ_in⟩` for every slot.
    pub fn backward(&self, psi: &mut [C64], lam: &mut [C64], slots: &[f64], grad: &mut [f64]) {
        self.check(psi, slots);
        assert_eq!(lam.len(), psi.len());
        assert_eq!(grad.len(), self.n_slots);
        for g in self.groups.iter().rev() {
            let d = g.dim();
            let fused = g.fused(slots);
            let bd = dagger(&fused, d);
            g.apply(psi, &bd);
            if g.ops.iter().any(|op| op.slot.is_some()) {
                let outer: Mat = match g.qubits.as_slice() {
                    [q] => {
                        let o = kernels::outer_1q(psi, lam, *q);
                        let mut m = [ZERO; 16];
                        m[..4].copy_from_slice(&o);
                        m
                    }
                    [a, b] => kernels::outer_2q(psi, lam, *a, *b),
                    _ => unreachable!(),
                };
                // With X_k = (g_{k-1}…g_1) O (g_m…g_{k+1}) the slot gradient
                // is Tr(∂g_k X_k). Z_k = X_k g_k obeys Z_1 = O U and
                // Z_{k+1} = g_k Z_k g_k†, so one pass covers every op.
                let mut z = matmul(&outer, &fused, d);
                for op in &g.ops {
                    let gk = g.embed(op, slots, false);
                    // Z g† = (g Z†)†, with the sparse gate on the left
                    let w = dagger(&matmul(&gk, &dagger(&z, d), d), d);
                    if let Some(s) = op.slot {
                        let dg = g.embed(op, slots, true);
                        let mut tr = ZERO;
                        for i in 0..d {
                            for j in 0..d {
                                tr += dg[i * d + j] * w[j * d + i];
                            }
                        }
                        grad[s] += 2.0 * tr.re;
                    }
                    z = matmul(&gk, &w, d);
                }
            }
            g.apply(lam, &bd);
        }
    }

    fn check(&self, amps: &[C64], slots: &[f64]) {
        assert_eq!(amps.len(), 1 << self.n_qubits, "register size");
        assert_eq!(slots.len(), self.n_slots, "slot count");
    }
}

impl Group {
    fn dim(&self) -> usize {
        1 << self.qubits.len()
    }

    fn fused(&self, slots: &[f64]) -> Mat {
        let d = self.dim();
        self.ops
            .iter()
            .fold(identity(d), |acc, op| matmul(&self.embed(op, slots, false), &acc, d))
    }

    fn apply(&self, amps: &mut [C64], m: &Mat) {
        match self.qubits.as_slice() {
            [q] => kernels::apply_1q(amps, *q, m[..4].try_into().expect("2x2")),
            [a, b] => kernels::apply_2q(amps, *a, *b, m),
            _ => unreachable!(),
        }
    }

    /// The op's matrix (or its angle derivative) in the group basis.
    fn embed(&self, op: &Op, slots: &[f64], deriv: bool) -> Mat {
        let theta = op.slot.map_or(0.0, |s| slots[s]);
        match op.kind {
            GateKind::Ry => {
                let m = if deriv {
                    gates::ry_deriv(theta)
                } else {
                    gates::ry(theta)
                };
                if self.qubits.len() == 1 {
                    let mut out = [ZERO; 16];
                    out[..4].copy_from_slice(&m);
                    return out;
                }
                let id = gates::identity2();
                if op.local[0] == 0 {
                    kron(&m, &id)
                } else {
                    kron(&id, &m)
                }
            }
            GateKind::Cnot | GateKind::Cirx => {
                let m = match (op.kind, deriv) {
                    (GateKind::Cnot, _) => gates::cnot(),
                    (_, false) => gates::cirx(theta),
                    (_, true) => gates::cirx_deriv(theta),
                };
                if op.local[0] == 0 {
                    m
                } else {
                    swap_qubits(&m)
                }
            }
        }
    }
}

fn identity(d: usize) -> Mat {
    let mut m = [ZERO; 16];
    for i in 0..d {
        m[i * d + i] = C64::new(1.0, 0.0);
    }
    m
}

fn matmul(a: &Mat, b: &Mat, d: usize) -> Mat {
    let mut c = [ZERO; 16];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == ZERO {
                continue;
            }
            for j in 0..d {
                c[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    c
}

fn dagger(a: &Mat, d: usize) -> Mat {
    let mut c = [ZERO; 16];
    for i in 0..d {
        for j in 0..d {
            c[j * d + i] = a[i * d + j].conj();
        }
    }
    c
}

fn kron(a: &[C64; 4], b: &[C64; 4]) -> Mat {
    let mut m = [ZERO; 16];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[(2 * i + k) * 4 + 2 * j + l] = a[2 * i + j] * b[2 * k + l];
                }
            }
        }
    }
    m
}

/// Relabels a 4×4 matrix from basis `|ab⟩` to `|ba⟩`.
fn swap_qubits(m: &Mat) -> Mat {
    const P: [usize; 4] = [0, 2, 1, 3];
    let mut out = [ZERO; 16];
    for i in 0..4 {
        for j in 0..4 {
            out[P[i] * 4 + P[j]] = m[i * 4 + j];
        }
    }
    out
}
