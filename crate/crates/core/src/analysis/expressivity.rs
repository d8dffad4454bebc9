use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::local::{bfgs, minimize, LocalOptConfig};
use crate::circuits::{feedback_ansatz, hardware_efficient, ParamCircuit};
use crate::qsim::{QubitLayout, StateVector};
use crate::{Error, Result, C64};

fn entropy_of(l: &[f64]) -> f64 {
    -l.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

fn spectrum(beta: f64, d: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|k| (-beta * k as f64).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Schmidt spectrum of rank `d` with entropy `s0`, from the family
/// `λ_k ∝ e^{−βk}` with `β` found by bisection.
fn spectrum_with_entropy(s0: f64, d: usize) -> Vec<f64> {
    if s0 <= 0.0 {
        return vec![1.0];
    }
    if s0 >= (d as f64).log2() - 1e-12 {
        return vec![1.0 / d as f64; d];
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while entropy_of(&spectrum(hi, d)) > s0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy_of(&spectrum(mid, d)) > s0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    spectrum(0.5 * (lo + hi), d)
}

/// Random real MPS with Gaussian tensors and bond dimension at most `chi`,
/// as a dense amplitude vector.
fn random_mps<R: Rng>(n: usize, chi: usize, rng: &mut R) -> Vec<f64> {
    let bond = |b: usize| chi.min(1 << b.min(n - b).min(30));
    // psi[idx * right + r] over the first i sites
    let mut psi = vec![1.0];
    for i in 0..n {
        let (left, right) = (bond(i), bond(i + 1));
        let a: Vec<f64> = (0..2 * left * right).map(|_| rng.sample(StandardNormal)).collect();
        let rows = 1usize << i;
        let mut next = vec![0.0; 2 * rows * right];
        for idx in 0..rows {
            for l in 0..left {
                let p = psi[idx * left + l];
                for sb in 0..2 {
                    let out = idx | (sb << i);
                    for r in 0..right {
                        next[out * right + r] += p * a[(sb * left + l) * right + r];
                    }
                }
            }
        }
        psi = next;
    }
    psi
}

/// Pure real state on `n` qubits whose entanglement entropy across the
/// middle cut is `s0` bits.
///
/// A random real MPS of bond dimension `2^⌈s0⌉` supplies the Schmidt
/// vectors of the middle cut, and its Schmidt spectrum is replaced by one of
/// entropy `s0`. So `s0 = 0` gives a random product state and the
/// entanglement inside each half stays short-ranged. States stay real, like
/// every state the Ry/CNOT circuits can produce.
pub fn random_entropy_state(n: usize, s0: f64, seed: u64) -> Result<StateVector> {
    let na = n / 2;
    if n < 2 || !(0.0..=na as f64 + 1e-12).contains(&s0) {
        return Err(Error::InfeasibleEntropy { s0, n_qubits: n });
    }
    let chi = (1usize << (s0 - 1e-12).max(0.0).ceil() as usize).min(1 << na);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = random_mps(n, chi, &mut rng);
    let (dl, dr) = (1usize << na, 1usize << (n - na));
    let m = DMatrix::from_fn(dl, dr, |l, r| psi[l | (r << na)]);
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let lambda = spectrum_with_entropy(s0, chi);
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    for (k, l) in lambda.iter().enumerate() {
        let c = order[k];
        for li in 0..dl {
            for ri in 0..dr {
                amps[li | (ri << na)] += C64::new(l.sqrt() * u[(li, c)] * vt[(c, ri)], 0.0);
            }
        }
    }
    StateVector::from_amplitudes(&QubitLayout::system_only(n)?, amps)
}

/// One point of the teacher-student landscape scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressivityPoint {
    pub teacher_depth: usize,
    pub student_depth: usize,
    pub s0: f64,
    /// Lowest final infidelity over all restarts.
    pub infidelity: f64,
    pub restarts: usize,
}

/// Fits `student` applied to `psi0` to the state `target`, starting from
/// `init`: ADAM first, then BFGS from its best point. Returns the final
/// infidelity and angles.
pub fn fit_state(
    psi0: &[C64],
    target: &[C64],
    student: &ParamCircuit,
    init: Vec<f64>,
    cfg: &LocalOptConfig,
) -> Result<(f64, Vec<f64>)> {
    let prog = student.compile();
    let f = |x: &[f64], g: &mut [f64]| -> Result<f64> {
        let slots = student.expand(x)?;
        let mut s = psi0.to_vec();
        prog.apply(&mut s, &slots);
        let tau: C64 = target.iter().zip(&s).map(|(t, v)| t.conj() * v).sum();
        // L = 1 − |⟨t|s⟩|², ∂L/∂s* = −⟨t|s⟩ t
        let mut lam: Vec<C64> = target.iter().map(|t| -(t * tau)).collect();
        let mut sg = vec![0.0; slots.len()];
        prog.backward(&mut s, &mut lam, &slots, &mut sg);
        g.copy_from_slice(&student.collapse(&sg));
        Ok(1.0 - tau.norm_sqr())
    };
    let (_, x) = minimize(init, cfg, &f)?;
    // ADAM finds the basin; BFGS settles it so shallow minima are not
    // mistaken for slow convergence
    bfgs(x, cfg, &f)
}

/// Teacher-student probe on `n` qubits with hardware-efficient circuits:
/// a random-angle teacher of depth `d_t` acts on a random state of
/// entropy `s0`; a depth-`d_s` student is fitted from `restarts` random
/// starts and the best infidelity is reported.
pub fn teacher_student(
    n: usize,
    d_t: usize,
    d_s: usize,
    s0: f64,
    restarts: usize,
    seed: u64,
    cfg: &LocalOptConfig,
) -> Result<ExpressivityPoint> {
    if restarts == 0 {
        return Err(Error::InvalidSpec("teacher-student needs at least one restart".into()));
    }
    let psi0 = random_entropy_state(n, s0, seed)?.into_amplitudes();
    let teacher = hardware_efficient(n, d_t)?;
    let student = hardware_efficient(n, d_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let angles = |k: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..k).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
    };
    let th_t = angles(teacher.n_params(), &mut rng);
    let mut target = psi0.clone();
    teacher.compile().apply(&mut target, &teacher.expand(&th_t)?);
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let init = angles(student.n_params(), &mut rng);
        let (l, _) = fit_state(&psi0, &target, &student, init, cfg)?;
        best = best.min(l);
        if best <= cfg.target {
            break;
        }
    }
    Ok(ExpressivityPoint {
        teacher_depth: d_t,
        student_depth: d_s,
        s0,
        infidelity: best.max(0.0),
        restarts,
    })
}

/// Haar-random 4×4 real orthogonal matrix (either determinant).
pub fn random_orthogonal<R: Rng>(rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(4, 4, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..4 {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Unitary of a single two-qubit feedback block of depth `block_depth`,
/// in the `2·bit(q0) + bit(q1)` basis.
pub fn block_unitary(block_depth: usize, angles: &[f64]) -> Result<DMatrix<C64>> {
    let c = feedback_ansatz(2, block_depth)?;
    let prog = c.compile();
    let slots = c.expand(angles)?;
    let mut u = DMatrix::<C64>::zeros(4, 4);
    for col in 0..4 {
        let mut v = vec![C64::new(0.0, 0.0); 4];
        v[swap_bits(col)] = C64::new(1.0, 0.0);
        prog.apply(&mut v, &slots);
        for row in 0..4 {
            u[(row, col)] = v[swap_bits(row)];
        }
    }
    Ok(u)
}

/// Converts between the little-endian register index and the
/// `2·bit(q0) + bit(q1)` matrix index.
fn swap_bits(i: usize) -> usize {
    ((i & 1) << 1) | (i >> 1)
}

/// Best gate infidelity `1 − |Tr(Oᵀ U(θ))|² / 16` reached by one feedback
/// block of depth `block_depth` against the real orthogonal `target`, over
/// `restarts` random starts. Each start is refined with BFGS, since the
/// question is whether the block can represent the gate at all.
pub fn block_gate_infidelity(
    target: &DMatrix<f64>,
    block_depth: usize,
    restarts: usize,
    seed: u64,
    cfg: &LocalOptConfig,
) -> Result<f64> {
    if target.shape() != (4, 4) {
        return Err(Error::Shape("two-qubit targets are 4×4".into()));
    }
    let c = feedback_ansatz(2, block_depth)?;
    let f = block_loss(target, block_depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..restarts.max(1) {
        let init: Vec<f64> = (0..c.n_params())
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let (l, _) = bfgs(init, cfg, &f)?;
        best = best.min(l);
        if best <= cfg.target {
            break;
        }
    }
    Ok(best.max(0.0))
}

/// Loss `1 − |Tr(Oᵀ U(θ))|² / 16` and its gradient for one feedback block.
pub(crate) fn block_loss(
    target: &DMatrix<f64>,
    block_depth: usize,
) -> Result<impl Fn(&[f64], &mut [f64]) -> Result<f64>> {
    let c = feedback_ansatz(2, block_depth)?;
    let prog = c.compile();
    // columns of O in register order
    let cols: Vec<Vec<C64>> = (0..4)
        .map(|col| {
            let mut v = vec![C64::new(0.0, 0.0); 4];
            for row in 0..4 {
                v[swap_bits(row)] = C64::new(target[(row, swap_bits(col))], 0.0);
            }
            v
        })
        .collect();
    Ok(move |x: &[f64], g: &mut [f64]| -> Result<f64> {
        let slots = c.expand(x)?;
        let mut outs = Vec::with_capacity(4);
        let mut tau = C64::new(0.0, 0.0);
        for (k, o) in cols.iter().enumerate() {
            let mut v = vec![C64::new(0.0, 0.0); 4];
            v[k] = C64::new(1.0, 0.0);
            prog.apply(&mut v, &slots);
            tau += o.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<C64>();
            outs.push(v);
        }
        let mut sg = vec![0.0; slots.len()];
        for (o, mut v) in cols.iter().zip(outs) {
            let mut lam: Vec<C64> = o.iter().map(|a| -(a * tau) / 16.0).collect();
            prog.backward(&mut v, &mut lam, &slots, &mut sg);
        }
        g.copy_from_slice(&c.collapse(&sg));
        Ok(1.0 - tau.norm_sqr() / 16.0)
    })
}


/// `teacher_depth,student_depth,S0,infidelity,restarts`.
pub fn write_expressivity_csv<W: Write>(w: W, points: &[ExpressivityPoint]) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(["teacher_depth", "student_depth", "S0", "infidelity", "restarts"])?;
    for p in points {
        out.write_record([
            p.teacher_depth.to_string(),
            p.student_depth.to_string(),
            format!("{:e}", p.s0),
            format!("{:e}", p.infidelity),
            p.restarts.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
