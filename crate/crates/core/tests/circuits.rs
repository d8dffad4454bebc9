use feedback_vqc::circuits::{
    apply_circuit, build_feedback_ansatz, build_hardware_efficient, gates, hardware_efficient,
    feedback_ansatz, tie_parameters, GateKind, ParamCircuit,
};
use feedback_vqc::qsim::{entanglement_entropy, zero_state, QubitLayout, StateVector};
use feedback_vqc::{Error, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_angles(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.2..3.2)).collect()
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let l = QubitLayout::system_only(n).unwrap();
    let amps = (0..1 << n)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut s = StateVector::from_amplitudes(&l, amps).unwrap();
    s.normalize();
    s
}

/// Gate-by-gate application through the validated public gate API.
fn naive_apply(state: &StateVector, c: &ParamCircuit, angles: &[f64]) -> StateVector {
    let slots = c.expand(angles).unwrap();
    let mut s = state.clone();
    for g in c.gates() {
        match g.kind {
            GateKind::Ry => s.apply_gate(&gates::ry(slots[g.slot.unwrap()]), &g.targets),
            GateKind::Cnot => s.apply_gate(&gates::cnot(), &g.targets),
            GateKind::Cirx => s.apply_gate(&gates::cirx(slots[g.slot.unwrap()]), &g.targets),
        }
        .unwrap();
    }
    s
}

fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn mutual_information(s: &StateVector, a: usize, b: usize) -> f64 {
    entanglement_entropy(s, &[a]).unwrap() + entanglement_entropy(s, &[b]).unwrap()
        - entanglement_entropy(s, &[a, b]).unwrap()
}

#[test]
fn two_qubit_structure_count() {
    let c = hardware_efficient(2, 1).unwrap();
    assert_eq!(c.n_params(), 4);
    assert_eq!(c.count(GateKind::Cnot), 1);
    assert_eq!(c.count(GateKind::Ry), 4);
}

#[test]
fn parameter_count_and_depth() {
    for (n, l) in [(6, 1), (6, 4), (8, 3), (12, 2)] {
        let c = hardware_efficient(n, l).unwrap();
        assert_eq!(c.n_params(), (l + 1) * n);
        assert_eq!(c.depth(), 2 * l + 1);
    }
    assert!(hardware_efficient(4, 0).is_err());
}

#[test]
fn zero_angles_leave_vacuum() {
    let layout = QubitLayout::from_pattern("ASSSSA").unwrap();
    let c = build_hardware_efficient(&layout, 3).unwrap();
    let s = zero_state(&layout).unwrap();
    let out = apply_circuit(&s, &c, &vec![0.0; c.n_params()]).unwrap();
    assert!(max_diff(&out, &s) < 1e-15);
}

#[test]
fn fused_execution_matches_gate_by_gate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for c in [
        hardware_efficient(7, 3).unwrap(),
        feedback_ansatz(6, 2).unwrap(),
        tie_parameters(&hardware_efficient(6, 2).unwrap(), 3).unwrap(),
    ] {
        let s = random_state(c.n_qubits(), &mut rng);
        let a = random_angles(c.n_params(), &mut rng);
        let fast = apply_circuit(&s, &c, &a).unwrap();
        assert!(max_diff(&fast, &naive_apply(&s, &c, &a)) < 1e-12);
        assert!((fast.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn golden_amplitudes_eight_qubits() {
    let c = hardware_efficient(8, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let a = random_angles(c.n_params(), &mut rng);
    let s = zero_state(&QubitLayout::system_only(8).unwrap()).unwrap();
    let out = apply_circuit(&s, &c, &a).unwrap();
    assert!(max_diff(&out, &naive_apply(&s, &c, &a)) < 1e-13);
    let golden = GOLDEN;
    for (idx, re) in golden {
        assert!(
            (out.amplitudes()[idx].re - re).abs() < 1e-12,
            "amp {idx}: {}",
            out.amplitudes()[idx].re
        );
        assert!(out.amplitudes()[idx].im.abs() < 1e-15);
    }
}

// Pinned from the first run after the gate-by-gate cross-check above.
const GOLDEN: [(usize, f64); 5] = [
    (0, 8.61007095984626797e-2),
    (1, 8.78340880742335267e-2),
    (37, -2.06989659032588147e-1),
    (128, -6.95787228949046321e-3),
    (255, -3.59956221887938396e-3),
];

#[test]
fn reversed_negated_program_is_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for c in [hardware_efficient(6, 4).unwrap(), feedback_ansatz(4, 5).unwrap()] {
        let s = random_state(c.n_qubits(), &mut rng);
        let a = random_angles(c.n_params(), &mut rng);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let back = apply_circuit(&apply_circuit(&s, &c, &a).unwrap(), &c.reversed(), &neg).unwrap();
        assert!(max_diff(&back, &s) < 1e-10);
        let mut amps = apply_circuit(&s, &c, &a).unwrap().into_amplitudes();
        c.compile().apply_adjoint(&mut amps, &c.expand(&a).unwrap());
        let back = StateVector::from_amplitudes(s.layout(), amps).unwrap();
        assert!(max_diff(&back, &s) < 1e-10);
    }
}

#[test]
fn arity_mismatch_is_an_error() {
    let c = hardware_efficient(3, 1).unwrap();
    let s = zero_state(&QubitLayout::system_only(3).unwrap()).unwrap();
    assert!(matches!(
        apply_circuit(&s, &c, &[0.0; 5]),
        Err(Error::Arity { expected: 6, got: 5 })
    ));
}

#[test]
fn feedback_ansatz_structure() {
    let layout = QubitLayout::aklt_blocks(2).unwrap();
    let c = build_feedback_ansatz(&layout, 5).unwrap();
    assert_eq!(c.n_qubits(), 8);
    // even bonds (0,1) (2,3) (4,5) (6,7), then odd bonds (1,2) (3,4) (5,6)
    let pairs: Vec<_> = c.blocks().iter().map(|b| b.qubits).collect();
    assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5), (6, 7), (1, 2), (3, 4), (5, 6)]);
    assert!(c.blocks().iter().all(|b| b.n_slots == 17));
    assert_eq!(c.n_params(), 7 * 17);
    assert_eq!(c.count(GateKind::Cirx), 7 * 5);
    assert_eq!(c.count(GateKind::Ry), 7 * 12);
    // one block per bond: each block fuses into a single two-qubit group
    assert_eq!(c.compile().n_groups(), 7);
    let s = random_state(8, &mut ChaCha8Rng::seed_from_u64(1));
    let out = apply_circuit(&s, &c, &vec![0.0; c.n_params()]).unwrap();
    assert!(max_diff(&out, &s) < 1e-15);
}

#[test]
fn tying_halves_twelve_qubit_circuit() {
    let c = hardware_efficient(12, 3).unwrap();
    let t = tie_parameters(&c, 6).unwrap();
    assert_eq!(t.n_params() * 2, c.n_params());
    assert!(matches!(
        tie_parameters(&c, 5),
        Err(Error::InvalidPeriod { period: 5, .. })
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random_angles(t.n_params(), &mut rng);
    let s = random_state(12, &mut rng);
    let dup = t.expand(&a).unwrap();
    let tied = apply_circuit(&s, &t, &a).unwrap();
    let untied = apply_circuit(&s, &c, &dup).unwrap();
    assert_eq!(tied.amplitudes(), untied.amplitudes());
}

#[test]
fn tied_circuits_of_different_width_share_parameters() {
    let a = tie_parameters(&hardware_efficient(6, 2).unwrap(), 6).unwrap();
    let b = tie_parameters(&hardware_efficient(12, 2).unwrap(), 6).unwrap();
    assert_eq!(a.n_params(), b.n_params());
    let ea = a.expand(&(0..18).map(|x| x as f64).collect::<Vec<_>>()).unwrap();
    let eb = b.expand(&(0..18).map(|x| x as f64).collect::<Vec<_>>()).unwrap();
    // slot (layer 1, qubit 7) of the wide circuit reads the same class as (1, 1)
    assert_eq!(eb[12 + 7], ea[6 + 1]);
}

/// L = |⟨φ|Uψ⟩|², costate φ⟨φ|Uψ⟩.
fn overlap_loss(c: &ParamCircuit, s: &StateVector, phi: &StateVector, a: &[f64]) -> f64 {
    phi.inner(&apply_circuit(s, c, a).unwrap()).norm_sqr()
}

fn adjoint_grad(c: &ParamCircuit, s: &StateVector, phi: &StateVector, a: &[f64]) -> Vec<f64> {
    let slots = c.expand(a).unwrap();
    let prog = c.compile();
    let mut psi = apply_circuit(s, c, a).unwrap().into_amplitudes();
    let ov = phi.inner(&StateVector::from_amplitudes(s.layout(), psi.clone()).unwrap());
    let mut lam: Vec<C64> = phi.amplitudes().iter().map(|p| p * ov).collect();
    let mut g = vec![0.0; c.n_slots()];
    prog.backward(&mut psi, &mut lam, &slots, &mut g);
    for (x, y) in psi.iter().zip(s.amplitudes()) {
        assert!((x - y).norm() < 1e-10, "backward must uncompute the state");
    }
    c.collapse(&g)
}

fn fd_grad(c: &ParamCircuit, s: &StateVector, phi: &StateVector, a: &[f64]) -> Vec<f64> {
    let h = 1e-5;
    (0..a.len())
        .map(|k| {
            let mut p = a.to_vec();
            p[k] += h;
            let up = overlap_loss(c, s, phi, &p);
            p[k] -= 2.0 * h;
            (up - overlap_loss(c, s, phi, &p)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn adjoint_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for c in [
        hardware_efficient(5, 3).unwrap(),
        feedback_ansatz(4, 5).unwrap(),
        tie_parameters(&hardware_efficient(6, 2).unwrap(), 2).unwrap(),
    ] {
        let s = random_state(c.n_qubits(), &mut rng);
        let phi = random_state(c.n_qubits(), &mut rng);
        let a = random_angles(c.n_params(), &mut rng);
        let g = adjoint_grad(&c, &s, &phi, &a);
        let n = fd_grad(&c, &s, &phi, &a);
        for (x, y) in g.iter().zip(&n) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }
}

#[test]
fn tied_gradient_is_sum_of_untied_slot_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let c = hardware_efficient(6, 2).unwrap();
    let t = tie_parameters(&c, 3).unwrap();
    let s = random_state(6, &mut rng);
    let phi = random_state(6, &mut rng);
    let a = random_angles(t.n_params(), &mut rng);
    let untied = fd_grad(&c, &s, &phi, &t.expand(&a).unwrap());
    let mut summed = vec![0.0; t.n_params()];
    for (k, &cls) in t.sharing().unwrap().iter().enumerate() {
        summed[cls] += untied[k];
    }
    let tied = adjoint_grad(&t, &s, &phi, &a);
    for (x, y) in tied.iter().zip(&summed) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn lightcone_of_brickwork_circuit() {
    let n = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vac = zero_state(&QubitLayout::system_only(n).unwrap()).unwrap();
    for l in 1..=4 {
        let c = hardware_efficient(n, l).unwrap();
        let out = apply_circuit(&vac, &c, &random_angles(c.n_params(), &mut rng)).unwrap();
        let mut reach = 0;
        for a in 0..n {
            for b in a + 1..n {
                let mi = mutual_information(&out, a, b);
                if mi > 1e-10 {
                    reach = reach.max(b - a);
                }
            }
        }
        // correlations reach at most 2L-1 sites, well inside the depth bound
        assert!(reach <= 2 * l - 1, "L={l} reach {reach}");
        assert!(reach < c.depth());
    }
}

#[test]
fn depth_six_entangles_block_ends() {
    let layout = QubitLayout::from_pattern("ASSSSA").unwrap();
    let c = build_hardware_efficient(&layout, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let out = apply_circuit(&zero_state(&layout).unwrap(), &c, &random_angles(c.n_params(), &mut rng)).unwrap();
    assert!(mutual_information(&out, 0, 5) > 1e-6);
}

#[test]
fn json_round_trip() {
    let c = tie_parameters(&hardware_efficient(4, 2).unwrap(), 2).unwrap();
    let text = c.to_json().unwrap();
    assert!(text.contains("\"kind\": \"cnot\""));
    assert_eq!(ParamCircuit::from_json(&text).unwrap(), c);
    let f = feedback_ansatz(4, 1).unwrap();
    assert_eq!(ParamCircuit::from_json(&f.to_json().unwrap()).unwrap(), f);
    let broken = text.replacen("\"slot\": 0", "\"slot\": 99", 1);
    assert!(ParamCircuit::from_json(&broken).is_err());
}
