use feedback_vqc::circuits::{feedback_ansatz, ParamCircuit};
use feedback_vqc::feedback::{
    init_policy, Direction, FeedbackContext, FrontEnd, MeasurementRecord, Policy, PolicyKind,
    RnnConfig, RnnPolicy, TabularPolicy,
};
use feedback_vqc::qsim::QubitLayout;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(blocks: usize) -> (QubitLayout, ParamCircuit) {
    let layout = QubitLayout::aklt_blocks(blocks).unwrap();
    let u2 = feedback_ansatz(layout.n_system(), 5).unwrap();
    (layout, u2)
}

fn cfg(direction: Direction, front_end: FrontEnd) -> RnnConfig {
    RnnConfig {
        depth: 2,
        hidden: 8,
        direction,
        front_end,
        n_out: 17,
    }
}

fn randomized(c: RnnConfig, seed: u64) -> RnnPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = RnnPolicy::init(c, &mut rng).unwrap();
    // break the zero head and unit gains so every weight matters
    for w in p.weights_mut() {
        *w += rng.random_range(-0.3..0.3);
    }
    p
}

#[test]
fn tabular_rows() {
    let (layout, u2) = setup(1);
    let ctx = FeedbackContext { layout: &layout, u2: &u2 };
    let mut p = match init_policy(&PolicyKind::Tabular, ctx, 0).unwrap() {
        Policy::Tabular(t) => t,
        _ => unreachable!(),
    };
    let (layout2, u2b) = setup(2);
    let t2 = TabularPolicy::zeros(layout2.n_ancilla(), u2b.n_params()).unwrap();
    assert_eq!(t2.n_rows(), 16);
    let m0 = MeasurementRecord::from_outcome(&layout, 0).unwrap();
    let m1 = MeasurementRecord::from_outcome(&layout, 2).unwrap();
    assert!(p.eval(ctx, &m0).unwrap().iter().all(|&x| x == 0.0));
    p.row_mut(2)[3] = 0.7;
    assert_eq!(p.eval(ctx, &m1).unwrap()[3], 0.7);
    assert!(p.eval(ctx, &m0).unwrap().iter().all(|&x| x == 0.0));
    // gradient is an indicator on the evaluated row
    let mut g = vec![0.0; p.weights().len()];
    let d: Vec<f64> = (0..u2.n_params()).map(|k| k as f64 + 1.0).collect();
    p.backprop(ctx, &m1, &d, &mut g).unwrap();
    for (i, x) in g.iter().enumerate() {
        let row = i / u2.n_params();
        assert_eq!(*x != 0.0, row == 2);
    }
}

#[test]
fn tabular_rejects_wrong_record() {
    let (layout, u2) = setup(1);
    let (big, _) = setup(2);
    let ctx = FeedbackContext { layout: &layout, u2: &u2 };
    let p = TabularPolicy::zeros(2, u2.n_params()).unwrap();
    let m = MeasurementRecord::from_outcome(&big, 5).unwrap();
    assert!(p.eval(ctx, &m).is_err());
}

#[test]
fn tabular_csv_round_trip() {
    let (layout, u2) = setup(1);
    let _ = layout;
    let mut p = TabularPolicy::zeros(2, u2.n_params()).unwrap();
    p.row_mut(1)[0] = -1.25;
    p.row_mut(2)[16] = 3.0e-7;
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("bitstring,theta_0,"));
    // ancilla 0 is the first character
    assert!(lines[2].starts_with("10,"));
    assert_eq!(TabularPolicy::read_csv(&buf[..]).unwrap(), p);
}

#[test]
fn record_bit_order() {
    let layout = QubitLayout::from_pattern("ASSA").unwrap();
    let m = MeasurementRecord::from_outcome(&layout, 1).unwrap();
    assert_eq!(m.bits(), &[true, false]);
    assert_eq!(m.positions(), &[0, 3]);
    assert_eq!(m.bitstring(), "10");
    assert!(MeasurementRecord::from_outcome(&layout, 4).is_err());
}

#[test]
fn ff_width_rounding() {
    assert_eq!(cfg(Direction::Uni, FrontEnd::Linear).ff_dim(), 20);
    let wide = RnnConfig { hidden: 60, ..cfg(Direction::Uni, FrontEnd::Linear) };
    assert_eq!(wide.ff_dim(), 160);
}

#[test]
fn zero_network_outputs_head_bias() {
    let (layout, u2) = setup(2);
    let ctx = FeedbackContext { layout: &layout, u2: &u2 };
    let c = cfg(Direction::Bi, FrontEnd::Conv5);
    let mut p = RnnPolicy::from_weights(c.clone(), vec![0.0; c.n_weights()]).unwrap();
    let bias: Vec<f64> = (0..17).map(|k| 0.1 * k as f64 - 0.5).collect();
    p.head_bias_mut().copy_from_slice(&bias);
    for m in [0, 5, 15] {
        let out = p.eval(ctx, &MeasurementRecord::from_outcome(&layout, m).unwrap()).unwrap();
        for b in u2.blocks() {
            assert_eq!(&out[b.slot_offset..b.slot_offset + 17], &bias[..]);
        }
    }
}

#[test]
fn fresh_network_is_identity_feedback() {
    let (layout, u2) = setup(2);
    let ctx = FeedbackContext { layout: &layout, u2: &u2 };
    for dir in [Direction::Uni, Direction::Bi] {
        let kind = PolicyKind::Rnn(cfg(dir, FrontEnd::Conv5));
        let a = init_policy(&kind, ctx, 42).unwrap();
        let b = init_policy(&kind, ctx, 42).unwrap();
        assert_eq!(a.weights(), b.weights());
        let out = a.eval(ctx, &MeasurementRecord::from_outcome(&layout, 9).unwrap()).unwrap();
        assert!(out.iter().all(|x| x.is_finite() && x.abs() < 1.0));
    }
}

#[test]
fn network_is_size_agnostic() {
    let p = randomized(cfg(Direction::Bi, FrontEnd::Conv5), 3);
    for blocks in [2, 3] {
        let (layout, u2) = setup(blocks);
        let ctx = FeedbackContext { layout: &layout, u2: &u2 };
        let out = p.eval(ctx, &MeasurementRecord::from_outcome(&layout, 3).unwrap()).unwrap();
        assert_eq!(out.len(), u2.n_params());
        assert!(out.iter().all(|x| x.is_finite()));
    }
}

#[test]
fn mirror_symmetric_network_on_palindrome() {
    let layout = QubitLayout::from_pattern("ASSSSA").unwrap();
    let u2 = feedback_ansatz(4, 5).unwrap();
    let ctx = FeedbackContext { layout: &layout, u2: &u2 };
    let mut p = randomized(cfg(Direction::Bi, FrontEnd::Linear), 8);
    p.symmetrize();
    // blocks: (0,1) (2,3) (1,2); the first two mirror each other, the last is self-mirrored
    for m in [0b00, 0b11] {
        let out = p.eval(ctx, &MeasurementRecord::from_outcome(&layout, m).unwrap()).unwrap();
        for k in 0..17 {
            assert!((out[k] - out[17 + k]).abs() < 1e-12);
        }
    }
    let out = p.eval(ctx, &MeasurementRecord::from_outcome(&layout, 0b01).unwrap()).unwrap();
    assert!((0..17).any(|k| (out[k] - out[17 + k]).abs() > 1e-6));
}

#[test]
fn unidirectional_network_is_causal() {
    let (layout, u2) = setup(2);
    let ctx = FeedbackContext { layout: &layout, u2: &u2 };
    let p = randomized(cfg(Direction::Uni, FrontEnd::Linear), 5);
    let sys = layout.system_qubits();
    let anc = layout.ancilla_qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let m = rng.random_range(0..16usize);
        let base = p.eval(ctx, &MeasurementRecord::from_outcome(&layout, m).unwrap()).unwrap();
        for b in u2.blocks() {
            let right = sys[b.qubits.1];
            let mut flip = 0;
            for (k, &q) in anc.iter().enumerate() {
                if q > right {
                    flip |= 1 << k;
                }
            }
            let other = p
                .eval(ctx, &MeasurementRecord::from_outcome(&layout, m ^ flip).unwrap())
                .unwrap();
            let r = b.slot_offset..b.slot_offset + b.n_slots;
            assert_eq!(&base[r.clone()], &other[r]);
        }
    }
    // a bidirectional network does see the right-hand bits
    let bi = randomized(cfg(Direction::Bi, FrontEnd::Linear), 5);
    let a = bi.eval(ctx, &MeasurementRecord::from_outcome(&layout, 0).unwrap()).unwrap();
    let b = bi.eval(ctx, &MeasurementRecord::from_outcome(&layout, 8).unwrap()).unwrap();
    assert_ne!(a[..17], b[..17]);
}

fn objective(p: &RnnPolicy, ctx: FeedbackContext<'_>, m: &MeasurementRecord, c: &[f64]) -> f64 {
    p.eval(ctx, m).unwrap().iter().zip(c).map(|(a, b)| a * b).sum()
}

#[test]
fn rnn_gradients_match_finite_differences() {
    let (layout, u2) = setup(2);
    let ctx = FeedbackContext { layout: &layout, u2: &u2 };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let c: Vec<f64> = (0..u2.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m = MeasurementRecord::from_outcome(&layout, 0b1011).unwrap();
    for (dir, fe) in [
        (Direction::Uni, FrontEnd::Conv5),
        (Direction::Bi, FrontEnd::Linear),
        (Direction::Bi, FrontEnd::Conv5),
    ] {
        let p = randomized(cfg(dir, fe), 11);
        let mut g = vec![0.0; p.weights().len()];
        p.backprop(ctx, &m, &c, &mut g).unwrap();
        let eps = 1e-4;
        let mut worst: f64 = 0.0;
        for k in 0..g.len() {
            let mut q = p.clone();
            q.weights_mut()[k] += eps;
            let up = objective(&q, ctx, &m, &c);
            q.weights_mut()[k] -= 2.0 * eps;
            let dn = objective(&q, ctx, &m, &c);
            let num = (up - dn) / (2.0 * eps);
            let rel = (g[k] - num).abs() / g[k].abs().max(num.abs()).max(1e-3);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-5, "{dir:?}/{fe:?}: {worst}");
    }
}

#[test]
fn binary_round_trip() {
    let p = randomized(cfg(Direction::Uni, FrontEnd::Conv5), 2);
    let mut buf = Vec::new();
    p.write_binary(&mut buf).unwrap();
    assert_eq!(&buf[..8], b"FVQCRNN1");
    assert_eq!(buf.len(), 8 + 20 + 8 + 8 * p.weights().len());
    assert_eq!(RnnPolicy::read_binary(&buf[..]).unwrap(), p);
    buf[0] = b'X';
    assert!(RnnPolicy::read_binary(&buf[..]).is_err());
}
