use feedback_vqc::circuits::{feedback_ansatz, hardware_efficient, tie_parameters};
use feedback_vqc::feedback::{
    init_policy, Direction, FrontEnd, Policy, PolicyKind, RnnConfig,
};
use feedback_vqc::gradients::{
    fd_check, fd_check_fn, loss_and_grad, outcome_probability_jacobian, relative_error,
    LossOracle,
};
use feedback_vqc::protocol::{
    EvalMode, LossSpec, MultiSize, Objective, Problem, ProtocolSpec, Regularization,
};
use feedback_vqc::qsim::{QubitLayout, StateVector};
use feedback_vqc::targets::{aklt_hamiltonian_qubit, aklt_manifold, build_ghz, TargetManifold};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

type NoRng = ChaCha8Rng;

fn randomize(p: &mut Policy, rng: &mut ChaCha8Rng, scale: f64) {
    for w in p.weights_mut() {
        *w += rng.random_range(-scale..scale);
    }
}

fn aklt_problem(blocks: usize, depth: usize, loss: LossSpec) -> Problem {
    let layout = QubitLayout::aklt_blocks(blocks).unwrap();
    let u1 = hardware_efficient(layout.n_qubits(), depth).unwrap();
    let u2 = feedback_ansatz(layout.n_system(), 5).unwrap();
    let spec = ProtocolSpec::new(layout, u1, u2).unwrap();
    Problem::new(spec, aklt_manifold(2 * blocks).unwrap(), loss).unwrap()
}

fn theta(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-PI..PI)).collect()
}

fn stride(n: usize, step: usize) -> Vec<usize> {
    (0..n).step_by(step).collect()
}

#[test]
fn quadratic_function_is_exact() {
    let f = |x: &[f64]| Ok(x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum());
    let x = [0.3, -1.2, 2.0];
    let g: Vec<f64> = x.iter().enumerate().map(|(i, v)| 2.0 * (i + 1) as f64 * v).collect();
    let r = fd_check_fn(f, &x, &g, 1e-4, &[0, 1, 2]).unwrap();
    assert!(r.max_rel_err() < 1e-9);
}

#[test]
fn relative_error_has_floor() {
    assert_eq!(relative_error(0.0, 1e-9), 1e-6);
    assert_eq!(relative_error(2.0, 1.0), 0.5);
}

#[test]
fn tabular_manifold_instance() {
    let p = aklt_problem(2, 3, LossSpec::exact(Objective::Fidelity));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let th = theta(p.spec.u1().n_params(), &mut rng);
    let mut pol = init_policy(&PolicyKind::Tabular, p.spec.context(), 0).unwrap();
    randomize(&mut pol, &mut rng, 0.5);
    let n = th.len() + pol.n_weights();
    let r = fd_check(&p, &th, &[pol], 1e-4, Some(&stride(n, 11))).unwrap();
    assert!(r.max_rel_err() < 1e-5, "{:?}", r.worst());
}

#[test]
fn rnn_policy_instance() {
    let p = aklt_problem(2, 2, LossSpec::exact(Objective::Fidelity));
    let kind = PolicyKind::Rnn(RnnConfig {
        depth: 2,
        hidden: 8,
        direction: Direction::Bi,
        front_end: FrontEnd::Conv5,
        n_out: 17,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let th = theta(p.spec.u1().n_params(), &mut rng);
    let mut pol = init_policy(&kind, p.spec.context(), 3).unwrap();
    randomize(&mut pol, &mut rng, 0.2);
    let n = th.len() + pol.n_weights();
    let r = fd_check(&p, &th, &[pol], 1e-4, Some(&stride(n, 13))).unwrap();
    assert!(r.max_rel_err() < 1e-5, "{:?}", r.worst());
}

#[test]
fn tied_instance_and_sharing_map() {
    let layout = QubitLayout::aklt_blocks(2).unwrap();
    let untied = hardware_efficient(12, 2).unwrap();
    let tied = tie_parameters(&untied, 6).unwrap();
    let u2 = feedback_ansatz(8, 5).unwrap();
    let target = aklt_manifold(4).unwrap();
    let loss = LossSpec::exact(Objective::Fidelity);
    let pt = Problem::new(
        ProtocolSpec::new(layout.clone(), tied.clone(), u2.clone()).unwrap(),
        target.clone(),
        loss.clone(),
    )
    .unwrap();
    let pu = Problem::new(ProtocolSpec::new(layout, untied, u2).unwrap(), target, loss).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let th = theta(tied.n_params(), &mut rng);
    let mut pol = init_policy(&PolicyKind::Tabular, pt.spec.context(), 0).unwrap();
    randomize(&mut pol, &mut rng, 0.5);
    let pols = [pol];
    let r = fd_check(&pt, &th, &pols, 1e-4, Some(&(0..th.len()).collect::<Vec<_>>())).unwrap();
    assert!(r.max_rel_err() < 1e-5, "{:?}", r.worst());
    let (lt, gt) = loss_and_grad::<NoRng>(&pt, &th, &pols, None).unwrap();
    let slots = tied.expand(&th).unwrap();
    let (lu, gu) = loss_and_grad::<NoRng>(&pu, &slots, &pols, None).unwrap();
    assert!((lt - lu).abs() < 1e-12);
    let summed = tied.collapse(&gu.d_theta1);
    for (a, b) in summed.iter().zip(&gt.d_theta1) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn regularized_loss_off_and_on_the_hinge() {
    let loss = LossSpec::exact(Objective::Fidelity).regularized(Regularization::default());
    let p = aklt_problem(1, 2, loss);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // well outside the window: small angles keep P(0) near 1
    let th: Vec<f64> = (0..p.spec.u1().n_params()).map(|_| rng.random_range(-0.3..0.3)).collect();
    let mut pol = init_policy(&PolicyKind::Tabular, p.spec.context(), 0).unwrap();
    randomize(&mut pol, &mut rng, 0.5);
    let pols = [pol];
    let e = feedback_vqc::protocol::total_loss::<NoRng>(&p, &th, &pols, None).unwrap();
    let bare = Problem::new(p.spec.clone(), p.target.clone(), LossSpec::exact(Objective::Fidelity)).unwrap();
    let b = feedback_vqc::protocol::total_loss::<NoRng>(&bare, &th, &pols, None).unwrap();
    assert!(e - b > 1e-3, "regularizer inactive");
    let n = th.len() + pols[0].n_weights();
    let r = fd_check(&p, &th, &pols, 1e-4, Some(&stride(n, 5))).unwrap();
    assert!(r.max_rel_err() < 1e-5, "{:?}", r.worst());

    // on the boundary: bisect between this point and one inside the window
    // until the largest deviation |d| sits at c
    let spec = &p.spec;
    let c = feedback_vqc::protocol::window_halfwidth(Regularization::default().ratio, 2);
    let max_dev = |x: &[f64]| {
        let table = spec.prepare(x).unwrap().outcome_distribution();
        table
            .probs()
            .iter()
            .map(|&q| (1.0 + q.log2() / 2.0).abs())
            .fold(0.0, f64::max)
    };
    let inside = (0..1000)
        .map(|_| theta(th.len(), &mut rng))
        .find(|x| max_dev(x) < c)
        .expect("a point inside the window");
    let mix = |t: f64| -> Vec<f64> { th.iter().zip(&inside).map(|(a, b)| a * (1.0 - t) + b * t).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if max_dev(&mix(mid)) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tb = mix(hi);
    assert!((max_dev(&tb) - c).abs() < 1e-9);
    // the hinge is C¹ but not C² here, so central differences carry an
    // O(ε) error; a smaller step keeps it below the tolerance
    let r = fd_check(&p, &tb, &pols, 1e-6, Some(&(0..tb.len()).collect::<Vec<_>>())).unwrap();
    assert!(r.max_rel_err() < 1e-5, "boundary {:?}", r.worst());
}

#[test]
fn ghz_and_energy_objectives() {
    let layout = QubitLayout::from_pattern("SASAS").unwrap();
    let u1 = hardware_efficient(5, 3).unwrap();
    let u2 = feedback_ansatz(3, 5).unwrap();
    let spec = ProtocolSpec::new(layout, u1, u2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let th = theta(spec.u1().n_params(), &mut rng);
    let mut pol = init_policy(&PolicyKind::Tabular, spec.context(), 0).unwrap();
    randomize(&mut pol, &mut rng, 1.0);
    let pols = [pol];
    let ghz = TargetManifold::single(build_ghz(3).unwrap());
    for lambda in [0.0, 0.5, 1.0] {
        let p = Problem::new(
            spec.clone(),
            ghz.clone(),
            LossSpec::exact(Objective::GhzLambda(lambda)).regularized(Regularization::default()),
        )
        .unwrap();
        let r = fd_check(&p, &th, &pols, 1e-4, None).unwrap();
        assert!(r.max_rel_err() < 1e-5, "λ={lambda} {:?}", r.worst());
    }
    let p = aklt_problem(1, 2, LossSpec::exact(Objective::Energy(aklt_hamiltonian_qubit(2).unwrap())));
    let th = theta(p.spec.u1().n_params(), &mut rng);
    let mut pol = init_policy(&PolicyKind::Tabular, p.spec.context(), 0).unwrap();
    randomize(&mut pol, &mut rng, 1.0);
    let n = th.len() + pol.n_weights();
    let r = fd_check(&p, &th, &[pol], 1e-4, Some(&stride(n, 3))).unwrap();
    assert!(r.max_rel_err() < 1e-5, "{:?}", r.worst());
}

#[test]
fn per_site_objective_and_two_rounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = aklt_problem(1, 2, LossSpec::exact(Objective::PerSite));
    let th = theta(p.spec.u1().n_params(), &mut rng);
    let mut pol = init_policy(&PolicyKind::Tabular, p.spec.context(), 0).unwrap();
    randomize(&mut pol, &mut rng, 1.0);
    let n = th.len() + pol.n_weights();
    let r = fd_check(&p, &th, &[pol.clone()], 1e-4, Some(&stride(n, 3))).unwrap();
    assert!(r.max_rel_err() < 1e-5, "{:?}", r.worst());

    let spec2 = p.spec.clone().with_rounds(2).unwrap();
    let p2 = Problem::new(spec2, p.target.clone(), LossSpec::exact(Objective::Fidelity)).unwrap();
    let mut pol2 = pol.clone();
    randomize(&mut pol2, &mut rng, 1.0);
    let n = th.len() + 2 * pol.n_weights();
    let r = fd_check(&p2, &th, &[pol, pol2], 1e-4, Some(&stride(n, 4))).unwrap();
    assert!(r.max_rel_err() < 1e-5, "{:?}", r.worst());
}

#[test]
fn sampled_surrogate_gradient_with_fixed_draws() {
    let mut loss = LossSpec::exact(Objective::PerSite);
    loss.mode = EvalMode::Sampled { batch: 64 };
    let p = aklt_problem(1, 2, loss.regularized(Regularization::default()));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let th = theta(p.spec.u1().n_params(), &mut rng);
    let mut pol = init_policy(&PolicyKind::Tabular, p.spec.context(), 0).unwrap();
    randomize(&mut pol, &mut rng, 1.0);
    let pols = [pol];
    let (_, g) = loss_and_grad(&p, &th, &pols, Some(&mut ChaCha8Rng::seed_from_u64(99))).unwrap();
    let f = |x: &[f64]| {
        feedback_vqc::protocol::total_loss(&p, x, &pols, Some(&mut ChaCha8Rng::seed_from_u64(99)))
    };
    let r = fd_check_fn(f, &th, &g.d_theta1, 1e-5, &(0..th.len()).collect::<Vec<_>>()).unwrap();
    assert!(r.max_rel_err() < 1e-5, "{:?}", r.worst());
}

#[test]
fn multisize_oracle_gradient() {
    let mut problems = Vec::new();
    for blocks in [1usize, 2] {
        let layout = QubitLayout::aklt_blocks(blocks).unwrap();
        let u1 = tie_parameters(&hardware_efficient(layout.n_qubits(), 2).unwrap(), 6).unwrap();
        let u2 = feedback_ansatz(layout.n_system(), 5).unwrap();
        let spec = ProtocolSpec::new(layout, u1, u2).unwrap();
        let mut loss = LossSpec::exact(Objective::PerSite);
        loss.mode = EvalMode::Sampled { batch: 16 };
        problems.push(Problem::new(spec, aklt_manifold(2 * blocks).unwrap(), loss).unwrap());
    }
    let task = MultiSize::new(problems).unwrap();
    let kind = PolicyKind::Rnn(RnnConfig {
        depth: 1,
        hidden: 6,
        direction: Direction::Uni,
        front_end: FrontEnd::Linear,
        n_out: 17,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut pol = init_policy(&kind, task.problems[0].spec.context(), 1).unwrap();
    randomize(&mut pol, &mut rng, 0.2);
    let th = theta(task.n_theta1(), &mut rng);
    let e = task.full(&th, &[pol.clone()], &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let grad: Vec<f64> = e.d_theta1.clone().unwrap().into_iter().chain(e.d_policy.clone().unwrap()).collect();
    let mut x = th.clone();
    x.extend_from_slice(pol.weights());
    let n1 = th.len();
    let f = |y: &[f64]| {
        let mut q = pol.clone();
        q.weights_mut().copy_from_slice(&y[n1..]);
        Ok(task.value(&y[..n1], &[q], &mut ChaCha8Rng::seed_from_u64(5))?.loss)
    };
    let r = fd_check_fn(f, &x, &grad, 1e-5, &stride(x.len(), 7)).unwrap();
    assert!(r.max_rel_err() < 1e-5, "{:?}", r.worst());
    // cached first-round states give the same policy gradient
    let cache = e.psi1_cache();
    let c = task.policy_step(&th, &[pol.clone()], &mut ChaCha8Rng::seed_from_u64(5), &cache).unwrap();
    assert_eq!(c.d_policy, e.d_policy);
    assert!(c.d_theta1.is_none());
}

#[test]
fn outcome_probabilities_conserve_total() {
    let p = aklt_problem(2, 3, LossSpec::exact(Objective::Fidelity));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let th = theta(p.spec.u1().n_params(), &mut rng);
    let jac = outcome_probability_jacobian(&p.spec, &th).unwrap();
    assert_eq!(jac.len(), 16);
    for k in 0..th.len() {
        let s: f64 = jac.iter().map(|row| row[k]).sum();
        assert!(s.abs() < 1e-10);
    }
    // spot-check one row against finite differences
    let k = 5;
    let mut up = th.clone();
    up[k] += 1e-5;
    let mut dn = th.clone();
    dn[k] -= 1e-5;
    let pu = p.spec.prepare(&up).unwrap().outcome_distribution();
    let pd = p.spec.prepare(&dn).unwrap().outcome_distribution();
    for m in 0..16 {
        let fd = (pu.get(m) - pd.get(m)) / 2e-5;
        assert!((fd - jac[m][k]).abs() < 1e-8);
    }
}

#[test]
fn regularizer_gradient_is_flat_inside_window() {
    // 2 ancillas on |+>|+> give a uniform table for any system rotation
    let layout = QubitLayout::from_pattern("ASSA").unwrap();
    let u1 = hardware_efficient(4, 1).unwrap();
    let u2 = feedback_ansatz(2, 5).unwrap();
    let spec = ProtocolSpec::new(layout.clone(), u1, u2).unwrap();
    let target = TargetManifold::single(StateVector::basis(&QubitLayout::system_only(2).unwrap(), 0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut th = vec![0.0; 8];
    th[4] = PI / 2.0 + 0.1;
    th[7] = PI / 2.0 - 0.1;
    th[5] = rng.random_range(-1.0..1.0);
    th[6] = rng.random_range(-1.0..1.0);
    let pol = [init_policy(&PolicyKind::Tabular, spec.context(), 0).unwrap()];
    let bare = Problem::new(spec.clone(), target.clone(), LossSpec::exact(Objective::Fidelity)).unwrap();
    let reg = Problem::new(
        spec,
        target,
        LossSpec::exact(Objective::Fidelity).regularized(Regularization { ratio: 2.0, weight: 10.0 }),
    )
    .unwrap();
    let (lb, gb) = loss_and_grad::<NoRng>(&bare, &th, &pol, None).unwrap();
    let (lr, gr) = loss_and_grad::<NoRng>(&reg, &th, &pol, None).unwrap();
    assert_eq!(lb, lr);
    assert_eq!(gb, gr);
}

#[test]
fn gradients_are_deterministic() {
    let p = aklt_problem(2, 2, LossSpec::exact(Objective::Fidelity).regularized(Regularization::default()));
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let th = theta(p.spec.u1().n_params(), &mut rng);
    let mut pol = init_policy(&PolicyKind::Tabular, p.spec.context(), 0).unwrap();
    randomize(&mut pol, &mut rng, 0.5);
    let pols = [pol];
    let a = loss_and_grad::<NoRng>(&p, &th, &pols, None).unwrap();
    let b = loss_and_grad::<NoRng>(&p, &th, &pols, None).unwrap();
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1, b.1);
    assert!(a.1.is_finite());
}

#[test]
fn zero_gradient_at_exact_minimum() {
    let layout = QubitLayout::from_pattern("SSAS").unwrap();
    let u1 = hardware_efficient(4, 2).unwrap();
    let u2 = feedback_ansatz(3, 5).unwrap();
    let spec = ProtocolSpec::new(layout, u1, u2).unwrap();
    let target = TargetManifold::single(StateVector::basis(&QubitLayout::system_only(3).unwrap(), 0).unwrap());
    let p = Problem::new(spec, target, LossSpec::exact(Objective::Fidelity)).unwrap();
    let th = vec![0.0; p.spec.u1().n_params()];
    let pol = [init_policy(&PolicyKind::Tabular, p.spec.context(), 0).unwrap()];
    let (l, g) = loss_and_grad::<NoRng>(&p, &th, &pol, None).unwrap();
    assert!(l.abs() < 1e-14);
    assert!(g.d_theta1.iter().chain(&g.d_policy).all(|x| x.abs() < 1e-14));
}

#[test]
fn fd_check_csv_format() {
    let f = |x: &[f64]| Ok(x[0] * x[0]);
    let r = fd_check_fn(f, &[1.0], &[2.0], 1e-4, &[0]).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("coordinate,analytic,numeric,relative_error\n0,2e0,"));
    assert!(!text.contains('\r'));
}
