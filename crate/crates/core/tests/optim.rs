use feedback_vqc::circuits::{feedback_ansatz, hardware_efficient};
use feedback_vqc::feedback::{init_policy, Policy, PolicyKind};
use feedback_vqc::optim::{
    adam_step, train, update_parameters, AdamConfig, AdamState, FreqSchedule, GradKind,
    LrSchedule, NoiseSchedule, ScheduleSpec, StopReason, TrainConfig,
};
use feedback_vqc::protocol::{LossSpec, Objective, Problem, ProtocolSpec, Regularization};
use feedback_vqc::qsim::QubitLayout;
use feedback_vqc::targets::{build_ghz, TargetManifold};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ghz_problem(pattern: &str, depth: usize, loss: LossSpec) -> Problem {
    let layout = QubitLayout::from_pattern(pattern).unwrap();
    let u1 = hardware_efficient(layout.n_qubits(), depth).unwrap();
    let u2 = feedback_ansatz(layout.n_system(), 5).unwrap();
    let n = layout.n_system();
    let spec = ProtocolSpec::new(layout, u1, u2).unwrap();
    Problem::new(spec, TargetManifold::single(build_ghz(n).unwrap()), loss).unwrap()
}

fn start(p: &Problem, seed: u64) -> (Vec<f64>, Vec<Policy>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let th = (0..p.spec.u1().n_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let pol = init_policy(&PolicyKind::Tabular, p.spec.context(), seed).unwrap();
    (th, vec![pol])
}

#[test]
fn zero_gradient_leaves_parameters() {
    let mut s = AdamState::new(3, AdamConfig::default());
    let mut x = [1.0, -2.0, 0.5];
    adam_step(&mut s, &mut x, &[0.0; 3], 0.1).unwrap();
    assert_eq!(x, [1.0, -2.0, 0.5]);
    assert_eq!(s.steps(), 1);
}

#[test]
fn first_step_has_size_lr() {
    let mut s = AdamState::new(2, AdamConfig::default());
    let mut x = [0.0, 0.0];
    adam_step(&mut s, &mut x, &[3.0, -0.01], 0.01).unwrap();
    assert!((x[0] + 0.01).abs() < 1e-8);
    assert!((x[1] - 0.01).abs() < 1e-6);
}

#[test]
fn shape_mismatch_is_an_error() {
    let mut s = AdamState::new(2, AdamConfig::default());
    assert!(adam_step(&mut s, &mut [0.0; 3], &[0.0; 3], 0.1).is_err());
}

#[test]
fn quadratic_bowl_converges() {
    let mut s = AdamState::new(2, AdamConfig::default());
    // ADAM moves about lr per step, so start within 100 steps of the minimum
    let mut x = [0.0, 0.0];
    let target = [1.0, -0.5];
    for _ in 0..500 {
        let g: Vec<f64> = x.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
        adam_step(&mut s, &mut x, &g, 1e-2).unwrap();
    }
    for (a, b) in x.iter().zip(&target) {
        assert!((a - b).abs() < 1e-6, "{x:?}");
    }
}

#[test]
fn frequency_schedule_endpoints_and_rounding() {
    let f = FreqSchedule::linear(100, 5, 10_000);
    assert_eq!(f.at(0), 100);
    assert_eq!(f.at(10_000), 5);
    assert_eq!(f.at(20_000), 5);
    assert_eq!(f.at(5_000), 53); // 52.5 rounds away from zero
    assert_eq!(f.at(100), 99); // 99.05
    let mut prev = f.at(0);
    for e in 0..=10_000 {
        let v = f.at(e);
        assert!(v <= prev);
        prev = v;
    }
    assert!(FreqSchedule { points: vec![(5, 1.0), (5, 2.0)] }.validate().is_err());
}

#[test]
fn learning_rate_schedules() {
    let step = LrSchedule::Step { points: vec![(0, 1e-3), (100, 1e-5)] };
    assert_eq!(step.at(0), 1e-3);
    assert_eq!(step.at(99), 1e-3);
    assert_eq!(step.at(100), 1e-5);
    let cos = LrSchedule::Cosine { start: 1e-2, end: 1e-4, epochs: 100 };
    assert!((cos.at(0) - 1e-2).abs() < 1e-15);
    assert!((cos.at(100) - 1e-4).abs() < 1e-15);
    assert!((cos.at(50) - 0.5 * (1e-2 + 1e-4)).abs() < 1e-12);
    assert!(LrSchedule::Constant { lr: 0.0 }.validate().is_err());
    let n = NoiseSchedule::linear(0.1, 10);
    assert_eq!(n.at(0), 0.1);
    assert_eq!(n.at(10), 0.0);
    assert_eq!(NoiseSchedule::none().at(3), 0.0);
}

#[test]
fn inner_loop_order_and_freshness() {
    let p = ghz_problem("SASAS", 2, LossSpec::exact(Objective::GhzLambda(0.5)));
    let (mut th, mut pols) = start(&p, 1);
    let mut a1 = AdamState::new(th.len(), AdamConfig::default());
    let mut aw = vec![AdamState::new(pols[0].n_weights(), AdamConfig::default())];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut log = Vec::new();
    update_parameters(&p, &mut th, &mut pols, &mut a1, &mut aw, 3, 1e-2, &mut rng, Some(&mut log)).unwrap();
    assert_eq!(log.len(), 4);
    assert_eq!(log[0].kind, GradKind::Theta1);
    assert_eq!((log[0].theta1_steps, log[0].policy_steps), (0, 0));
    for (k, c) in log[1..].iter().enumerate() {
        assert_eq!(c.kind, GradKind::Policy);
        assert_eq!(c.theta1_steps, 1);
        assert_eq!(c.policy_steps, k as u64);
    }
    assert_eq!(a1.steps(), 1);
    assert_eq!(aw[0].steps(), 3);
}

#[test]
fn frequency_zero_freezes_policy() {
    let p = ghz_problem("SASAS", 2, LossSpec::exact(Objective::GhzLambda(0.0)));
    let (th, pols) = start(&p, 2);
    let w0 = pols[0].weights().to_vec();
    let cfg = TrainConfig::new(20, ScheduleSpec::constant(1e-2, 0));
    let r = train(&p, th.clone(), pols, &cfg, 2).unwrap();
    assert_eq!(r.policies[0].weights(), &w0[..]);
    assert_ne!(r.theta1, th);
}

#[test]
fn inner_steps_match_single_step_loop() {
    // freq = 1: one θ₁ step then one W step, the W step seeing the new θ₁
    let p = ghz_problem("SASAS", 2, LossSpec::exact(Objective::GhzLambda(1.0)));
    let (th0, pols0) = start(&p, 3);
    let mut th = th0.clone();
    let mut pols = pols0.clone();
    let mut a1 = AdamState::new(th.len(), AdamConfig::default());
    let mut aw = vec![AdamState::new(pols[0].n_weights(), AdamConfig::default())];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    update_parameters(&p, &mut th, &mut pols, &mut a1, &mut aw, 1, 1e-2, &mut rng, None).unwrap();
    // manual reference
    let (_, g) = feedback_vqc::gradients::loss_and_grad::<ChaCha8Rng>(&p, &th0, &pols0, None).unwrap();
    let mut th_ref = th0.clone();
    AdamState::new(th_ref.len(), AdamConfig::default()).step(&mut th_ref, &g.d_theta1, 1e-2).unwrap();
    assert_eq!(th, th_ref);
    let (_, g2) = feedback_vqc::gradients::loss_and_grad::<ChaCha8Rng>(&p, &th_ref, &pols0, None).unwrap();
    let mut w_ref = pols0[0].weights().to_vec();
    AdamState::new(w_ref.len(), AdamConfig::default()).step(&mut w_ref, &g2.d_policy, 1e-2).unwrap();
    assert_eq!(pols[0].weights(), &w_ref[..]);
}

#[test]
fn training_is_deterministic() {
    let p = ghz_problem(
        "SASAS",
        2,
        LossSpec::exact(Objective::GhzLambda(0.5)).regularized(Regularization::default()),
    );
    let (th, pols) = start(&p, 4);
    let mut cfg = TrainConfig::new(30, ScheduleSpec::constant(2e-2, 2));
    cfg.schedule.noise = NoiseSchedule::linear(0.01, 20);
    cfg.entropy_interval = Some(10);
    let csv = || {
        let r = train(&p, th.clone(), pols.clone(), &cfg, 77).unwrap();
        let mut buf = Vec::new();
        r.write_metrics_csv(&mut buf).unwrap();
        buf
    };
    let a = csv();
    assert_eq!(a, csv());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("epoch,loss,infidelity,H,S,l_R,lr,freq,noise\n0,"));
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn small_ghz_protocol_converges() {
    let p = ghz_problem(
        "SASAS",
        2,
        LossSpec::exact(Objective::GhzLambda(1.0)).regularized(Regularization::default()),
    );
    let (th, pols) = start(&p, 5);
    let mut cfg = TrainConfig::new(3000, ScheduleSpec::constant(2e-2, 5));
    cfg.early_stop = 1e-4;
    let r = train(&p, th, pols, &cfg, 5).unwrap();
    let last = r.final_metrics().unwrap();
    assert_eq!(r.stop, StopReason::Converged, "infidelity {}", last.infidelity);
    assert!(last.infidelity <= 1e-4);
    assert!(last.entanglement.is_some());
}

#[test]
fn non_finite_parameters_abort() {
    let p = ghz_problem("SASAS", 1, LossSpec::exact(Objective::GhzLambda(0.0)));
    let (mut th, pols) = start(&p, 6);
    th[0] = f64::NAN;
    let r = train(&p, th, pols, &TrainConfig::new(5, ScheduleSpec::constant(1e-2, 1)), 0).unwrap();
    assert!(matches!(r.stop, StopReason::NumericAbort(_)));
    assert!(r.metrics.is_empty());
}
