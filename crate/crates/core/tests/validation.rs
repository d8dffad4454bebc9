use feedback_vqc::protocol::window_halfwidth;
use feedback_vqc::qsim::ProbTable;
use feedback_vqc::validation::{run_validation, ValidationOptions};
use feedback_vqc::P_FLOOR;

/// The hinge with its sign flipped: penalizes the inside of the window.
fn flipped_hinge(table: &ProbTable, ratio: f64) -> f64 {
    let na = table.n_ancilla();
    let c = window_halfwidth(ratio, na);
    let sum: f64 = table
        .probs()
        .iter()
        .map(|&p| {
            let d = 1.0 + p.max(P_FLOOR).log2() / na as f64;
            let excess = c - d.abs();
            if excess > 0.0 { excess * excess } else { 0.0 }
        })
        .sum();
    sum / table.len() as f64
}

#[test]
fn stock_build_passes_every_check() {
    let report = run_validation(&ValidationOptions::default()).unwrap();
    for c in &report.checks {
        assert!(c.passed, "{c:?}");
    }
    assert_eq!(report.checks.len(), 7);
    assert_eq!(report.gradients.len(), 5);
    let fd = report.check("gradient_fd").unwrap();
    assert!(fd.value < 1e-5);
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("check,passed,value,tolerance,detail\n"));
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn sign_error_in_hinge_is_caught() {
    let opts = ValidationOptions {
        regularizer: flipped_hinge,
        gradients: false,
        ..Default::default()
    };
    let report = run_validation(&opts).unwrap();
    assert!(!report.passed());
    let window = report.check("regularization_window").unwrap();
    assert!(!window.passed, "{window:?}");
    assert!(report.checks.iter().filter(|c| !c.passed).count() == 1);
}
