use std::io::Write;

use nalgebra::DMatrix;

use crate::feedback::{MeasurementRecord, Policy};
use crate::protocol::ProtocolSpec;
use crate::qsim::{reduced_density, von_neumann_entropy, QubitLayout, StateVector};
use crate::{Error, Result, P_FLOOR};

/// Where in the protocol a state was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// `U₁|0⟩` on the full register.
    PostU1,
    /// System state after projecting the ancillas onto outcome `M`.
    PostMeasurement(usize),
    /// System state after the feedback for outcome `M`.
    PostFeedback(usize),
}

impl Stage {
    pub fn label(&self) -> String {
        match self {
            Stage::PostU1 => "post-u1".into(),
            Stage::PostMeasurement(m) => format!("post-measurement-{m}"),
            Stage::PostFeedback(m) => format!("post-feedback-{m}"),
        }
    }
}

/// Pairwise mutual information `I(j, j′)` in bits, zero on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct MiMatrix {
    pub values: DMatrix<f64>,
    pub stage: Stage,
}

impl MiMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// `I(j,j′) = S_j + S_{j′} − S_{jj′}` from one- and two-qubit reduced
/// density matrices of a pure state.
pub fn mutual_information_matrix(state: &StateVector, stage: Stage) -> Result<MiMatrix> {
    let n = state.n_qubits();
    let single: Vec<f64> = (0..n)
        .map(|q| Ok(von_neumann_entropy(&reduced_density(state, &[q])?)))
        .collect::<Result<_>>()?;
    let mut values = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let joint = von_neumann_entropy(&reduced_density(state, &[a, b])?);
            let i = single[a] + single[b] - joint;
            values[(a, b)] = i;
            values[(b, a)] = i;
        }
    }
    Ok(MiMatrix { values, stage })
}

/// Mean of `I(j, j+d)` over the `n − d` pairs at separation `d`.
pub fn averaged_mi(mi: &MiMatrix, d: usize) -> Result<f64> {
    let n = mi.n();
    if d == 0 || d >= n {
        return Err(Error::IndexOutOfRange { index: d, n_qubits: n });
    }
    Ok((0..n - d).map(|j| mi.values[(j, j + d)]).sum::<f64>() / (n - d) as f64)
}

/// `(d, Ī(d))` for `d = 1..n−1`.
pub fn mi_profile(mi: &MiMatrix) -> Vec<(usize, f64)> {
    (1..mi.n())
        .map(|d| (d, averaged_mi(mi, d).expect("distance in range")))
        .collect()
}

/// The three MI stages for outcome `m`: post-`U₁` on the full register,
/// then post-measurement and post-feedback on the system register (the
/// reset ancillas are a product state and carry no mutual information).
pub fn protocol_mi_stages(
    spec: &ProtocolSpec,
    theta1: &[f64],
    policy: &Policy,
    m: usize,
) -> Result<[MiMatrix; 3]> {
    let psi1 = spec.prepare(theta1)?;
    let mut phi = spec.extract(psi1.amplitudes(), m);
    let p: f64 = phi.iter().map(|a| a.norm_sqr()).sum();
    if p < P_FLOOR {
        return Err(Error::ZeroProbabilityBranch { prob: p });
    }
    let sys = QubitLayout::system_only(spec.layout().n_system())?;
    let inv = 1.0 / p.sqrt();
    phi.iter_mut().for_each(|a| *a *= inv);
    let measured = StateVector::from_amplitudes(&sys, phi.clone())?;
    let rec = MeasurementRecord::from_outcome(spec.layout(), m)?;
    let theta2 = policy.eval(spec.context(), &rec)?;
    let fed = crate::circuits::apply_circuit(&measured, spec.u2(), &theta2)?;
    Ok([
        mutual_information_matrix(&psi1, Stage::PostU1)?,
        mutual_information_matrix(&measured, Stage::PostMeasurement(m))?,
        mutual_information_matrix(&fed, Stage::PostFeedback(m))?,
    ])
}

/// Full matrix as a CSV grid with a `qubit` index column.
pub fn write_mi_csv<W: Write>(w: W, mi: &MiMatrix) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let n = mi.n();
    let mut header = vec!["qubit".to_string()];
    header.extend((0..n).map(|j| j.to_string()));
    out.write_record(&header)?;
    for a in 0..n {
        let mut row = vec![a.to_string()];
        row.extend((0..n).map(|b| format!("{:e}", mi.values[(a, b)])));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// `d,value,stage` rows for every matrix given.
pub fn write_profile_csv<W: Write>(w: W, mis: &[MiMatrix]) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(["d", "value", "stage"])?;
    for mi in mis {
        for (d, v) in mi_profile(mi) {
            out.write_record([d.to_string(), format!("{v:e}"), mi.stage.label()])?;
        }
    }
    out.flush()?;
    Ok(())
}
