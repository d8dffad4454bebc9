//! Post-hoc characterization of protocols: mutual-information structure,
//! feedback correctability and the teacher-student expressivity probes.

mod correctability;
mod expressivity;
mod local;
mod mi;

pub use correctability::{correctability_check, write_correctability_csv, CorrectabilityReport};
pub use expressivity::{
    block_gate_infidelity, block_unitary, fit_state, random_entropy_state, random_orthogonal,
    teacher_student, write_expressivity_csv, ExpressivityPoint,
};
pub use local::LocalOptConfig;
pub use mi::{
    averaged_mi, mi_profile, mutual_information_matrix, protocol_mi_stages, write_mi_csv,
    write_profile_csv, MiMatrix, Stage,
};
