//! Experiment configuration. The grammar is documented in `CONFIG.md` next
//! to this crate's manifest.

use std::path::{Path, PathBuf};

use feedback_vqc::circuits::{feedback_ansatz, hardware_efficient, tie_parameters};
use feedback_vqc::feedback::{init_policy, Direction, FrontEnd, Policy, PolicyKind, RnnConfig};
use feedback_vqc::optim::{ScheduleSpec, TrainConfig, DEFAULT_EARLY_STOP};
use feedback_vqc::protocol::{EvalMode, LossSpec, Objective, Problem, ProtocolSpec, Regularization};
use feedback_vqc::qsim::QubitLayout;
use feedback_vqc::targets::{
    aklt_hamiltonian_qubit, aklt_manifold, build_aklt, build_ghz, Boundary, Edge, TargetManifold,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] feedback_vqc::Error),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetConfig,
    pub layout: LayoutConfig,
    pub circuit: CircuitConfig,
    #[serde(default)]
    pub feedback: FeedbackConfig,
    pub loss: LossConfig,
    pub schedule: ScheduleSpec,
    pub train: TrainSection,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, rename = "teacher-student")]
    pub teacher_student: TeacherStudentConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    Ghz,
    /// The four-dimensional span of all boundary states.
    AkltManifold,
    AkltSingle { left: Edge, right: Edge },
}

/// Exactly one of `pattern` and `aklt-blocks`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct LayoutConfig {
    /// Role string such as `"SSASSASS"` (`S` system, `A` ancilla).
    pub pattern: Option<String>,
    /// Repetitions of the `ASSSSA` block.
    pub aklt_blocks: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CircuitConfig {
    pub u1_depth: usize,
    #[serde(default = "default_block_depth")]
    pub block_depth: usize,
    /// Ties `U₁` angles with this spatial period.
    pub tie_period: Option<usize>,
    #[serde(default = "one")]
    pub rounds: usize,
}

fn default_block_depth() -> usize {
    feedback_vqc::circuits::DEFAULT_BLOCK_DEPTH
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FeedbackConfig {
    pub kind: FeedbackKind,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_rnn_depth")]
    pub depth: usize,
    #[serde(default = "default_front_end")]
    pub front_end: FrontEnd,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            kind: FeedbackKind::Tabular,
            hidden: default_hidden(),
            depth: default_rnn_depth(),
            front_end: default_front_end(),
        }
    }
}

fn default_hidden() -> usize {
    8
}

fn default_rnn_depth() -> usize {
    2
}

fn default_front_end() -> FrontEnd {
    FrontEnd::Conv5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackKind {
    Tabular,
    RnnUni,
    RnnBi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Fidelity,
    PerSite,
    GhzLambda,
    Energy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct LossConfig {
    pub objective: ObjectiveKind,
    /// Required by `ghz-lambda`, in `[0, 1]`.
    pub lambda: Option<f64>,
    pub regularization: Option<RegularizationConfig>,
    /// Outcomes drawn per evaluation; exact summation when absent.
    pub batch: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationConfig {
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_ratio() -> f64 {
    Regularization::default().ratio
}

fn default_weight() -> f64 {
    Regularization::default().weight
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainSection {
    pub epochs: usize,
    pub seeds: Vec<u64>,
    /// `θ₁` starts uniform in `±init-scale` radians.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default = "default_early_stop")]
    pub early_stop: f64,
    pub entropy_interval: Option<usize>,
    pub snapshot_interval: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_init_scale() -> f64 {
    std::f64::consts::PI
}

fn default_early_stop() -> f64 {
    DEFAULT_EARLY_STOP
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AnalysisConfig {
    /// Outcomes whose MI stages are written; the most probable one when empty.
    #[serde(default)]
    pub outcomes: Vec<usize>,
    /// Ancilla indices to flip; every index when empty.
    #[serde(default)]
    pub correctability_indices: Vec<usize>,
    #[serde(default = "default_penalty")]
    pub correctability_penalty: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            outcomes: Vec::new(),
            correctability_indices: Vec::new(),
            correctability_penalty: default_penalty(),
        }
    }
}

fn default_penalty() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TeacherStudentConfig {
    pub n_qubits: usize,
    pub depths: Vec<usize>,
    /// Middle-cut entanglement of the input states, in bits.
    pub entropies: Vec<f64>,
    pub restarts: usize,
}

impl Default for TeacherStudentConfig {
    fn default() -> Self {
        Self {
            n_qubits: 8,
            depths: (1..=6).collect(),
            entropies: vec![0.0, 1.0, 2.0],
            restarts: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, so formatting and comments do not
    /// change it but every semantic field does. The output directory only
    /// says where results go and is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.train.out = default_out();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    /// This config restricted to one seed.
    pub fn for_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.train.seeds = vec![seed];
        c
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.train.seeds.is_empty() {
            return invalid("train.seeds is empty");
        }
        if self.train.epochs == 0 {
            return invalid("train.epochs must be positive");
        }
        if !(self.train.init_scale >= 0.0) {
            return invalid("train.init-scale must be nonnegative");
        }
        if self.circuit.rounds == 0 {
            return invalid("circuit.rounds must be positive");
        }
        self.schedule.validate()?;
        self.loss_spec()?.validate()?;
        let layout = self.layout()?;
        if layout.n_ancilla() == 0 {
            return invalid("layout needs at least one ancilla");
        }
        self.target(&layout)?;
        if self.teacher_student.restarts == 0 || self.teacher_student.depths.contains(&0) {
            return invalid("teacher-student needs depths >= 1 and restarts >= 1");
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<QubitLayout, ConfigError> {
        match (&self.layout.pattern, self.layout.aklt_blocks) {
            (Some(p), None) => Ok(QubitLayout::from_pattern(p)?),
            (None, Some(b)) => Ok(QubitLayout::aklt_blocks(b)?),
            _ => invalid("layout needs exactly one of `pattern` and `aklt-blocks`"),
        }
    }

    fn target(&self, layout: &QubitLayout) -> Result<TargetManifold, ConfigError> {
        let n = layout.n_system();
        Ok(match self.target {
            TargetConfig::Ghz => TargetManifold::single(build_ghz(n)?),
            TargetConfig::AkltManifold => {
                layout.require_spin1_pairs()?;
                aklt_manifold(n / 2)?
            }
            TargetConfig::AkltSingle { left, right } => {
                layout.require_spin1_pairs()?;
                TargetManifold::single(build_aklt(n / 2, Boundary::new(left, right))?)
            }
        })
    }

    fn loss_spec(&self) -> Result<LossSpec, ConfigError> {
        let l = &self.loss;
        if l.lambda.is_some() && l.objective != ObjectiveKind::GhzLambda {
            return invalid("loss.lambda only applies to the ghz-lambda objective");
        }
        let objective = match l.objective {
            ObjectiveKind::Fidelity => Objective::Fidelity,
            ObjectiveKind::PerSite => Objective::PerSite,
            ObjectiveKind::GhzLambda => match (l.lambda, self.target) {
                (Some(x), TargetConfig::Ghz) => Objective::GhzLambda(x),
                (None, _) => return invalid("ghz-lambda needs loss.lambda"),
                _ => return invalid("ghz-lambda needs the ghz target"),
            },
            ObjectiveKind::Energy => {
                if self.target == TargetConfig::Ghz {
                    return invalid("the energy objective needs an AKLT target");
                }
                let n = self.layout()?.n_system() / 2;
                Objective::Energy(aklt_hamiltonian_qubit(n)?)
            }
        };
        let mut spec = LossSpec::exact(objective);
        if let Some(r) = l.regularization {
            spec = spec.regularized(Regularization {
                ratio: r.ratio,
                weight: r.weight,
            });
        }
        if let Some(batch) = l.batch {
            spec.mode = EvalMode::Sampled { batch };
        }
        Ok(spec)
    }

    pub fn problem(&self) -> Result<Problem, ConfigError> {
        let layout = self.layout()?;
        let c = &self.circuit;
        let mut u1 = hardware_efficient(layout.n_qubits(), c.u1_depth)?;
        if let Some(p) = c.tie_period {
            u1 = tie_parameters(&u1, p)?;
        }
        let u2 = feedback_ansatz(layout.n_system(), c.block_depth)?;
        let spec = ProtocolSpec::new(layout.clone(), u1, u2)?.with_rounds(c.rounds)?;
        let target = self.target(&layout)?;
        Ok(Problem::new(spec, target, self.loss_spec()?)?)
    }

    pub fn policy_kind(&self, problem: &Problem) -> Result<PolicyKind, ConfigError> {
        let f = &self.feedback;
        let direction = match f.kind {
            FeedbackKind::Tabular => return Ok(PolicyKind::Tabular),
            FeedbackKind::RnnUni => Direction::Uni,
            FeedbackKind::RnnBi => Direction::Bi,
        };
        let blocks = problem.spec.u2().blocks();
        let n_out = blocks
            .first()
            .map(|b| b.n_slots)
            .ok_or_else(|| ConfigError::Invalid("feedback circuit has no blocks".into()))?;
        Ok(PolicyKind::Rnn(RnnConfig {
            depth: f.depth,
            hidden: f.hidden,
            direction,
            front_end: f.front_end,
            n_out,
        }))
    }

    /// Starting point for `seed`: `θ₁` uniform in `±init-scale` and one
    /// fresh policy per round.
    pub fn initial_point(
        &self,
        problem: &Problem,
        seed: u64,
    ) -> Result<(Vec<f64>, Vec<Policy>), ConfigError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // keep θ₁ draws apart from the training stream, which uses stream 0
        rng.set_stream(1);
        let s = self.train.init_scale;
        let theta1 = (0..problem.spec.u1().n_params())
            .map(|_| if s > 0.0 { rng.random_range(-s..s) } else { 0.0 })
            .collect();
        let kind = self.policy_kind(problem)?;
        let policies = (0..problem.spec.rounds())
            .map(|r| init_policy(&kind, problem.spec.context(), seed.wrapping_add(r as u64)))
            .collect::<feedback_vqc::Result<Vec<_>>>()?;
        Ok((theta1, policies))
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut t = TrainConfig::new(self.train.epochs, self.schedule.clone());
        t.early_stop = self.train.early_stop;
        t.entropy_interval = self.train.entropy_interval;
        t.snapshot_interval = self.train.snapshot_interval;
        t
    }
}
