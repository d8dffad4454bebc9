use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Learning rate as a function of the epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant { lr: f64 },
    /// `(epoch, lr)` pairs sorted by epoch; each rate holds from its epoch on.
    Step { points: Vec<(usize, f64)> },
    /// Cosine decay from `start` to `end` over `epochs`, then flat.
    Cosine { start: f64, end: f64, epochs: usize },
}

impl LrSchedule {
    pub fn at(&self, epoch: usize) -> f64 {
        match self {
            LrSchedule::Constant { lr } => *lr,
            LrSchedule::Step { points } => points
                .iter()
                .take_while(|(e, _)| *e <= epoch)
                .last()
                .or(points.first())
                .map(|p| p.1)
                .unwrap_or(0.0),
            LrSchedule::Cosine { start, end, epochs } => {
                let t = (epoch as f64 / (*epochs).max(1) as f64).min(1.0);
                end + 0.5 * (start - end) * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LrSchedule::Constant { lr } => *lr > 0.0,
            LrSchedule::Step { points } => {
                !points.is_empty()
                    && points.iter().all(|p| p.1 > 0.0)
                    && points.windows(2).all(|w| w[0].0 < w[1].0)
            }
            LrSchedule::Cosine { start, end, .. } => *start > 0.0 && *end > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid learning-rate schedule {self:?}")))
        }
    }
}

fn piecewise(points: &[(usize, f64)], epoch: usize) -> f64 {
    match points {
        [] => 0.0,
        [only] => only.1,
        _ => {
            if epoch <= points[0].0 {
                return points[0].1;
            }
            for w in points.windows(2) {
                let ((e0, v0), (e1, v1)) = (w[0], w[1]);
                if epoch <= e1 {
                    let t = (epoch - e0) as f64 / (e1 - e0) as f64;
                    return v0 + t * (v1 - v0);
                }
            }
            points[points.len() - 1].1
        }
    }
}

fn check_points(points: &[(usize, f64)], what: &str) -> Result<()> {
    if points.is_empty()
        || points.windows(2).any(|w| w[0].0 >= w[1].0)
        || points.iter().any(|p| !(p.1 >= 0.0))
    {
        return Err(Error::InvalidSpec(format!(
            "{what} schedule needs nonnegative values at strictly increasing epochs"
        )));
    }
    Ok(())
}

/// Inner policy steps per epoch: piecewise-linear in the epoch, rounded to
/// the nearest integer (ties away from zero).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqSchedule {
    pub points: Vec<(usize, f64)>,
}

impl FreqSchedule {
    pub fn constant(freq: usize) -> Self {
        Self {
            points: vec![(0, freq as f64)],
        }
    }

    /// Linear ramp from `start` at epoch 0 to `end` at `epochs`.
    pub fn linear(start: usize, end: usize, epochs: usize) -> Self {
        Self {
            points: vec![(0, start as f64), (epochs, end as f64)],
        }
    }

    pub fn at(&self, epoch: usize) -> usize {
        piecewise(&self.points, epoch).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        check_points(&self.points, "update-frequency")
    }
}

/// Amplitude of the uniform noise added after each epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub points: Vec<(usize, f64)>,
}

impl NoiseSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn linear(start: f64, epochs: usize) -> Self {
        Self {
            points: vec![(0, start), (epochs, 0.0)],
        }
    }

    pub fn at(&self, epoch: usize) -> f64 {
        piecewise(&self.points, epoch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Ok(());
        }
        check_points(&self.points, "noise")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub lr: LrSchedule,
    pub freq: FreqSchedule,
    #[serde(default)]
    pub noise: NoiseSchedule,
}

impl ScheduleSpec {
    pub fn constant(lr: f64, freq: usize) -> Self {
        Self {
            lr: LrSchedule::Constant { lr },
            freq: FreqSchedule::constant(freq),
            noise: NoiseSchedule::none(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lr.validate()?;
        self.freq.validate()?;
        self.noise.validate()
    }
}
