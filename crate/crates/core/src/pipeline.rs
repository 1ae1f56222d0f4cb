//! End-to-end detector: operator update, truncated spectrum, alignment,
//! spectral velocity, MEWMA chart and thresholding.

use std::collections::VecDeque;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dynamics::{default_epsilon, DynamicsState};
use crate::error::{ChasmError, Result};
use crate::mewma::{MewmaState, MomentEstimator, DEFAULT_RIDGE};
use crate::spectrum::{dominant_eigenvalues, AlignedSpectrum};

fn default_grace() -> u64 {
    100
}

fn default_burn_in() -> u64 {
    50
}

fn default_lag() -> usize {
    1
}

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

/// Detector parameters. `epsilon` defaults to `1e-6 · (lag · d)` when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub rho: f64,
    pub rank: usize,
    pub alpha: f64,
    pub threshold: f64,
    #[serde(default = "default_grace")]
    pub grace: u64,
    /// Velocities after each (re)start kept out of the chart's moment
    /// estimates.
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    #[serde(default = "default_lag")]
    pub lag: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default)]
    pub restart: bool,
    #[serde(default)]
    pub moments: MomentEstimator,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            rank: 2,
            alpha: 0.18,
            threshold: 15.0,
            grace: default_grace(),
            burn_in: default_burn_in(),
            lag: default_lag(),
            epsilon: None,
            ridge: DEFAULT_RIDGE,
            restart: false,
            moments: MomentEstimator::default(),
        }
    }
}

/// (α, h) pairs searched on synthetic data.
pub const SYNTHETIC_ALPHA_THRESHOLD: [(f64, f64); 20] = [
    (0.08, 8.0),
    (0.08, 10.0),
    (0.09, 10.0),
    (0.09, 12.0),
    (0.10, 10.0),
    (0.10, 12.0),
    (0.12, 12.0),
    (0.12, 14.0),
    (0.15, 14.0),
    (0.15, 15.0),
    (0.18, 15.0),
    (0.18, 18.0),
    (0.20, 18.0),
    (0.20, 20.0),
    (0.25, 20.0),
    (0.25, 22.0),
    (0.30, 25.0),
    (0.30, 28.0),
    (0.35, 25.0),
    (0.35, 28.0),
];

/// Forgetting factors searched on synthetic data.
pub const SYNTHETIC_RHOS: [f64; 4] = [0.95, 0.98, 0.99, 1.0];

impl DetectorConfig {
    /// Reject out-of-range parameters for a stream of dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(ChasmError::invalid("dim", "must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(ChasmError::invalid("rho", format!("{} is outside (0, 1]", self.rho)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ChasmError::invalid(
                "alpha",
                format!("{} is outside (0, 1)", self.alpha),
            ));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(ChasmError::invalid(
                "threshold",
                format!("{} must be finite and positive", self.threshold),
            ));
        }
        if self.lag == 0 {
            return Err(ChasmError::invalid("lag", "must be at least 1"));
        }
        let stacked = self.lag * dim;
        if self.rank == 0 || self.rank > stacked {
            return Err(ChasmError::invalid(
                "rank",
                format!("{} is outside 1..={stacked} (lag · dim)", self.rank),
            ));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(ChasmError::invalid("epsilon", format!("{eps} must be positive")));
            }
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(ChasmError::invalid("ridge", format!("{} must be positive", self.ridge)));
        }
        Ok(())
    }

    /// The synthetic-benchmark grid: every forgetting factor crossed with
    /// every (α, h) pair at rank 2.
    pub fn synthetic_grid() -> Vec<DetectorConfig> {
        SYNTHETIC_RHOS
            .iter()
            .flat_map(|&rho| {
                SYNTHETIC_ALPHA_THRESHOLD
                    .iter()
                    .map(move |&(alpha, threshold)| DetectorConfig {
                        rho,
                        rank: 2,
                        alpha,
                        threshold,
                        ..DetectorConfig::default()
                    })
            })
            .collect()
    }
}

/// Per-observation output of the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    /// Zero-based index of the observation in the stream.
    pub t: u64,
    /// `D²ₙ`, absent while no velocity is available.
    pub statistic: Option<f64>,
    pub alarm: bool,
    /// Number of restarts before this observation.
    pub segment: u64,
}

/// Streaming companion-form stacker: emits `(x_t, x_{t-1}, …, x_{t-p+1})`
/// once `p` observations have been seen.
#[derive(Debug, Clone, PartialEq)]
pub struct LagStacker {
    lag: usize,
    window: VecDeque<Vec<f64>>,
}

impl LagStacker {
    pub fn new(lag: usize) -> Result<Self> {
        if lag == 0 {
            return Err(ChasmError::invalid("lag", "must be at least 1"));
        }
        Ok(Self {
            lag,
            window: VecDeque::with_capacity(lag),
        })
    }

    pub fn push(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        if self.lag == 1 {
            return Some(x.to_vec());
        }
        if self.window.len() == self.lag {
            self.window.pop_back();
        }
        self.window.push_front(x.to_vec());
        (self.window.len() == self.lag).then(|| self.window.iter().flatten().copied().collect())
    }

    pub fn clear(&mut self) {
        self.window.clear();
    }
}

/// Batch form of [`LagStacker`].
pub fn stack_lags<V: AsRef<[f64]>>(stream: &[V], lag: usize) -> Result<Vec<Vec<f64>>> {
    let mut stacker = LagStacker::new(lag)?;
    Ok(stream
        .iter()
        .filter_map(|x| stacker.push(x.as_ref()))
        .collect())
}

/// A running detector bound to one stream.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    dim: usize,
    epsilon: f64,
    stacker: LagStacker,
    dynamics: DynamicsState,
    chart: MewmaState,
    spectrum: Option<AlignedSpectrum>,
    next_t: u64,
    segment: u64,
    segment_start: u64,
    stopped: bool,
}

/// Result of [`Detector::run`]. When `error` is set the records cover the
/// prefix of the stream processed before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub records: Vec<DetectionRecord>,
    pub alarms: Vec<u64>,
    pub error: Option<ChasmError>,
}

impl Detector {
    pub fn new(dim: usize, config: DetectorConfig) -> Result<Self> {
        config.validate(dim)?;
        let stacked = dim * config.lag;
        let epsilon = config.epsilon.unwrap_or_else(|| default_epsilon(stacked));
        Ok(Self {
            dim,
            epsilon,
            stacker: LagStacker::new(config.lag)?,
            dynamics: DynamicsState::new(stacked, config.rho, epsilon)?,
            chart: MewmaState::new(config.rank, config.alpha, config.ridge, config.moments)?
                .with_burn_in(config.burn_in),
            spectrum: None,
            next_t: 0,
            segment: 0,
            segment_start: 0,
            stopped: false,
            config,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dynamics(&self) -> &DynamicsState {
        &self.dynamics
    }

    pub fn chart(&self) -> &MewmaState {
        &self.chart
    }

    pub fn spectrum(&self) -> Option<&AlignedSpectrum> {
        self.spectrum.as_ref()
    }

    /// Process one observation.
    pub fn step(&mut self, x: &[f64]) -> Result<DetectionRecord> {
        if x.len() != self.dim {
            return Err(ChasmError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ChasmError::NonFinite("observation"));
        }
        let t = self.next_t;
        self.next_t += 1;
        let mut record = DetectionRecord {
            t,
            statistic: None,
            alarm: false,
            segment: self.segment,
        };

        let Some(state) = self.stacker.push(x) else {
            return Ok(record);
        };
        self.dynamics.update(&state)?;
        if self.dynamics.step() == 0 {
            return Ok(record);
        }

        let raw = match dominant_eigenvalues(self.dynamics.theta(), self.config.rank) {
            Ok(raw) => raw,
            Err(ChasmError::EigenFailure) => {
                warn!("t={t}: eigensolver failed, keeping previous spectrum");
                return Ok(record);
            }
            Err(e) => return Err(e),
        };
        let Some(prev) = self.spectrum.as_ref() else {
            self.spectrum = Some(AlignedSpectrum::cold_start(raw)?);
            return Ok(record);
        };
        let aligned = prev.align(&raw)?;
        let velocity = prev.velocity_to(&aligned);
        self.spectrum = Some(aligned);

        self.chart.ingest(&velocity)?;
        if self.chart.samples() < 2 {
            return Ok(record);
        }
        let stat = self.chart.statistic()?;
        record.statistic = Some(stat);

        if stat > self.config.threshold && !self.stopped {
            if t > self.segment_start + self.config.grace {
                record.alarm = true;
                if self.config.restart {
                    self.restart(t + 1)?;
                } else {
                    self.stopped = true;
                }
            } else {
                log::debug!("t={t}: alarm suppressed inside grace window");
            }
        }
        Ok(record)
    }

    /// Fold [`step`](Self::step) over a whole stream.
    pub fn run<V: AsRef<[f64]>>(&mut self, stream: &[V]) -> RunOutcome {
        let mut out = RunOutcome {
            records: Vec::with_capacity(stream.len()),
            alarms: Vec::new(),
            error: None,
        };
        for x in stream {
            match self.step(x.as_ref()) {
                Ok(rec) => {
                    if rec.alarm {
                        out.alarms.push(rec.t);
                    }
                    out.records.push(rec);
                }
                Err(e) => {
                    out.error = Some(e);
                    break;
                }
            }
        }
        out
    }

    /// First alarm time over a stream, without retaining per-step records.
    pub fn first_alarm<V: AsRef<[f64]>>(&mut self, stream: &[V]) -> Result<Option<u64>> {
        for x in stream {
            let rec = self.step(x.as_ref())?;
            if rec.alarm {
                return Ok(Some(rec.t));
            }
        }
        Ok(None)
    }

    fn restart(&mut self, segment_start: u64) -> Result<()> {
        self.segment += 1;
        self.segment_start = segment_start;
        self.stacker.clear();
        self.dynamics = DynamicsState::new(self.dim * self.config.lag, self.config.rho, self.epsilon)?;
        self.chart.reset();
        self.spectrum = None;
        Ok(())
    }
}
