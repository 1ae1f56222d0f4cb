//! Detection scoring: margin-based precision/recall/F1 and average run lengths.

use serde::{Deserialize, Serialize};

use crate::error::{ChasmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(default)]
    pub margin_left: usize,
    #[serde(default = "default_margin_right")]
    pub margin_right: usize,
    /// Length at which change-free runs without an alarm are censored.
    #[serde(default)]
    pub censor_at: Option<usize>,
}

fn default_margin_right() -> usize {
    50
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { margin_left: 0, margin_right: default_margin_right(), censor_at: None }
    }
}

impl EvalConfig {
    pub fn with_censoring(mut self, censor_at: usize) -> Self {
        self.censor_at = Some(censor_at);
        self
    }

    /// Whether `tau_hat` falls in `[tau - Δℓ, tau + Δr]`.
    pub fn within(&self, tau: usize, tau_hat: usize) -> bool {
        tau_hat + self.margin_left >= tau && tau_hat <= tau + self.margin_right
    }
}

/// Result of a single-change sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    /// Detected, but after the right margin.
    FalseNegativeLate,
    /// Never detected.
    FalseNegativeNone,
}

pub fn classify_single(tau: usize, tau_hat: Option<usize>, cfg: &EvalConfig) -> Outcome {
    match tau_hat {
        None => Outcome::FalseNegativeNone,
        Some(t) if t + cfg.margin_left < tau => Outcome::FalsePositive,
        Some(t) if t > tau + cfg.margin_right => Outcome::FalseNegativeLate,
        Some(_) => Outcome::TruePositive,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_late: usize,
    pub fn_none: usize,
}

impl OutcomeCounts {
    pub fn tally<'a>(outcomes: impl IntoIterator<Item = &'a Outcome>) -> Self {
        let mut c = Self::default();
        for o in outcomes {
            match o {
                Outcome::TruePositive => c.tp += 1,
                Outcome::FalsePositive => c.fp += 1,
                Outcome::FalseNegativeLate => c.fn_late += 1,
                Outcome::FalseNegativeNone => c.fn_none += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_late + self.fn_none
    }

    /// Sequences that raised any alarm.
    pub fn detections(&self) -> usize {
        self.tp + self.fp + self.fn_late
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub const ZERO: Prf = Prf { precision: 0.0, recall: 0.0, f1: 0.0 };

    fn from_ratios(tp: usize, n_detected: usize, n_true: usize) -> Self {
        let precision = if n_detected == 0 { 0.0 } else { tp as f64 / n_detected as f64 };
        let recall = if n_true == 0 { 0.0 } else { tp as f64 / n_true as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

/// `P = TP / n_d`, `R = TP / N`, with `n_d = TP + FP + FN_late` and `N` the
/// number of sequences.
pub fn prf_single(outcomes: &[Outcome]) -> Prf {
    prf_from_counts(&OutcomeCounts::tally(outcomes))
}

pub fn prf_from_counts(c: &OutcomeCounts) -> Prf {
    Prf::from_ratios(c.tp, c.detections(), c.total())
}

/// Multi-change scoring: a true change counts as found when any detection
/// lies within its margins. Detections may be shared between changes.
pub fn prf_multi(true_cps: &[usize], detections: &[usize], cfg: &EvalConfig) -> Prf {
    let tp = true_cps
        .iter()
        .filter(|&&tau| detections.iter().any(|&d| cfg.within(tau, d)))
        .count();
    Prf::from_ratios(tp, detections.len(), true_cps.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArlEstimate {
    pub value: f64,
    pub runs: usize,
    pub censored: usize,
}

impl ArlEstimate {
    pub fn censored_fraction(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.censored as f64 / self.runs as f64
        }
    }

    /// With censored runs the value is only a lower bound.
    pub fn is_lower_bound(&self) -> bool {
        self.censored > 0
    }
}

/// Mean first-alarm time over change-free runs; runs without an alarm count
/// as `censor_at`.
pub fn arl_in_control(first_alarms: &[Option<usize>], censor_at: usize) -> Result<ArlEstimate> {
    if first_alarms.is_empty() {
        return Err(ChasmError::invalid("run_lengths", "no runs to average"));
    }
    let mut sum = 0.0;
    let mut censored = 0;
    for a in first_alarms {
        match a {
            Some(t) => sum += *t as f64,
            None => {
                censored += 1;
                sum += censor_at as f64;
            }
        }
    }
    Ok(ArlEstimate { value: sum / first_alarms.len() as f64, runs: first_alarms.len(), censored })
}

/// Mean delay `τ̂ - τ` over true-positive runs only; `None` without any.
pub fn arl_delay(runs: &[(usize, Option<usize>)], cfg: &EvalConfig) -> Option<f64> {
    let delays: Vec<f64> = runs
        .iter()
        .filter_map(|&(tau, hat)| match (classify_single(tau, hat, cfg), hat) {
            (Outcome::TruePositive, Some(t)) => Some(t as f64 - tau as f64),
            _ => None,
        })
        .collect();
    if delays.is_empty() {
        None
    } else {
        Some(delays.iter().sum::<f64>() / delays.len() as f64)
    }
}
