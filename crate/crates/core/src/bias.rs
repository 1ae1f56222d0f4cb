//! Monte Carlo study of the operator estimator's finite-sample bias, and the
//! marginal-equivalence demonstration for two processes with equal
//! stationary covariance but different dynamics.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{default_epsilon, DynamicsState};
use crate::error::{ChasmError, Result};
use crate::spectrum::{dominant_eigenvalues, wasserstein2_sq};
use crate::synthetic::{matrix_rows, replication_rng, rotation_transition, NoiseSpec, VarModel};

/// Minimum replication count.
pub const MIN_MC: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasExperiment {
    /// True transition, row-major.
    #[serde(default = "default_theta")]
    pub theta: Vec<Vec<f64>>,
    /// Gaussian innovation covariance, row-major.
    #[serde(default = "default_noise")]
    pub noise: Vec<Vec<f64>>,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

fn default_theta() -> Vec<Vec<f64>> {
    vec![vec![0.95, 0.0], vec![0.0, 0.9]]
}

fn default_noise() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}

fn default_rhos() -> Vec<f64> {
    vec![1.0, 0.99, 0.95]
}

fn default_checkpoints() -> Vec<usize> {
    vec![250, 500, 1000, 2000, 4000]
}

fn default_n_mc() -> usize {
    5000
}

impl Default for BiasExperiment {
    fn default() -> Self {
        Self {
            theta: default_theta(),
            noise: default_noise(),
            rhos: default_rhos(),
            checkpoints: default_checkpoints(),
            n_mc: default_n_mc(),
            seed: 0,
            epsilon: None,
        }
    }
}

fn square(name: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(ChasmError::invalid(name, "must be a non-empty square matrix"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl BiasExperiment {
    pub fn validate(&self) -> Result<()> {
        self.model()?;
        if self.rhos.is_empty() {
            return Err(ChasmError::invalid("rhos", "at least one forgetting factor needed"));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(ChasmError::invalid("rhos", format!("{r} is outside (0, 1]")));
        }
        if self.checkpoints.is_empty() || self.checkpoints[0] == 0 {
            return Err(ChasmError::invalid("checkpoints", "must be non-empty and positive"));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ChasmError::invalid("checkpoints", "must be strictly increasing"));
        }
        if self.n_mc < MIN_MC {
            return Err(ChasmError::invalid("n_mc", format!("{} is below {MIN_MC}", self.n_mc)));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(ChasmError::invalid("epsilon", format!("{eps} must be positive")));
            }
        }
        Ok(())
    }

    /// The change-free model, long enough for the last checkpoint.
    pub fn model(&self) -> Result<VarModel> {
        let theta = square("theta", &self.theta)?;
        let noise = square("noise", &self.noise)?;
        if noise.nrows() != theta.nrows() {
            return Err(ChasmError::DimensionMismatch { expected: theta.nrows(), got: noise.nrows() });
        }
        let length = self.checkpoints.last().copied().unwrap_or(0) + 1;
        VarModel::stationary(theta, NoiseSpec::gaussian(noise)?, length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub rho: f64,
    pub n: usize,
    /// Spectral norm of `mean(Θₙ) - Θ`.
    pub bias_norm: f64,
    /// Frobenius norm of the entrywise standard errors of `mean(Θₙ)`.
    pub stderr: f64,
}

/// Runs every replication on one stream shared by all forgetting factors;
/// the table is ordered by `rhos` then `checkpoints`.
pub fn run_bias(exp: &BiasExperiment) -> Result<Vec<BiasPoint>> {
    exp.validate()?;
    let model = exp.model()?;
    let d = model.dim();
    let eps = exp.epsilon.unwrap_or_else(|| default_epsilon(d));
    let n_cells = exp.rhos.len() * exp.checkpoints.len();

    // Each replication yields one flattened Θₙ per (ρ, checkpoint) cell.
    let per_rep: Vec<Vec<f64>> = (0..exp.n_mc)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut rng = replication_rng(exp.seed, i as u64);
            let mut states = exp
                .rhos
                .iter()
                .map(|&rho| DynamicsState::new(d, rho, eps))
                .collect::<Result<Vec<_>>>()?;
            let mut out = vec![0.0; n_cells * d * d];
            let mut next_cp = 0;
            for x in model.simulator(&mut rng)? {
                for s in &mut states {
                    s.update(&x)?;
                }
                let n = states[0].step() as usize;
                if next_cp < exp.checkpoints.len() && n == exp.checkpoints[next_cp] {
                    for (k, s) in states.iter().enumerate() {
                        let cell = k * exp.checkpoints.len() + next_cp;
                        out[cell * d * d..(cell + 1) * d * d].copy_from_slice(s.theta().as_slice());
                    }
                    next_cp += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let truth = model.theta0();
    let n_mc = exp.n_mc as f64;
    let mut table = Vec::with_capacity(n_cells);
    for (k, &rho) in exp.rhos.iter().enumerate() {
        for (c, &n) in exp.checkpoints.iter().enumerate() {
            let cell = k * exp.checkpoints.len() + c;
            let range = cell * d * d..(cell + 1) * d * d;
            let mut sum = vec![0.0; d * d];
            for rep in &per_rep {
                for (acc, v) in sum.iter_mut().zip(&rep[range.clone()]) {
                    *acc += v;
                }
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / n_mc).collect();
            let mut sq = vec![0.0; d * d];
            for rep in &per_rep {
                for ((acc, v), m) in sq.iter_mut().zip(&rep[range.clone()]).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
            let stderr = sq.iter().map(|s| s / (n_mc - 1.0) / n_mc).sum::<f64>().sqrt();
            let deviation = DMatrix::from_column_slice(d, d, &mean) - truth;
            let bias_norm = deviation.singular_values().max();
            table.push(BiasPoint { rho, n, bias_norm, stderr });
        }
    }
    Ok(table)
}

/// Least-squares slope of `ln(bias_norm)` against `ln(n)`.
pub fn log_log_slope(points: &[BiasPoint]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.bias_norm.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub theta: f64,
    pub length: usize,
    pub n_mc: usize,
    /// `(1 - θ²)⁻¹`.
    pub theoretical_variance: f64,
    pub diagonal_covariance: Vec<Vec<f64>>,
    pub rotation_covariance: Vec<Vec<f64>>,
    pub diagonal_spectrum: Vec<(f64, f64)>,
    pub rotation_spectrum: Vec<(f64, f64)>,
    /// Root-mean-square distance between the optimally matched spectra.
    pub spectral_separation: f64,
}

impl EquivalenceReport {
    /// Largest relative deviation of either sample covariance from
    /// `(1 - θ²)⁻¹ I`, measured entrywise against the theoretical variance.
    pub fn max_relative_covariance_error(&self) -> f64 {
        let v = self.theoretical_variance;
        [&self.diagonal_covariance, &self.rotation_covariance]
            .iter()
            .flat_map(|m| {
                m.iter().enumerate().flat_map(move |(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(move |(j, x)| (x - if i == j { v } else { 0.0 }).abs() / v)
                })
            })
            .fold(0.0, f64::max)
    }
}

fn sample_covariance(stream: &[Vec<f64>]) -> DMatrix<f64> {
    let d = stream[0].len();
    let n = stream.len() as f64;
    let mut mean = vec![0.0; d];
    for x in stream {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for x in stream {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (x[i] - mean[i]) * (x[j] - mean[j]);
            }
        }
    }
    cov / (n - 1.0)
}

fn estimated_spectrum(stream: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    let d = stream[0].len();
    let mut est = DynamicsState::new(d, 1.0, default_epsilon(d))?;
    for x in stream {
        est.update(x)?;
    }
    dominant_eigenvalues(est.theta(), d)
}

/// `diag(θ, θ)` and the rotation by `θ·i` share the stationary covariance
/// `(1 - θ²)⁻¹ I₂` under unit Gaussian noise but have different spectra.
/// Covariances are averaged over `n_mc` streams; spectra come from the
/// first stream.
pub fn marginal_equivalence_demo<R: Rng + ?Sized>(
    theta: f64,
    length: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<EquivalenceReport> {
    if !(theta.abs() < 1.0) {
        return Err(ChasmError::invalid("theta", format!("|{theta}| must be below 1")));
    }
    if length < 3 || n_mc == 0 {
        return Err(ChasmError::invalid("length", "need at least 3 observations and one run"));
    }
    let noise = NoiseSpec::gaussian(DMatrix::identity(2, 2))?;
    let diag = VarModel::stationary(DMatrix::from_diagonal_element(2, 2, theta), noise.clone(), length)?;
    let rot = VarModel::stationary(rotation_transition(0.0, theta)?, noise, length)?;

    let mut cov_d = DMatrix::zeros(2, 2);
    let mut cov_r = DMatrix::zeros(2, 2);
    let mut spectra = None;
    for _ in 0..n_mc {
        let sd = diag.simulate(&mut *rng)?;
        let sr = rot.simulate(&mut *rng)?;
        cov_d += sample_covariance(&sd) / n_mc as f64;
        cov_r += sample_covariance(&sr) / n_mc as f64;
        if spectra.is_none() {
            spectra = Some((estimated_spectrum(&sd)?, estimated_spectrum(&sr)?));
        }
    }
    let (spec_d, spec_r) = spectra.expect("n_mc ≥ 1");
    let separation = wasserstein2_sq(&spec_d, &spec_r)?.sqrt();
    let pairs = |s: &[Complex64]| s.iter().map(|z| (z.re, z.im)).collect();
    Ok(EquivalenceReport {
        theta,
        length,
        n_mc,
        theoretical_variance: 1.0 / (1.0 - theta * theta),
        diagonal_covariance: matrix_rows(&cov_d),
        rotation_covariance: matrix_rows(&cov_r),
        diagonal_spectrum: pairs(&spec_d),
        rotation_spectrum: pairs(&spec_r),
        spectral_separation: separation,
    })
}
