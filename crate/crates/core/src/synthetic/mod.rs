//! Seeded generators for the synthetic VAR(1) benchmark data sets.
//!
//! Every replication draws its own transitions, covariance and change time
//! from an RNG derived from `(seed, replication index)`, so data sets are
//! reproducible and can be generated in parallel.
//!
//! Streams start in the stationary distribution of the pre-change regime:
//! `x₀ ~ N(0, Γ)` with `Γ = Θ₀ Γ Θ₀ᵀ + Cov(ε)`.

mod noise;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChasmError, Result};

pub use noise::{
    draw_noise, laplace_quantile, std_normal_cdf, NoiseKind, NoiseSampler, NoiseSpec,
    HUBER_OUTLIER_STD,
};

/// Length of change-containing sequences.
pub const ARL1_LENGTH: usize = 400;
/// Length of change-free sequences.
pub const ARL0_LENGTH: usize = 10_000;
/// Replications per data set in the full benchmark.
pub const DEFAULT_REPLICATIONS: usize = 1000;
/// Degrees of freedom, one per bin.
pub const STUDENT_NU_BINS: [f64; 10] = [3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 30.0];
/// Contamination levels, one per bin.
pub const HUBER_EPS_BINS: [f64; 10] = [0.0, 0.01, 0.02, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.40];
/// Ambient dimensions, one per bin.
pub const DIMENSION_BINS: [usize; 10] = [2, 4, 6, 10, 15, 20, 25, 30, 35, 40];
/// Condition-number bound of the similarity transform in the full-rank set.
pub const KAPPA_MAX: f64 = 15.0;
/// Monte Carlo sample size behind the sparse set's minimum change size.
pub const D_LOW_SAMPLES: usize = 1_000_000;
const D_LOW_SEED: u64 = 0x5eed_d10e;
const LYAPUNOV_TOL: f64 = 1e-12;

/// Point in the unit disk from `u ∈ [0, 1]` and angle `phi`: radius `√u`.
pub fn disk_point(u: f64, phi: f64) -> (f64, f64) {
    let r = u.sqrt();
    (r * phi.cos(), r * phi.sin())
}

/// Uniform draw from the unit disk.
pub fn sample_unit_disk<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u: f64 = rng.random();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    disk_point(u, phi)
}

/// Real canonical form of multiplication by `a + bi`.
pub fn rotation_transition(a: f64, b: f64) -> Result<DMatrix<f64>> {
    if !(a * a + b * b < 1.0) {
        return Err(ChasmError::invalid(
            "eigenvalue",
            format!("|{a} + {b}i| is not inside the unit disk"),
        ));
    }
    Ok(DMatrix::from_row_slice(2, 2, &[a, -b, b, a]))
}

/// `SᵀS + 1e-9 I` with `S` having i.i.d. `Uniform(-1, 1)` entries.
pub fn random_noise_covariance<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let unif = Uniform::new(-1.0, 1.0).expect("valid bounds");
    let s = DMatrix::from_fn(dim, dim, |_, _| unif.sample(rng));
    let mut sigma = s.transpose() * &s;
    for i in 0..dim {
        sigma[(i, i)] += 1e-9;
    }
    sigma
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ChasmError::NonFinite("transition"));
    }
    let eig = m.complex_eigenvalues();
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Solves `Γ = Θ Γ Θᵀ + Σ` by the doubling iteration
/// `Γ ← Γ + A Γ Aᵀ, A ← A²`, which sums the series `Σ_k Θᵏ Σ Θᵏᵀ`.
pub fn stationary_covariance(theta: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if spectral_radius(theta)? >= 1.0 {
        return Err(ChasmError::invalid("transition", "spectral radius must be below 1"));
    }
    let mut gamma = sigma.clone();
    let mut a = theta.clone();
    for _ in 0..64 {
        let incr = &a * &gamma * a.transpose();
        gamma += &incr;
        a = &a * &a;
        if incr.abs().max() <= LYAPUNOV_TOL * gamma.abs().max().max(f64::MIN_POSITIVE) {
            return Ok((&gamma + gamma.transpose()) * 0.5);
        }
    }
    Err(ChasmError::invalid("transition", "Lyapunov iteration did not converge"))
}

/// A VAR(1) process with an optional single change in its transition.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    theta0: DMatrix<f64>,
    theta1: DMatrix<f64>,
    noise: NoiseSpec,
    tau: Option<usize>,
    length: usize,
}

impl VarModel {
    /// Rows `t ≥ tau` are generated with `theta1`. Without `tau` the process
    /// stays in `theta0` throughout.
    pub fn new(
        theta0: DMatrix<f64>,
        theta1: DMatrix<f64>,
        noise: NoiseSpec,
        tau: Option<usize>,
        length: usize,
    ) -> Result<Self> {
        let d = noise.dim();
        for (name, m) in [("theta0", &theta0), ("theta1", &theta1)] {
            if m.nrows() != d || m.ncols() != d {
                return Err(ChasmError::DimensionMismatch { expected: d, got: m.nrows() });
            }
            let radius = spectral_radius(m)?;
            if !(radius < 1.0) {
                return Err(ChasmError::invalid(name, format!("spectral radius {radius} ≥ 1")));
            }
        }
        if let Some(tau) = tau {
            let (lo, hi) = change_range(length);
            if tau < lo || tau > hi {
                return Err(ChasmError::invalid(
                    "tau",
                    format!("{tau} is outside [{lo}, {hi}] for length {length}"),
                ));
            }
        }
        Ok(Self { theta0, theta1, noise, tau, length })
    }

    /// Change-free model.
    pub fn stationary(theta: DMatrix<f64>, noise: NoiseSpec, length: usize) -> Result<Self> {
        Self::new(theta.clone(), theta, noise, None, length)
    }

    pub fn dim(&self) -> usize {
        self.noise.dim()
    }

    pub fn theta0(&self) -> &DMatrix<f64> {
        &self.theta0
    }

    pub fn theta1(&self) -> &DMatrix<f64> {
        &self.theta1
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn tau(&self) -> Option<usize> {
        self.tau
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Streaming generator over the `length` rows.
    pub fn simulator<R: Rng>(&self, rng: R) -> Result<VarSimulator<'_, R>> {
        let gamma = stationary_covariance(&self.theta0, &self.noise.innovation_covariance())?;
        Ok(VarSimulator {
            model: self,
            sampler: self.noise.sampler()?,
            start_factor: noise::psd_factor(&gamma)?,
            rng,
            t: 0,
            x: DVector::zeros(self.dim()),
        })
    }

    /// All rows of one realization.
    pub fn simulate<R: Rng>(&self, rng: R) -> Result<Vec<Vec<f64>>> {
        Ok(self.simulator(rng)?.collect())
    }
}

/// Inclusive range of admissible change times for a stream of `length`.
pub fn change_range(length: usize) -> (usize, usize) {
    (length * 3 / 10, length * 7 / 10)
}

/// Row-by-row simulation of a [`VarModel`].
pub struct VarSimulator<'a, R> {
    model: &'a VarModel,
    sampler: NoiseSampler,
    start_factor: DMatrix<f64>,
    rng: R,
    t: usize,
    x: DVector<f64>,
}

impl<R: Rng> Iterator for VarSimulator<'_, R> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.t >= self.model.length {
            return None;
        }
        self.x = if self.t == 0 {
            let g = DVector::from_fn(self.model.dim(), |_, _| StandardNormal.sample(&mut self.rng));
            &self.start_factor * g
        } else {
            let theta = match self.model.tau {
                Some(tau) if self.t >= tau => &self.model.theta1,
                _ => &self.model.theta0,
            };
            theta * &self.x + self.sampler.draw(&mut self.rng)
        };
        self.t += 1;
        Some(self.x.as_slice().to_vec())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.model.length - self.t;
        (left, Some(left))
    }
}

/// The six benchmark data sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Gaussian,
    Laplace,
    StudentT,
    Huber,
    Sparse,
    FullRank,
}

impl Dataset {
    pub const ALL: [Dataset; 6] = [
        Dataset::Gaussian,
        Dataset::Laplace,
        Dataset::StudentT,
        Dataset::Huber,
        Dataset::Sparse,
        Dataset::FullRank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Gaussian => "gaussian",
            Dataset::Laplace => "laplace",
            Dataset::StudentT => "student_t",
            Dataset::Huber => "huber",
            Dataset::Sparse => "sparse",
            Dataset::FullRank => "full_rank",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = ChasmError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match key.as_str() {
            "gaussian" => Ok(Dataset::Gaussian),
            "laplace" => Ok(Dataset::Laplace),
            "student_t" | "student" | "t" => Ok(Dataset::StudentT),
            "huber" | "huber_eps" | "huber_epsilon" => Ok(Dataset::Huber),
            "sparse" | "high_dim_sparse" => Ok(Dataset::Sparse),
            "full_rank" | "fullrank" | "full" | "high_dim_full" => Ok(Dataset::FullRank),
            _ => Err(ChasmError::invalid(
                "dataset",
                format!(
                    "unknown data set `{s}` (expected one of gaussian, laplace, student_t, \
                     huber, sparse, full_rank)"
                ),
            )),
        }
    }
}

/// With a change (`arl1`, T = 400) or without (`arl0`, T = 10 000).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Arl1,
    Arl0,
}

impl Variant {
    pub fn length(self) -> usize {
        match self {
            Variant::Arl1 => ARL1_LENGTH,
            Variant::Arl0 => ARL0_LENGTH,
        }
    }
}

impl FromStr for Variant {
    type Err = ChasmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arl1" => Ok(Variant::Arl1),
            "arl0" => Ok(Variant::Arl0),
            _ => Err(ChasmError::invalid("variant", format!("`{s}` (expected arl1 or arl0)"))),
        }
    }
}

/// Bin label of a replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bin {
    Nu(f64),
    Eps(f64),
    Dim(usize),
}

/// Bin index of replication `index` out of `n_reps`, splitting into ten
/// equal groups.
pub fn bin_index(index: usize, n_reps: usize) -> usize {
    (index * 10 / n_reps.max(1)).min(9)
}

/// One generated sequence plus the model that produced it.
#[derive(Debug, Clone)]
pub struct Replication {
    pub index: usize,
    pub bin: Option<Bin>,
    pub model: VarModel,
    pub stream: Vec<Vec<f64>>,
}

/// RNG of replication `index` under master `seed`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_tau<R: Rng + ?Sized>(variant: Variant, rng: &mut R) -> Option<usize> {
    match variant {
        Variant::Arl1 => {
            let (lo, hi) = change_range(variant.length());
            Some(rng.random_range(lo..=hi))
        }
        Variant::Arl0 => None,
    }
}

fn stable_disk_rotation<R: Rng + ?Sized>(rng: &mut R) -> DMatrix<f64> {
    loop {
        let (a, b) = sample_unit_disk(rng);
        if a * a + b * b <= 1.0 - 1e-9 {
            return rotation_transition(a, b).expect("inside the disk");
        }
    }
}

/// Bivariate model with rotation-form transitions drawn from the disk.
/// `arl0` models keep `Θ₀` throughout.
pub fn make_bivariate_model<R: Rng + ?Sized>(
    kind: NoiseKind,
    variant: Variant,
    rng: &mut R,
) -> Result<VarModel> {
    let theta0 = stable_disk_rotation(rng);
    let theta1 = stable_disk_rotation(rng);
    let covariance = match kind {
        NoiseKind::Huber { .. } => DMatrix::identity(2, 2),
        _ => random_noise_covariance(2, rng),
    };
    let tau = draw_tau(variant, rng);
    let theta1 = if tau.is_some() { theta1 } else { theta0.clone() };
    VarModel::new(theta0, theta1, NoiseSpec::new(kind, covariance)?, tau, variant.length())
}

/// `bivariate data set` for one noise family: `n_reps` sequences.
pub fn make_bivariate_dataset(
    kind: NoiseKind,
    n_reps: usize,
    variant: Variant,
    seed: u64,
) -> Result<Vec<Replication>> {
    (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = replication_rng(seed, i as u64);
            let model = make_bivariate_model(kind, variant, &mut rng)?;
            let stream = model.simulate(&mut rng)?;
            Ok(Replication { index: i, bin: None, model, stream })
        })
        .collect()
}

/// 90th percentile of `|z₁ - z₀|` for independent uniform points in the
/// unit disk, from a fixed-seed Monte Carlo sample; computed once.
pub fn sparse_change_threshold() -> f64 {
    static D_LOW: OnceLock<f64> = OnceLock::new();
    *D_LOW.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(D_LOW_SEED);
        let mut dist: Vec<f64> = (0..D_LOW_SAMPLES)
            .map(|_| {
                let (a0, b0) = sample_unit_disk(&mut rng);
                let (a1, b1) = sample_unit_disk(&mut rng);
                (a1 - a0).hypot(b1 - b0)
            })
            .collect();
        let k = (0.9 * D_LOW_SAMPLES as f64).ceil() as usize - 1;
        let (_, kth, _) = dist.select_nth_unstable_by(k, f64::total_cmp);
        *kth
    })
}

fn embed_rotation(dim: usize, i: usize, j: usize, a: f64, b: f64) -> DMatrix<f64> {
    let mut theta = DMatrix::zeros(dim, dim);
    theta[(i, i)] = a;
    theta[(j, j)] = a;
    theta[(i, j)] = -b;
    theta[(j, i)] = b;
    theta
}

/// A bivariate rotation embedded at two random coordinates of a
/// `dim`-dimensional process; the remaining coordinates are pure noise.
/// Pre- and post-change eigenvalues are at least [`sparse_change_threshold`]
/// apart.
pub fn make_sparse_highdim<R: Rng + ?Sized>(
    dim: usize,
    variant: Variant,
    rng: &mut R,
) -> Result<VarModel> {
    if dim < 2 {
        return Err(ChasmError::invalid("dim", "sparse embedding needs at least 2 dimensions"));
    }
    let d_low = sparse_change_threshold();
    let mut coords: Vec<usize> = (0..dim).collect();
    coords.shuffle(rng);
    let (i, j) = (coords[0], coords[1]);
    let (z0, z1) = loop {
        let z0 = sample_unit_disk(rng);
        let z1 = sample_unit_disk(rng);
        let stable = |(a, b): (f64, f64)| a * a + b * b <= 1.0 - 1e-9;
        if stable(z0) && stable(z1) && (z1.0 - z0.0).hypot(z1.1 - z0.1) >= d_low {
            break (z0, z1);
        }
    };
    let theta0 = embed_rotation(dim, i, j, z0.0, z0.1);
    let theta1 = embed_rotation(dim, i, j, z1.0, z1.1);
    let sigma = random_noise_covariance(dim, rng);
    let tau = draw_tau(variant, rng);
    let theta1 = if tau.is_some() { theta1 } else { theta0.clone() };
    VarModel::new(theta0, theta1, NoiseSpec::gaussian(sigma)?, tau, variant.length())
}

/// Random invertible matrix `U diag(s) Vᵀ` with singular values clipped
/// below `s_max / KAPPA_MAX`.
pub fn bounded_condition_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let svd = g.svd(true, true);
    let s_max = svd.singular_values.max();
    let clipped = svd.singular_values.map(|s| s.max(s_max / KAPPA_MAX));
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    u * DMatrix::from_diagonal(&clipped) * v_t
}

/// Block-diagonal real canonical form with `n_pairs` rotation blocks drawn
/// from the disk (positive imaginary part) and real eigenvalues for the rest.
pub fn random_canonical_form<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let n_pairs = rng.random_range(0..=dim / 2);
    let n_real = dim - 2 * n_pairs;
    let mut dc = DMatrix::zeros(dim, dim);
    let draw = |rng: &mut R| loop {
        let (a, b) = sample_unit_disk(rng);
        if a * a + b * b <= 1.0 - 1e-9 {
            break (a, b);
        }
    };
    for k in 0..n_real {
        dc[(k, k)] = draw(rng).0;
    }
    for p in 0..n_pairs {
        let (a, b) = draw(rng);
        let b = b.abs();
        let k = n_real + 2 * p;
        dc[(k, k)] = a;
        dc[(k + 1, k + 1)] = a;
        dc[(k, k + 1)] = -b;
        dc[(k + 1, k)] = b;
    }
    dc
}

/// `P D_c P⁻¹` with a random canonical form and a bounded-condition `P`.
pub fn random_fullrank_transition<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let dc = random_canonical_form(dim, rng);
        let p = bounded_condition_matrix(dim, rng);
        if let Some(p_inv) = p.clone().try_inverse() {
            let theta = &p * dc * p_inv;
            if spectral_radius(&theta).is_ok_and(|r| r < 1.0) {
                return theta;
            }
        }
    }
}

/// Dense full-rank transitions obtained by a similarity transform of a
/// random real canonical form.
pub fn make_fullrank_highdim<R: Rng + ?Sized>(
    dim: usize,
    variant: Variant,
    rng: &mut R,
) -> Result<VarModel> {
    if dim == 0 {
        return Err(ChasmError::invalid("dim", "must be at least 1"));
    }
    let theta0 = random_fullrank_transition(dim, rng);
    let theta1 = random_fullrank_transition(dim, rng);
    let sigma = random_noise_covariance(dim, rng);
    let tau = draw_tau(variant, rng);
    let theta1 = if tau.is_some() { theta1 } else { theta0.clone() };
    VarModel::new(theta0, theta1, NoiseSpec::gaussian(sigma)?, tau, variant.length())
}

/// Generate `n_reps` replications of `dataset`. Binned data sets split the
/// replications into ten equal groups.
pub fn make_dataset(
    dataset: Dataset,
    n_reps: usize,
    variant: Variant,
    seed: u64,
) -> Result<Vec<Replication>> {
    (0..n_reps)
        .into_par_iter()
        .map(|i| make_replication(dataset, i, n_reps, variant, seed))
        .collect()
}

/// Replication `index` of `dataset`; identical to the corresponding element
/// of [`make_dataset`].
pub fn make_replication(
    dataset: Dataset,
    index: usize,
    n_reps: usize,
    variant: Variant,
    seed: u64,
) -> Result<Replication> {
    let mut rng = replication_rng(seed, index as u64);
    let bin_idx = bin_index(index, n_reps);
    let (model, bin) = match dataset {
        Dataset::Gaussian => (make_bivariate_model(NoiseKind::Gaussian, variant, &mut rng)?, None),
        Dataset::Laplace => (
            make_bivariate_model(NoiseKind::LaplaceCopula, variant, &mut rng)?,
            None,
        ),
        Dataset::StudentT => {
            let nu = STUDENT_NU_BINS[bin_idx];
            (
                make_bivariate_model(NoiseKind::StudentT { nu }, variant, &mut rng)?,
                Some(Bin::Nu(nu)),
            )
        }
        Dataset::Huber => {
            let eps = HUBER_EPS_BINS[bin_idx];
            (
                make_bivariate_model(NoiseKind::Huber { eps }, variant, &mut rng)?,
                Some(Bin::Eps(eps)),
            )
        }
        Dataset::Sparse => {
            let dim = DIMENSION_BINS[bin_idx];
            (make_sparse_highdim(dim, variant, &mut rng)?, Some(Bin::Dim(dim)))
        }
        Dataset::FullRank => {
            let dim = DIMENSION_BINS[bin_idx];
            (make_fullrank_highdim(dim, variant, &mut rng)?, Some(Bin::Dim(dim)))
        }
    };
    let stream = model.simulate(&mut rng)?;
    Ok(Replication { index, bin, model, stream })
}

/// Row-major nested vectors, for manifests.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_point_examples() {
        let (a, b) = disk_point(0.25, 0.0);
        assert_eq!((a, b), (0.5, 0.0));
        let (a, b) = disk_point(1.0, std::f64::consts::PI);
        assert!((a + 1.0).abs() < 1e-15 && b.abs() < 1e-15);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(
            rotation_transition(0.7, 0.0).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.0, 0.7])
        );
        assert_eq!(
            rotation_transition(0.0, 0.7).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.0, -0.7, 0.7, 0.0])
        );
        assert!(rotation_transition(0.8, 0.6).is_err());
    }

    #[test]
    fn lyapunov_solution_satisfies_equation() {
        let theta = DMatrix::from_row_slice(2, 2, &[0.9, -0.3, 0.2, 0.5]);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let g = stationary_covariance(&theta, &sigma).unwrap();
        let resid = &g - (&theta * &g * theta.transpose() + &sigma);
        assert!(resid.abs().max() < 1e-10);
        let unstable = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(stationary_covariance(&unstable, &DMatrix::identity(1, 1)).is_err());
    }

    #[test]
    fn var_model_validation() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let noise = NoiseSpec::gaussian(eye.clone()).unwrap();
        let stable = &eye * 0.5;
        assert!(VarModel::new(eye.clone(), stable.clone(), noise.clone(), None, 10).is_err());
        assert!(VarModel::new(stable.clone(), stable.clone(), noise.clone(), Some(119), 400).is_err());
        assert!(VarModel::new(stable.clone(), stable.clone(), noise.clone(), Some(281), 400).is_err());
        assert!(VarModel::new(stable.clone(), stable.clone(), noise.clone(), Some(120), 400).is_ok());
        assert!(VarModel::new(stable.clone(), stable, noise, Some(280), 400).is_ok());
    }

    #[test]
    fn bins_are_even_groups() {
        let bins: Vec<usize> = (0..20).map(|i| bin_index(i, 20)).collect();
        assert_eq!(bins, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9]);
        assert_eq!((0..10).map(|i| bin_index(i, 10)).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn dataset_names_round_trip() {
        for d in Dataset::ALL {
            assert_eq!(d.name().parse::<Dataset>().unwrap(), d);
        }
        assert_eq!("High-dim sparse".parse::<Dataset>().unwrap(), Dataset::Sparse);
        assert!("cauchy".parse::<Dataset>().is_err());
    }

    #[test]
    fn sparse_model_structure() {
        let mut rng = replication_rng(3, 0);
        let m = make_sparse_highdim(6, Variant::Arl1, &mut rng).unwrap();
        let nonzero: Vec<(usize, usize)> = (0..6)
            .flat_map(|i| (0..6).map(move |j| (i, j)))
            .filter(|&(i, j)| m.theta0()[(i, j)] != 0.0)
            .collect();
        assert!(nonzero.len() <= 4);
        for &(i, j) in &nonzero {
            assert!(m.theta1()[(i, j)] != 0.0 || i == j);
        }
        assert!(m.theta1().iter().enumerate().all(|(k, &v)| {
            let (i, j) = (k % 6, k / 6);
            v == 0.0 || nonzero.contains(&(i, j))
        }));
    }
}
