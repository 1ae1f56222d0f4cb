//! Augmented complex MEWMA chart on spectral velocities.
//!
//! Velocities `v ∈ ℂʳ` are smoothed by `z ← (1-α) z + α v`. Their mean,
//! Hermitian covariance `Σ = E[(v-μ)(v-μ)ᴴ]` and pseudo-covariance
//! `Σ̃ = E[(v-μ)(v-μ)ᵀ]` are estimated online. The chart statistic is the
//! Mahalanobis distance of the augmented vector `(z, z̄)` under the augmented
//! covariance `βₙ [[Σ, Σ̃], [Σ̃̄, Σ̄]]`, evaluated through its Schur complement
//! so that only `r × r` systems are solved.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ChasmError, Result};

/// Default absolute diagonal loading.
pub const DEFAULT_RIDGE: f64 = 1e-8;
/// Diagonal loading relative to the mean velocity variance.
pub const RELATIVE_RIDGE: f64 = 1e-6;
/// Beyond this condition number the statistic is refused.
pub const CONDITION_LIMIT: f64 = 1e13;
/// Negative statistics above this value are treated as round-off and clamped.
pub const NEGATIVE_TOLERANCE: f64 = -1e-9;

type CMatrix = DMatrix<Complex64>;
type CVector = DVector<Complex64>;

/// How the velocity mean and (pseudo-)covariance are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentEstimator {
    /// Equal weights over every velocity since the last reset (Welford).
    Cumulative,
    /// Exponential forgetting; `weight` is the weight of the newest velocity.
    Exponential { weight: f64 },
}

impl Default for MomentEstimator {
    fn default() -> Self {
        MomentEstimator::Cumulative
    }
}

impl MomentEstimator {
    fn validate(&self) -> Result<()> {
        match *self {
            MomentEstimator::Cumulative => Ok(()),
            MomentEstimator::Exponential { weight } if weight > 0.0 && weight < 1.0 => Ok(()),
            MomentEstimator::Exponential { weight } => Err(ChasmError::invalid(
                "moments.weight",
                format!("{weight} is outside (0, 1)"),
            )),
        }
    }
}

/// `βₙ = α (1 - (1-α)^{2n}) / (2-α)`, the variance factor of `zₙ`.
pub fn beta(alpha: f64, n: u64) -> f64 {
    let n = i32::try_from(n.saturating_mul(2)).unwrap_or(i32::MAX);
    alpha * (1.0 - (1.0 - alpha).powi(n)) / (2.0 - alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MewmaState {
    rank: usize,
    alpha: f64,
    ridge: f64,
    moments: MomentEstimator,
    z: CVector,
    mu: CVector,
    sigma: CMatrix,
    sigma_tilde: CMatrix,
    count: u64,
    burn_in: u64,
    samples: u64,
}

/// The pieces of the Schur-complement evaluation.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub beta: f64,
    pub ridge: f64,
    /// Inverse Schur complement `𝒞ₙ⁻¹`.
    pub c_inv: CMatrix,
    /// Off-diagonal block `𝒬ₙ = -𝒞ₙ⁻¹ Σ̃ (Σ̄ + δI)⁻¹`.
    pub q: CMatrix,
    /// `D²ₙ` before clamping.
    pub raw: f64,
}

impl MewmaState {
    pub fn new(rank: usize, alpha: f64, ridge: f64, moments: MomentEstimator) -> Result<Self> {
        if rank == 0 {
            return Err(ChasmError::invalid("rank", "must be at least 1"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ChasmError::invalid("alpha", format!("{alpha} is outside (0, 1)")));
        }
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(ChasmError::invalid(
                "ridge",
                format!("{ridge} must be finite and positive"),
            ));
        }
        moments.validate()?;
        Ok(Self {
            rank,
            alpha,
            ridge,
            moments,
            z: CVector::zeros(rank),
            mu: CVector::zeros(rank),
            sigma: CMatrix::zeros(rank, rank),
            sigma_tilde: CMatrix::zeros(rank, rank),
            count: 0,
            burn_in: 0,
            samples: 0,
        })
    }

    /// Leave the first `burn_in` velocities after each reset out of the
    /// moment estimates; they still drive `z`.
    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Rebuild a state from explicit components. Intended for tests and
    /// replaying a saved chart; `sigma` must be Hermitian and `sigma_tilde`
    /// symmetric.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        alpha: f64,
        ridge: f64,
        z: Vec<Complex64>,
        mu: Vec<Complex64>,
        sigma: DMatrix<Complex64>,
        sigma_tilde: DMatrix<Complex64>,
        count: u64,
    ) -> Result<Self> {
        let r = z.len();
        let mut s = Self::new(r, alpha, ridge, MomentEstimator::Cumulative)?;
        if mu.len() != r {
            return Err(ChasmError::DimensionMismatch { expected: r, got: mu.len() });
        }
        for m in [&sigma, &sigma_tilde] {
            if m.nrows() != r || m.ncols() != r {
                return Err(ChasmError::DimensionMismatch { expected: r, got: m.nrows() });
            }
        }
        s.z = CVector::from_vec(z);
        s.mu = CVector::from_vec(mu);
        s.sigma = sigma;
        s.sigma_tilde = sigma_tilde;
        s.count = count;
        s.samples = count;
        Ok(s)
    }

    /// Feed one velocity.
    pub fn ingest(&mut self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.rank {
            return Err(ChasmError::DimensionMismatch {
                expected: self.rank,
                got: v.len(),
            });
        }
        if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(ChasmError::NonFinite("velocity"));
        }
        let v = CVector::from_column_slice(v);
        let a = Complex64::from(self.alpha);
        self.z = &self.z * (Complex64::from(1.0) - a) + &v * a;

        self.count += 1;
        if self.count <= self.burn_in {
            return Ok(());
        }
        self.samples += 1;
        let n = self.samples as f64;
        let d = &v - &self.mu;
        match self.moments {
            MomentEstimator::Cumulative => {
                self.mu += &d / Complex64::from(n);
                if self.samples >= 2 {
                    let w = (n - 1.0) / n;
                    let keep = (n - 2.0) / (n - 1.0);
                    let scale = w / (n - 1.0);
                    self.sigma = &self.sigma * Complex64::from(keep)
                        + (&d * d.adjoint()) * Complex64::from(scale);
                    self.sigma_tilde = &self.sigma_tilde * Complex64::from(keep)
                        + (&d * d.transpose()) * Complex64::from(scale);
                }
            }
            MomentEstimator::Exponential { weight } => {
                if self.samples == 1 {
                    self.mu = v;
                } else {
                    let w = Complex64::from(weight);
                    let keep = Complex64::from(1.0 - weight);
                    self.mu += &d * w;
                    self.sigma = (&self.sigma + (&d * d.adjoint()) * w) * keep;
                    self.sigma_tilde = (&self.sigma_tilde + (&d * d.transpose()) * w) * keep;
                }
            }
        }
        hermitize(&mut self.sigma);
        symmetrize(&mut self.sigma_tilde);
        Ok(())
    }

    /// Diagonal loading applied to `Σ` and `Σ̄` before inversion.
    pub fn effective_ridge(&self) -> f64 {
        let trace: f64 = self.sigma.diagonal().iter().map(|c| c.re).sum();
        self.ridge + RELATIVE_RIDGE * trace.max(0.0) / self.rank as f64
    }

    /// Schur-complement evaluation of `D²ₙ`.
    pub fn decomposition(&self) -> Result<Decomposition> {
        if self.samples == 0 {
            return Err(ChasmError::NotReady);
        }
        let r = self.rank;
        let beta = beta(self.alpha, self.count);
        let ridge = self.effective_ridge();
        let loading = CMatrix::identity(r, r) * Complex64::from(ridge);

        let sigma = &self.sigma + &loading;
        let sigma_conj_inv = hermitian_inverse(&sigma.conjugate())?;
        let mut schur =
            &sigma - &self.sigma_tilde * &sigma_conj_inv * self.sigma_tilde.conjugate();
        hermitize(&mut schur);
        let c_inv = hermitian_inverse(&schur)?;
        let q = -(&c_inv * &self.sigma_tilde * &sigma_conj_inv);

        let u = &self.z - &self.mu;
        let quad = u.adjoint() * &c_inv * &u + u.adjoint() * &q * u.conjugate();
        let raw = 2.0 / beta * quad[(0, 0)].re;
        Ok(Decomposition {
            beta,
            ridge,
            c_inv,
            q,
            raw,
        })
    }

    /// The chart statistic `D²ₙ ≥ 0`.
    pub fn statistic(&self) -> Result<f64> {
        let raw = self.decomposition()?.raw;
        if raw.is_nan() {
            return Err(ChasmError::NonFinite("statistic"));
        }
        if raw >= 0.0 {
            Ok(raw)
        } else if raw > NEGATIVE_TOLERANCE {
            Ok(0.0)
        } else {
            Err(ChasmError::NegativeStatistic(raw))
        }
    }

    /// Back to the freshly constructed state, keeping `α`, rank and ridge.
    pub fn reset(&mut self) {
        self.z.fill(Complex64::from(0.0));
        self.mu.fill(Complex64::from(0.0));
        self.sigma.fill(Complex64::from(0.0));
        self.sigma_tilde.fill(Complex64::from(0.0));
        self.count = 0;
        self.samples = 0;
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn moments(&self) -> MomentEstimator {
        self.moments
    }

    pub fn z(&self) -> &[Complex64] {
        self.z.as_slice()
    }

    pub fn mu(&self) -> &[Complex64] {
        self.mu.as_slice()
    }

    pub fn sigma(&self) -> &DMatrix<Complex64> {
        &self.sigma
    }

    pub fn sigma_tilde(&self) -> &DMatrix<Complex64> {
        &self.sigma_tilde
    }

    /// Velocities consumed since the last reset.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in
    }

    /// Velocities that entered the moment estimates.
    pub fn samples(&self) -> u64 {
        self.samples
    }
}

/// Inverse of a Hermitian positive-definite matrix, refusing matrices whose
/// condition number exceeds [`CONDITION_LIMIT`].
fn hermitian_inverse(m: &CMatrix) -> Result<CMatrix> {
    let eig = SymmetricEigen::new(m.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &l| (lo.min(l), hi.max(l.abs())));
    if !(lo > 0.0) || !(hi / lo <= CONDITION_LIMIT) {
        return Err(ChasmError::IllConditioned {
            condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        });
    }
    let chol = Cholesky::<Complex64, Dyn>::new(m.clone()).ok_or(ChasmError::IllConditioned {
        condition: hi / lo,
    })?;
    Ok(chol.inverse())
}

fn hermitize(m: &mut CMatrix) {
    let h = (&*m + m.adjoint()) * Complex64::from(0.5);
    *m = h;
}

fn symmetrize(m: &mut CMatrix) {
    let s = (&*m + m.transpose()) * Complex64::from(0.5);
    *m = s;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fresh(rank: usize, alpha: f64) -> MewmaState {
        MewmaState::new(rank, alpha, DEFAULT_RIDGE, MomentEstimator::Cumulative).unwrap()
    }

    #[test]
    fn beta_values() {
        assert!((beta(0.2, 1) - 0.04).abs() < 1e-15);
        assert!((beta(0.2, 500) - 0.2 / 1.8).abs() < 1e-9);
        let mut prev = 0.0;
        for n in 1..=1000 {
            let b = beta(0.2, n);
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MewmaState::new(0, 0.2, 1e-8, MomentEstimator::Cumulative).is_err());
        assert!(MewmaState::new(2, 0.0, 1e-8, MomentEstimator::Cumulative).is_err());
        assert!(MewmaState::new(2, 1.0, 1e-8, MomentEstimator::Cumulative).is_err());
        assert!(MewmaState::new(2, 0.2, 0.0, MomentEstimator::Cumulative).is_err());
        assert!(
            MewmaState::new(2, 0.2, 1e-8, MomentEstimator::Exponential { weight: 1.0 }).is_err()
        );
    }

    #[test]
    fn ewma_first_step() {
        let mut s = fresh(1, 0.5);
        s.ingest(&[c(2.0, 2.0)]).unwrap();
        assert_eq!(s.z(), &[c(1.0, 1.0)]);
        assert_eq!(s.count(), 1);
    }

    #[test]
    fn constant_stream_converges_geometrically() {
        let target = c(0.3, -0.7);
        let mut s = fresh(1, 0.2);
        for n in 1..=40 {
            s.ingest(&[target]).unwrap();
            let expected = 0.8_f64.powi(n) * target.norm();
            assert!(((s.z()[0] - target).norm() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn statistic_vanishes_at_the_mean() {
        let s = MewmaState::from_parts(
            0.2,
            1e-8,
            vec![c(0.1, 0.2), c(-0.3, 0.0)],
            vec![c(0.1, 0.2), c(-0.3, 0.0)],
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.5, 0.0)]),
            DMatrix::from_row_slice(2, 2, &[c(0.1, 0.05), c(0.0, 0.0), c(0.0, 0.0), c(0.2, 0.0)]),
            10,
        )
        .unwrap();
        assert_eq!(s.statistic().unwrap(), 0.0);
    }

    #[test]
    fn reset_behaviour() {
        let mut s = fresh(2, 0.3);
        s.ingest(&[c(0.1, 0.0), c(0.0, 0.1)]).unwrap();
        s.ingest(&[c(-0.1, 0.2), c(0.3, 0.1)]).unwrap();
        s.reset();
        assert_eq!(s.statistic(), Err(ChasmError::NotReady));
        assert_eq!(s.alpha(), 0.3);
        assert_eq!(s.count(), 0);
        let once = s.clone();
        s.reset();
        assert_eq!(s, once);
        assert_eq!(s, fresh(2, 0.3));
    }

    #[test]
    fn ingest_rejects_bad_velocities() {
        let mut s = fresh(2, 0.3);
        assert!(s.ingest(&[c(0.0, 0.0)]).is_err());
        assert!(s.ingest(&[c(f64::NAN, 0.0), c(0.0, 0.0)]).is_err());
        assert_eq!(s.count(), 0);
    }

    #[test]
    fn cumulative_moments_match_two_pass() {
        let vs = [
            [c(0.1, 0.3), c(-0.2, 0.0)],
            [c(0.4, -0.1), c(0.1, 0.2)],
            [c(-0.3, 0.2), c(0.0, -0.4)],
            [c(0.2, 0.2), c(0.5, 0.1)],
        ];
        let mut s = fresh(2, 0.2);
        for v in &vs {
            s.ingest(v).unwrap();
        }
        let n = vs.len() as f64;
        let mean: Vec<Complex64> = (0..2)
            .map(|k| vs.iter().map(|v| v[k]).sum::<Complex64>() / n)
            .collect();
        for i in 0..2 {
            assert!((s.mu()[i] - mean[i]).norm() < 1e-15);
            for j in 0..2 {
                let cov: Complex64 = vs
                    .iter()
                    .map(|v| (v[i] - mean[i]) * (v[j] - mean[j]).conj())
                    .sum::<Complex64>()
                    / (n - 1.0);
                let pcov: Complex64 = vs
                    .iter()
                    .map(|v| (v[i] - mean[i]) * (v[j] - mean[j]))
                    .sum::<Complex64>()
                    / (n - 1.0);
                assert!((s.sigma()[(i, j)] - cov).norm() < 1e-14);
                assert!((s.sigma_tilde()[(i, j)] - pcov).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn exponential_moments_forget_old_velocities() {
        let mut s = MewmaState::new(1, 0.2, 1e-8, MomentEstimator::Exponential { weight: 0.1 })
            .unwrap();
        for _ in 0..20 {
            s.ingest(&[c(5.0, 0.0)]).unwrap();
        }
        for _ in 0..400 {
            s.ingest(&[c(0.0, 1.0)]).unwrap();
        }
        assert!((s.mu()[0] - c(0.0, 1.0)).norm() < 1e-10);
        assert!(s.sigma()[(0, 0)].re < 1e-10);
    }

    #[test]
    fn burn_in_velocities_only_drive_z() {
        let mut s = fresh(1, 0.5).with_burn_in(2);
        s.ingest(&[c(100.0, 0.0)]).unwrap();
        s.ingest(&[c(-100.0, 0.0)]).unwrap();
        assert_eq!((s.count(), s.samples()), (2, 0));
        assert_eq!(s.statistic(), Err(ChasmError::NotReady));
        assert_eq!(s.z()[0], c(-25.0, 0.0));
        s.ingest(&[c(1.0, 0.0)]).unwrap();
        s.ingest(&[c(3.0, 0.0)]).unwrap();
        assert_eq!(s.mu()[0], c(2.0, 0.0));
        assert_eq!(s.sigma()[(0, 0)], c(2.0, 0.0));
        assert_eq!(s.count(), 4);
        s.reset();
        assert_eq!((s.count(), s.samples(), s.burn_in()), (0, 0, 2));
    }
}
