//! Innovation distributions for the synthetic VAR benchmarks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Bernoulli, ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ChasmError, Result};

/// Scale of the outlier component in the contamination model.
pub const HUBER_OUTLIER_STD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Laplace marginals glued by a Gaussian copula.
    LaplaceCopula,
    StudentT { nu: f64 },
    /// `(1-ε) N(0, Σ) + ε N(0, 9Σ)`.
    Huber { eps: f64 },
}

/// A noise family with its base covariance `Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    kind: NoiseKind,
    covariance: DMatrix<f64>,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        if d == 0 || covariance.ncols() != d {
            return Err(ChasmError::invalid("covariance", "must be square and non-empty"));
        }
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(ChasmError::NonFinite("covariance"));
        }
        let asym = (&covariance - covariance.transpose()).abs().max();
        if asym > 1e-10 * (1.0 + covariance.abs().max()) {
            return Err(ChasmError::invalid("covariance", "must be symmetric"));
        }
        let min_eig = SymmetricEigen::new(covariance.clone()).eigenvalues.min();
        if min_eig < -1e-9 * (1.0 + covariance.abs().max()) {
            return Err(ChasmError::invalid(
                "covariance",
                format!("not positive semi-definite (eigenvalue {min_eig:e})"),
            ));
        }
        match kind {
            NoiseKind::StudentT { nu } if !(nu >= 3.0 && nu.is_finite()) => {
                return Err(ChasmError::invalid("nu", format!("{nu} must be at least 3")));
            }
            NoiseKind::Huber { eps } if !(0.0..1.0).contains(&eps) => {
                return Err(ChasmError::invalid("eps", format!("{eps} is outside [0, 1)")));
            }
            NoiseKind::LaplaceCopula if covariance.diagonal().iter().any(|&v| v <= 0.0) => {
                return Err(ChasmError::invalid(
                    "covariance",
                    "Laplace marginals need a strictly positive diagonal",
                ));
            }
            _ => {}
        }
        Ok(Self { kind, covariance })
    }

    pub fn gaussian(covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, covariance)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Covariance of the innovations actually drawn.
    pub fn innovation_covariance(&self) -> DMatrix<f64> {
        match self.kind {
            NoiseKind::Gaussian | NoiseKind::LaplaceCopula => self.covariance.clone(),
            NoiseKind::StudentT { nu } => &self.covariance * (nu / (nu - 2.0)),
            NoiseKind::Huber { eps } => {
                let outlier = HUBER_OUTLIER_STD * HUBER_OUTLIER_STD;
                &self.covariance * (1.0 - eps + eps * outlier)
            }
        }
    }

    /// Precompute the factors needed for repeated draws.
    pub fn sampler(&self) -> Result<NoiseSampler> {
        let (factor, scales) = match self.kind {
            NoiseKind::LaplaceCopula => {
                let sd: Vec<f64> = self.covariance.diagonal().iter().map(|v| v.sqrt()).collect();
                let corr = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
                    self.covariance[(i, j)] / (sd[i] * sd[j])
                });
                let scales = sd.iter().map(|s| s / std::f64::consts::SQRT_2).collect();
                (psd_factor(&corr)?, scales)
            }
            _ => (psd_factor(&self.covariance)?, Vec::new()),
        };
        let chi2 = match self.kind {
            NoiseKind::StudentT { nu } => Some(
                ChiSquared::new(nu).map_err(|e| ChasmError::invalid("nu", e.to_string()))?,
            ),
            _ => None,
        };
        let contamination = match self.kind {
            NoiseKind::Huber { eps } => Some(
                Bernoulli::new(eps).map_err(|e| ChasmError::invalid("eps", e.to_string()))?,
            ),
            _ => None,
        };
        Ok(NoiseSampler {
            kind: self.kind,
            factor,
            scales,
            chi2,
            contamination,
        })
    }
}

/// Reusable draw state for one [`NoiseSpec`].
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    kind: NoiseKind,
    factor: DMatrix<f64>,
    scales: Vec<f64>,
    chi2: Option<ChiSquared<f64>>,
    contamination: Option<Bernoulli>,
}

impl NoiseSampler {
    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let g = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        let y = &self.factor * g;
        match self.kind {
            NoiseKind::Gaussian => y,
            NoiseKind::StudentT { nu } => {
                let u = self.chi2.as_ref().expect("chi2 set for student_t").sample(rng);
                y * (nu / u).sqrt()
            }
            NoiseKind::Huber { .. } => {
                let outlier = self
                    .contamination
                    .as_ref()
                    .expect("bernoulli set for huber")
                    .sample(rng);
                if outlier {
                    y * HUBER_OUTLIER_STD
                } else {
                    y
                }
            }
            NoiseKind::LaplaceCopula => DVector::from_fn(self.dim(), |i, _| {
                laplace_from_normal(y[i], self.scales[i])
            }),
        }
    }
}

/// One innovation draw. Prefer [`NoiseSpec::sampler`] for repeated draws.
pub fn draw_noise<R: Rng + ?Sized>(spec: &NoiseSpec, rng: &mut R) -> Result<DVector<f64>> {
    Ok(spec.sampler()?.draw(rng))
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse CDF of `Laplace(0, s)`: `-s · sign(u - ½) · ln(1 - 2|u - ½|)`.
pub fn laplace_quantile(u: f64, s: f64) -> f64 {
    let c = u - 0.5;
    -s * c.signum() * (1.0 - 2.0 * c.abs()).ln()
}

/// `laplace_quantile(Φ(z), s)` without forming `Φ(z)`: the tail mass
/// `1 - 2|Φ(z) - ½|` equals `erfc(|z|/√2)`, which keeps full precision for
/// large `|z|`.
fn laplace_from_normal(z: f64, s: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    -s * z.signum() * ln_erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// `ln erfc(x)` for `x ≥ 0`; asymptotic series once `erfc` underflows.
fn ln_erfc(x: f64) -> f64 {
    if x < 26.0 {
        return libm::erfc(x).ln();
    }
    let x2 = x * x;
    let series = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
    -x2 - (x * std::f64::consts::PI.sqrt()).ln() + series.ln()
}

/// `L` with `L Lᵀ = m` for a symmetric PSD matrix; Cholesky when possible,
/// otherwise the clipped eigen square root.
pub(crate) fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(m.clone());
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt);
    if factor.iter().any(|v| !v.is_finite()) {
        return Err(ChasmError::NonFinite("covariance factor"));
    }
    Ok(factor)
}
