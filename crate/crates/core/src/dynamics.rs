//! Online least-squares estimation of a linear transition operator.
//!
//! The estimator keeps the sufficient statistics of an exponentially weighted
//! recursive least-squares fit of `x_t ≈ Θ x_{t-1}`. After `n` pairs the
//! operator equals
//!
//! ```text
//! Θ_n = (ε ρ^n Θ_0 + Σ ρ^{n-t} x_t x_{t-1}ᵀ) (ε ρ^n I + Σ ρ^{n-t} x_{t-1} x_{t-1}ᵀ)⁻¹
//! ```
//!
//! with `Θ_0 = I`. The `1/n` normalization of the textbook recursion cancels
//! between the two factors, so the unnormalized Sherman–Morrison form is used
//! and is well defined from the very first pair.

use nalgebra::{DMatrix, DVector};

use crate::error::{ChasmError, Result};

/// Default ridge for a stream of dimension `dim`.
pub fn default_epsilon(dim: usize) -> f64 {
    1e-6 * dim as f64
}

/// Sufficient statistics of the recursive operator estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsState {
    dim: usize,
    theta: DMatrix<f64>,
    gamma_inv: DMatrix<f64>,
    rho: f64,
    epsilon: f64,
    step: u64,
    prev_x: Option<DVector<f64>>,
}

impl DynamicsState {
    /// Fresh estimator: `Θ = I` and inverse Gram matrix `(1/ε) I`.
    pub fn new(dim: usize, rho: f64, epsilon: f64) -> Result<Self> {
        if dim == 0 {
            return Err(ChasmError::invalid("dim", "must be at least 1"));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(ChasmError::invalid("rho", format!("{rho} is outside (0, 1]")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ChasmError::invalid(
                "epsilon",
                format!("{epsilon} must be finite and positive"),
            ));
        }
        Ok(Self {
            dim,
            theta: DMatrix::identity(dim, dim),
            gamma_inv: DMatrix::identity(dim, dim) / epsilon,
            rho,
            epsilon,
            step: 0,
            prev_x: None,
        })
    }

    /// Initialize from a batch by folding [`update`](Self::update) over it.
    ///
    /// The batch must hold at least `dim + 1` observations so that `dim`
    /// regressor/target pairs are consumed.
    pub fn warm_start<V: AsRef<[f64]>>(batch: &[V], rho: f64, epsilon: f64) -> Result<Self> {
        let dim = batch.first().map(|x| x.as_ref().len()).unwrap_or(0);
        if dim == 0 {
            return Err(ChasmError::BatchTooShort {
                needed: 2,
                got: batch.len(),
            });
        }
        if batch.len() < dim + 1 {
            return Err(ChasmError::BatchTooShort {
                needed: dim + 1,
                got: batch.len(),
            });
        }
        let mut state = Self::new(dim, rho, epsilon)?;
        for x in batch {
            state.update(x.as_ref())?;
        }
        Ok(state)
    }

    /// Consume one observation.
    ///
    /// The first observation after construction only becomes the regressor.
    /// On error the state is left untouched.
    pub fn update(&mut self, x_new: &[f64]) -> Result<()> {
        if x_new.len() != self.dim {
            return Err(ChasmError::DimensionMismatch {
                expected: self.dim,
                got: x_new.len(),
            });
        }
        if x_new.iter().any(|v| !v.is_finite()) {
            return Err(ChasmError::NonFinite("observation"));
        }
        let y = DVector::from_column_slice(x_new);
        let Some(x) = self.prev_x.replace(y.clone()) else {
            return Ok(());
        };

        let px = &self.gamma_inv * &x;
        let denom = self.rho + x.dot(&px);
        let gain = &px / denom;
        let residual = &y - &self.theta * &x;

        let theta = &self.theta + &residual * gain.transpose();
        let mut gamma_inv = (&self.gamma_inv - &gain * px.transpose()) / self.rho;
        symmetrize(&mut gamma_inv);

        if theta.iter().chain(gamma_inv.iter()).any(|v| !v.is_finite()) {
            self.prev_x = Some(x);
            return Err(ChasmError::NonFinite("operator update"));
        }
        self.theta = theta;
        self.gamma_inv = gamma_inv;
        self.step += 1;
        Ok(())
    }

    /// `n_eff = Σ_{t=1}^{n} ρ^{n-t}`, i.e. `(1-ρⁿ)/(1-ρ)`, or `n` when `ρ = 1`.
    pub fn effective_sample_size(&self) -> Result<f64> {
        if self.step == 0 {
            return Err(ChasmError::invalid("step", "no pairs consumed yet"));
        }
        Ok(effective_sample_size(self.rho, self.step))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn gamma_inv(&self) -> &DMatrix<f64> {
        &self.gamma_inv
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of `(x_{t-1}, x_t)` pairs consumed.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn prev_x(&self) -> Option<&DVector<f64>> {
        self.prev_x.as_ref()
    }
}

/// Closed form of the geometric weight sum for `n ≥ 1` pairs.
pub fn effective_sample_size(rho: f64, n: u64) -> f64 {
    if rho == 1.0 {
        n as f64
    } else {
        let n = i32::try_from(n).unwrap_or(i32::MAX);
        (1.0 - rho.powi(n)) / (1.0 - rho)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
