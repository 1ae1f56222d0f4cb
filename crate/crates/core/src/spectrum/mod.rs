//! Truncated spectrum of the operator estimate and its alignment across time.
//!
//! Eigensolvers return eigenvalues in no particular order, so consecutive
//! spectra are matched by the permutation minimizing the total squared
//! displacement. That permutation is the optimal coupling between the two
//! uniform empirical measures on the eigenvalues, i.e. it realizes `r · W₂²`.
//!
//! The very first spectrum of a segment has nothing to align against; it is
//! sorted by descending modulus, then descending real part, then descending
//! imaginary part.

mod assignment;

use std::cmp::Ordering;

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{ChasmError, Result};

pub use assignment::{solve_assignment, CostMatrix, Permutation};

const SCHUR_MAX_ITER: usize = 10_000;

/// The `rank` retained eigenvalues in alignment order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSpectrum {
    values: Vec<Complex64>,
}

impl AlignedSpectrum {
    /// Cold start: sorts `values` into the canonical descending order.
    pub fn cold_start(mut values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(ChasmError::invalid("rank", "must be at least 1"));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(ChasmError::NonFinite("spectrum"));
        }
        values.sort_by(descending_modulus);
        Ok(Self { values })
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Reorder `raw_next` so that entry `i` is the eigenvalue coupled with
    /// entry `i` of `self`.
    pub fn align(&self, raw_next: &[Complex64]) -> Result<AlignedSpectrum> {
        if raw_next.len() != self.rank() {
            return Err(ChasmError::DimensionMismatch {
                expected: self.rank(),
                got: raw_next.len(),
            });
        }
        let cost = alignment_cost(&self.values, raw_next)?;
        let perm = solve_assignment(&cost)?;
        Ok(AlignedSpectrum {
            values: perm.apply(raw_next),
        })
    }

    /// Spectral velocity `next - self`, entrywise.
    pub fn velocity_to(&self, next: &AlignedSpectrum) -> Vec<Complex64> {
        next.values
            .iter()
            .zip(&self.values)
            .map(|(n, p)| n - p)
            .collect()
    }
}

/// Total order used for truncation and the cold-start spectrum.
pub fn descending_modulus(a: &Complex64, b: &Complex64) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then_with(|| b.re.total_cmp(&a.re))
        .then_with(|| b.im.total_cmp(&a.im))
}

/// The `rank` eigenvalues of largest modulus, in [`descending_modulus`] order.
pub fn dominant_eigenvalues(theta: &DMatrix<f64>, rank: usize) -> Result<Vec<Complex64>> {
    let d = theta.nrows();
    if theta.ncols() != d {
        return Err(ChasmError::DimensionMismatch {
            expected: d,
            got: theta.ncols(),
        });
    }
    if rank == 0 || rank > d {
        return Err(ChasmError::invalid(
            "rank",
            format!("{rank} is outside 1..={d}"),
        ));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(ChasmError::NonFinite("operator"));
    }
    let schur = Schur::try_new(theta.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(ChasmError::EigenFailure)?;
    let mut eig: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(ChasmError::EigenFailure);
    }
    eig.sort_by(descending_modulus);
    eig.truncate(rank);
    Ok(eig)
}

/// `cost[i][j] = |prev[i] - next[j]|²`.
pub fn alignment_cost(prev: &[Complex64], next: &[Complex64]) -> Result<CostMatrix> {
    if prev.len() != next.len() {
        return Err(ChasmError::DimensionMismatch {
            expected: prev.len(),
            got: next.len(),
        });
    }
    let data = prev
        .iter()
        .flat_map(|p| next.iter().map(move |n| (p - n).norm_sqr()))
        .collect();
    CostMatrix::new(prev.len(), data)
}

/// Squared 2-Wasserstein distance between the uniform empirical measures on
/// two equal-size point sets in ℂ.
pub fn wasserstein2_sq(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    let cost = alignment_cost(a, b)?;
    let perm = solve_assignment(&cost)?;
    Ok(cost.objective(&perm) / a.len().max(1) as f64)
}
