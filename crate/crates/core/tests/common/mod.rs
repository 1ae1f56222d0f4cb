//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

/// Weighted least-squares operator in closed form:
/// `Θₙ = (Σ ρⁿ⁻ᵗ yₜxₜᵀ + ερⁿ I)(Σ ρⁿ⁻ᵗ xₜxₜᵀ + ερⁿ I)⁻¹` over consecutive pairs,
/// which is the ridge problem shrinking towards the identity.
pub fn batch_wls(stream: &[Vec<f64>], rho: f64, epsilon: f64) -> DMatrix<f64> {
    let d = stream[0].len();
    let n = stream.len() - 1;
    let prior = epsilon * rho.powi(n as i32);
    let mut cross = DMatrix::identity(d, d) * prior;
    let mut gram = DMatrix::identity(d, d) * prior;
    for t in 1..=n {
        let w = rho.powi((n - t) as i32);
        let x = DVector::from_column_slice(&stream[t - 1]);
        let y = DVector::from_column_slice(&stream[t]);
        cross += &y * x.transpose() * w;
        gram += &x * x.transpose() * w;
    }
    let lu = gram.transpose().full_piv_lu();
    lu.solve(&cross.transpose()).expect("Gram matrix is invertible").transpose()
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                prefix.push(j);
                go(prefix, used, out);
                prefix.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Minimum assignment cost and the lexicographically first minimizer.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let mut best = (f64::INFINITY, Vec::new());
    for p in permutations(cost.len()) {
        let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if c < best.0 {
            best = (c, p);
        }
    }
    best
}

/// `D² = β⁻¹ ũᴴ Γ⁻¹ ũ` with `ũ = (u, ū)` and the augmented covariance
/// `Γ = [[Σ + δI, Σ̃], [Σ̃̄, Σ̄ + δI]]`, inverted as a full `2r × 2r` matrix.
pub fn augmented_statistic(
    u: &[Complex64],
    sigma: &DMatrix<Complex64>,
    sigma_tilde: &DMatrix<Complex64>,
    ridge: f64,
    beta: f64,
) -> f64 {
    let r = u.len();
    let mut gamma = DMatrix::<Complex64>::zeros(2 * r, 2 * r);
    for i in 0..r {
        for j in 0..r {
            let load = if i == j { ridge } else { 0.0 };
            gamma[(i, j)] = sigma[(i, j)] + load;
            gamma[(i, j + r)] = sigma_tilde[(i, j)];
            gamma[(i + r, j)] = sigma_tilde[(i, j)].conj();
            gamma[(i + r, j + r)] = sigma[(i, j)].conj() + load;
        }
    }
    let ua = DVector::from_iterator(2 * r, u.iter().copied().chain(u.iter().map(|z| z.conj())));
    let inv = gamma.lu().try_inverse().expect("augmented covariance is invertible");
    (ua.adjoint() * inv * &ua)[(0, 0)].re / beta
}

/// Real MEWMA on stacked coordinates `w = (Re u, Im u)`. With zero
/// pseudo-covariance the stacked covariance is `½ [[A, -B], [B, A]]` for
/// `Σ + δI = A + iB`.
pub fn stacked_real_statistic(u: &[Complex64], sigma: &DMatrix<Complex64>, ridge: f64, beta: f64) -> f64 {
    let r = u.len();
    let mut s = DMatrix::<f64>::zeros(2 * r, 2 * r);
    for i in 0..r {
        for j in 0..r {
            let load = if i == j { ridge } else { 0.0 };
            let a = sigma[(i, j)].re + load;
            let b = sigma[(i, j)].im;
            s[(i, j)] = 0.5 * a;
            s[(i + r, j + r)] = 0.5 * a;
            s[(i, j + r)] = -0.5 * b;
            s[(i + r, j)] = 0.5 * b;
        }
    }
    let w = DVector::from_iterator(2 * r, u.iter().map(|z| z.re).chain(u.iter().map(|z| z.im)));
    let inv = s.lu().try_inverse().expect("stacked covariance is invertible");
    (w.transpose() * inv * &w)[(0, 0)] / beta
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    use rand_distr::{Distribution, StandardNormal};
    Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Random improper chart moments: `Σ = E[vvᴴ]`, `Σ̃ = E[vvᵀ]` for `v = A g + B ḡ`
/// with standard complex normal `g`, so the augmented covariance is valid.
pub fn random_moments<R: Rng + ?Sized>(
    r: usize,
    improper: bool,
    rng: &mut R,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let a = DMatrix::from_fn(r, r, |_, _| complex_normal(rng));
    let b = if improper {
        DMatrix::from_fn(r, r, |_, _| complex_normal(rng) * 0.5)
    } else {
        DMatrix::zeros(r, r)
    };
    // E[g gᴴ] = 2I and E[g gᵀ] = 0 for g with unit-variance parts.
    let sigma = (&a * a.adjoint() + &b * b.adjoint()) * Complex64::from(2.0);
    let sigma_tilde = (&a * b.transpose() + &b * a.transpose()) * Complex64::from(2.0);
    (sigma, sigma_tilde)
}

pub fn random_cvec<R: Rng + ?Sized>(r: usize, scale: f64, rng: &mut R) -> Vec<Complex64> {
    (0..r).map(|_| complex_normal(rng) * scale).collect()
}

/// A stable random VAR(1) stream of length `len` in dimension `d`.
pub fn random_var_stream<R: Rng + ?Sized>(d: usize, len: usize, rng: &mut R) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut a = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let radius = a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    a *= 0.9 / radius.max(1e-12);
    let mut x = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(rng));
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(x.as_slice().to_vec());
        let e = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(rng));
        x = &a * x + e;
    }
    out
}
