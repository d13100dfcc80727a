//! Dense SPD solves with a single jitter retry.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Pivots below this fraction of the largest diagonal entry count as singular.
const PIVOT_RTOL: f64 = 1e-13;

pub type Factor = Cholesky<f64, Dyn>;

fn min_pivot(f: &Factor) -> f64 {
    let l = f.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of a symmetric positive-definite matrix.
///
/// On failure the diagonal is shifted by `1e-10 * trace / d` and the
/// factorization retried once. The retry is rejected when the smallest pivot
/// is of the same order as the shift, i.e. when the matrix was singular.
pub fn spd_factor(a: &DMatrix<f64>) -> Result<Factor> {
    let d = a.nrows();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("matrix"));
    }
    let max_diag = (0..d).map(|i| a[(i, i)]).fold(0.0, f64::max);
    if max_diag <= 0.0 {
        return Err(Error::SingularDesign);
    }
    if let Some(f) = Cholesky::new(a.clone()) {
        if min_pivot(&f) > PIVOT_RTOL * max_diag {
            return Ok(f);
        }
        return Err(Error::SingularDesign);
    }
    let jitter = 1e-10 * a.trace() / d as f64;
    let mut shifted = a.clone();
    for i in 0..d {
        shifted[(i, i)] += jitter;
    }
    match Cholesky::new(shifted) {
        Some(f) if min_pivot(&f) > 10.0 * jitter => Ok(f),
        _ => Err(Error::SingularDesign),
    }
}

pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(spd_factor(a)?.solve(b))
}

/// `f^T A^{-1} f` from a factor of `A`.
pub fn inv_quad(factor: &Factor, f: &DVector<f64>) -> f64 {
    let z = factor.l_dirty().solve_lower_triangular(f).expect("cholesky factor is non-singular");
    z.norm_squared()
}

/// Draw from `N(mean, scale^2 A^{-1})` given the factor `A = L L^T`.
pub fn sample_inv_cov<R: Rng + ?Sized>(factor: &Factor, mean: &DVector<f64>, scale: f64, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
    // L^T x = z gives x ~ N(0, (L L^T)^{-1}).
    let x = factor.l_dirty().tr_solve_lower_triangular(&z).expect("cholesky factor is non-singular");
    mean + x * scale
}

/// Draw from `N(mean, scale^2 S)` given the factor of the covariance `S` itself.
pub fn sample_cov<R: Rng + ?Sized>(factor: &Factor, mean: &DVector<f64>, scale: f64, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
    let l = factor.l();
    mean + (l * z) * scale
}
