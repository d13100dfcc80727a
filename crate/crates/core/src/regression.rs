//! Ridge / weighted least squares, incremental bandit statistics and the
//! Normal-Inverse-Gamma conjugate model.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{invalid, Error, Result};
use crate::linalg::{inv_quad, sample_cov, sample_inv_cov, spd_factor, spd_solve, Factor};

/// Ridge penalty used when callers do not pick one.
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

fn check_finite(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("design"));
    }
    Ok(())
}

/// `(X^T X + lambda I)^{-1} X^T y` by Cholesky.
pub fn ridge_fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
    }
    if !(lambda >= 0.0) {
        return Err(invalid("ridge lambda must be >= 0"));
    }
    check_finite(x, y)?;
    let mut gram = x.tr_mul(x);
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    spd_solve(&gram, &x.tr_mul(y))
}

/// Minimizer of `sum_i w_i (y_i - x_i^T beta)^2 + lambda ||beta||^2`.
pub fn wls_fit(x: &DMatrix<f64>, y: &DVector<f64>, weights: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if weights.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: weights.len() });
    }
    if let Some(&w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::NonPositiveWeight(w));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
    }
    if !(lambda >= 0.0) {
        return Err(invalid("ridge lambda must be >= 0"));
    }
    check_finite(x, y)?;
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= weights[i];
    }
    let mut gram = xw.tr_mul(x);
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    spd_solve(&gram, &xw.tr_mul(y))
}

/// `B = lambda I + sum f f^T`, `b = sum f y` with a cached factor of `B`.
#[derive(Debug, Clone)]
pub struct SuffStats {
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    n: usize,
    lambda: f64,
    factor: Factor,
    mean: DVector<f64>,
}

impl SuffStats {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(invalid("sufficient statistics need lambda > 0 so B_0 is invertible"));
        }
        if dim == 0 {
            return Err(Error::EmptyInput);
        }
        let gram = DMatrix::identity(dim, dim) * lambda;
        let factor = spd_factor(&gram)?;
        Ok(Self { gram, moment: DVector::zeros(dim), n: 0, lambda, factor, mean: DVector::zeros(dim) })
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Posterior mean / ridge estimate `B^{-1} b`.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn factor(&self) -> &Factor {
        &self.factor
    }

    /// `B' = B + f f^T`, `b' = b + f y`.
    pub fn update(&mut self, f: &[f64], y: f64) -> Result<()> {
        self.update_weighted(f, y, 1.0)
    }

    /// Absorbs `(f, y)` with multiplicity `w >= 0`; `w = 0` is a no-op apart
    /// from the count.
    pub fn update_weighted(&mut self, f: &[f64], y: f64, w: f64) -> Result<()> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: f.len() });
        }
        if !y.is_finite() || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("observation"));
        }
        self.n += 1;
        if w == 0.0 {
            return Ok(());
        }
        let fv = DVector::from_column_slice(f);
        self.gram.ger(w, &fv, &fv, 1.0);
        self.moment.axpy(w * y, &fv, 1.0);
        self.refresh()
    }

    /// Adds `w * M` to `B` (used for expected outer products).
    pub(crate) fn add_gram(&mut self, m: &DMatrix<f64>) -> Result<()> {
        self.gram += m;
        self.refresh()
    }

    pub(crate) fn add_moment(&mut self, v: &DVector<f64>) -> Result<()> {
        self.moment += v;
        self.refresh()
    }

    fn refresh(&mut self) -> Result<()> {
        self.factor = spd_factor(&self.gram)?;
        self.mean = self.factor.solve(&self.moment);
        Ok(())
    }

    /// `f^T B^{-1} f`.
    pub fn inv_quad(&self, f: &[f64]) -> f64 {
        inv_quad(&self.factor, &DVector::from_column_slice(f))
    }

    /// Draw from `N(B^{-1} b, scale^2 B^{-1})`.
    pub fn sample<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> DVector<f64> {
        sample_inv_cov(&self.factor, &self.mean, scale, rng)
    }
}

/// `NIG(mu, Sigma, a, b)`: `sigma^2 ~ InvGamma(a, b)`, `beta | sigma^2 ~ N(mu, sigma^2 Sigma)`.
#[derive(Debug, Clone)]
pub struct NigPosterior {
    mu: DVector<f64>,
    sigma_scale: DMatrix<f64>,
    precision: DMatrix<f64>,
    a: f64,
    b: f64,
}

impl NigPosterior {
    pub fn new(mu: DVector<f64>, sigma_scale: DMatrix<f64>, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(invalid("NIG shape and scale must be positive"));
        }
        if sigma_scale.nrows() != mu.len() || sigma_scale.ncols() != mu.len() {
            return Err(Error::DimensionMismatch { expected: mu.len(), got: sigma_scale.nrows() });
        }
        let precision = spd_factor(&sigma_scale)?.inverse();
        Ok(Self { mu, sigma_scale, precision, a, b })
    }

    /// Zero-mean prior with `Sigma = I / lambda`.
    pub fn ridge_prior(dim: usize, lambda: f64, a: f64, b: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(invalid("prior precision must be positive"));
        }
        Self::from_precision(DVector::zeros(dim), DMatrix::identity(dim, dim) * lambda, a, b)
    }

    fn from_precision(mu: DVector<f64>, precision: DMatrix<f64>, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(invalid("NIG shape and scale must be positive"));
        }
        let sigma_scale = spd_factor(&precision)?.inverse();
        Ok(Self { mu, sigma_scale, precision, a, b })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma_scale(&self) -> &DMatrix<f64> {
        &self.sigma_scale
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn shape(&self) -> f64 {
        self.a
    }

    pub fn scale(&self) -> f64 {
        self.b
    }

    /// Conjugate update with rows of `x` and responses `y`.
    pub fn update(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        if x.ncols() != self.mu.len() {
            return Err(Error::DimensionMismatch { expected: self.mu.len(), got: x.ncols() });
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        if x.nrows() == 0 {
            return Ok(self.clone());
        }
        check_finite(x, y)?;
        let precision = &self.precision + x.tr_mul(x);
        let rhs = &self.precision * &self.mu + x.tr_mul(y);
        let factor = spd_factor(&precision)?;
        let mu = factor.solve(&rhs);
        let resid = y - x * &mu;
        let shift = &mu - &self.mu;
        let b = self.b + 0.5 * (resid.norm_squared() + shift.dot(&(&self.precision * &shift)));
        let a = self.a + 0.5 * x.nrows() as f64;
        Ok(Self { sigma_scale: factor.inverse(), mu, precision, a, b })
    }

    /// Joint draw `(beta, sigma^2)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(DVector<f64>, f64)> {
        // InvGamma(a, b) as the reciprocal of Gamma(shape a, rate b).
        let g = Gamma::new(self.a, 1.0 / self.b).map_err(|_| invalid("invalid gamma parameters"))?;
        let sigma2 = 1.0 / g.sample(rng);
        let factor = spd_factor(&self.sigma_scale)?;
        Ok((sample_cov(&factor, &self.mu, libm::sqrt(sigma2), rng), sigma2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;
    use rand_distr::StandardNormal;

    /// Gaussian elimination with partial pivoting; independent of the Cholesky path.
    fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn normal_equations_oracle(x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
        let d = x[0].len();
        let mut a = vec![vec![0.0; d]; d];
        let mut b = vec![0.0; d];
        for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
            for i in 0..d {
                b[i] += wi * row[i] * yi;
                for j in 0..d {
                    a[i][j] += wi * row[i] * row[j];
                }
            }
        }
        for (i, r) in a.iter_mut().enumerate() {
            r[i] += lambda;
        }
        gauss_solve(a, b)
    }

    fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = RngSpec::new(seed, 0).stream();
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let y = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        (x, y)
    }

    fn to_mat(x: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(x.len(), x[0].len(), |i, j| x[i][j])
    }

    #[test]
    fn ridge_identity_design() {
        let x = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(ridge_fit(&x, &y, 0.0).unwrap().as_slice(), &[1.0, 2.0]);
        let b = ridge_fit(&x, &y, 1.0).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-15 && (b[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ridge_matches_normal_equations_oracle() {
        for seed in 0..5 {
            let (x, y) = random_problem(seed, 10, 3);
            for lambda in [0.0, 0.3] {
                let got = ridge_fit(&to_mat(&x), &DVector::from_vec(y.clone()), lambda).unwrap();
                let want = normal_equations_oracle(&x, &y, &[1.0; 10], lambda);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn ridge_errors() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(ridge_fit(&x, &y, 0.0), Err(Error::SingularDesign));
        assert!(ridge_fit(&x, &y, 0.1).is_ok());
        let bad = DVector::from_vec(vec![1.0, f64::NAN, 3.0]);
        assert!(matches!(ridge_fit(&x, &bad, 0.1), Err(Error::NonFiniteInput(_))));
    }

    #[test]
    fn wls_reductions() {
        let (x, y) = random_problem(9, 12, 3);
        let (xm, yv) = (to_mat(&x), DVector::from_vec(y.clone()));
        let ones = DVector::from_element(12, 1.0);
        assert_eq!(wls_fit(&xm, &yv, &ones, 0.5).unwrap(), ridge_fit(&xm, &yv, 0.5).unwrap());
        let w: Vec<f64> = (0..12).map(|i| 0.5 + i as f64 / 7.0).collect();
        let b1 = wls_fit(&xm, &yv, &DVector::from_vec(w.clone()), 0.0).unwrap();
        let b2 = wls_fit(&xm, &yv, &DVector::from_vec(w.iter().map(|v| 2.0 * v).collect()), 0.0).unwrap();
        assert!((&b1 - &b2).amax() < 1e-12);
        let want = normal_equations_oracle(&x, &y, &w, 0.0);
        for (g, o) in b1.iter().zip(&want) {
            assert!((g - o).abs() < 1e-10);
        }
        let mut w0 = ones.clone();
        w0[3] = 0.0;
        assert_eq!(wls_fit(&xm, &yv, &w0, 0.0), Err(Error::NonPositiveWeight(0.0)));
    }

    #[test]
    fn suffstats_basics() {
        let mut s = SuffStats::new(2, 1.5).unwrap();
        s.update(&[1.0, 2.0], 0.0).unwrap();
        assert_eq!(s.gram(), &DMatrix::from_row_slice(2, 2, &[2.5, 2.0, 2.0, 5.5]));
        assert_eq!(s.moment().as_slice(), &[0.0, 0.0]);
        assert_eq!(s.count(), 1);
        assert!(matches!(s.update(&[1.0], 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn five_updates_equal_batch_gram() {
        let (x, y) = random_problem(3, 5, 4);
        let mut s = SuffStats::new(4, 1.0).unwrap();
        for (row, &yi) in x.iter().zip(&y) {
            s.update(row, yi).unwrap();
        }
        let xm = to_mat(&x);
        let batch = xm.tr_mul(&xm) + DMatrix::<f64>::identity(4, 4);
        assert!((s.gram() - batch).amax() < 1e-10);
        assert!((s.gram() - s.gram().transpose()).amax() <= 1e-12);
    }

    #[test]
    fn nig_no_data_is_identity() {
        let prior = NigPosterior::ridge_prior(3, 2.0, 1.0, 1.0).unwrap();
        let post = prior.update(&DMatrix::zeros(0, 3), &DVector::zeros(0)).unwrap();
        assert_eq!(post.mean(), prior.mean());
        assert_eq!(post.shape(), prior.shape());
        assert_eq!(post.scale(), prior.scale());
    }

    #[test]
    fn nig_mean_is_ridge() {
        let (x, y) = random_problem(11, 20, 3);
        let (xm, yv) = (to_mat(&x), DVector::from_vec(y));
        let post = NigPosterior::ridge_prior(3, 0.7, 2.0, 1.0).unwrap().update(&xm, &yv).unwrap();
        let ridge = ridge_fit(&xm, &yv, 0.7).unwrap();
        assert!((post.mean() - ridge).amax() < 1e-12);
    }

    #[test]
    fn nig_two_single_rows_equal_one_batch() {
        let (x, y) = random_problem(12, 2, 3);
        let prior = NigPosterior::new(
            DVector::from_vec(vec![0.1, -0.2, 0.3]),
            DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]),
            1.5,
            0.8,
        )
        .unwrap();
        let seq = prior
            .update(&to_mat(&x[..1]), &DVector::from_vec(y[..1].to_vec()))
            .unwrap()
            .update(&to_mat(&x[1..]), &DVector::from_vec(y[1..].to_vec()))
            .unwrap();
        let batch = prior.update(&to_mat(&x), &DVector::from_vec(y)).unwrap();
        assert!((seq.mean() - batch.mean()).amax() < 1e-10);
        assert!((seq.sigma_scale() - batch.sigma_scale()).amax() < 1e-10);
        assert!((seq.shape() - batch.shape()).abs() < 1e-10);
        assert!((seq.scale() - batch.scale()).abs() < 1e-10);
    }

    #[test]
    fn nig_degenerate_draw_is_mean() {
        let mu = DVector::from_vec(vec![1.0, -2.0]);
        let post = NigPosterior::new(mu.clone(), DMatrix::identity(2, 2) * 1e-20, 3.0, 1.0).unwrap();
        let (beta, s2) = post.sample(&mut RngSpec::new(1, 1).stream()).unwrap();
        assert!((beta - mu).amax() < 1e-8);
        assert!(s2 > 0.0);
    }

    #[test]
    fn nig_sample_replays() {
        let post = NigPosterior::ridge_prior(3, 1.0, 2.0, 2.0).unwrap();
        let a = post.sample(&mut RngSpec::new(5, 2).stream()).unwrap();
        let b = post.sample(&mut RngSpec::new(5, 2).stream()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nig_monte_carlo_mean() {
        // Marginal of beta is multivariate t with a = 5 > 1, so mean = mu and
        // Var(beta_j) = b / (a - 1) * Sigma_jj.
        let mu = DVector::from_vec(vec![0.5, -1.0]);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]);
        let (a, b) = (5.0, 2.0);
        let post = NigPosterior::new(mu.clone(), sigma.clone(), a, b).unwrap();
        let mut rng = RngSpec::new(77, 0).stream();
        let n = 100_000;
        let mut sum = DVector::zeros(2);
        for _ in 0..n {
            sum += post.sample(&mut rng).unwrap().0;
        }
        let mean = sum / n as f64;
        for j in 0..2 {
            let se = libm::sqrt(b / (a - 1.0) * sigma[(j, j)] / n as f64);
            assert!((mean[j] - mu[j]).abs() < 4.0 * se, "component {j}: {} vs {}", mean[j], mu[j]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn incremental_equals_batch(seed in 0u64..10_000, n in 1usize..30, d in 1usize..6, lambda in 0.1f64..5.0) {
            let (x, y) = random_problem(seed, n, d);
            let mut s = SuffStats::new(d, lambda).unwrap();
            for (row, &yi) in x.iter().zip(&y) {
                s.update(row, yi).unwrap();
            }
            let batch = ridge_fit(&to_mat(&x), &DVector::from_vec(y), lambda).unwrap();
            let scale = batch.amax().max(1e-12);
            prop_assert!((s.mean() - &batch).amax() / scale < 1e-8);
        }

        #[test]
        fn nig_order_invariant(seed in 0u64..10_000, n in 2usize..15) {
            let (x, y) = random_problem(seed, n, 3);
            let prior = NigPosterior::ridge_prior(3, 1.0, 1.0, 1.0).unwrap();
            let fwd = prior.update(&to_mat(&x), &DVector::from_vec(y.clone())).unwrap();
            let rx: Vec<Vec<f64>> = x.iter().rev().cloned().collect();
            let ry: Vec<f64> = y.iter().rev().copied().collect();
            let rev = prior.update(&to_mat(&rx), &DVector::from_vec(ry)).unwrap();
            prop_assert!((fwd.mean() - rev.mean()).amax() < 1e-10);
            prop_assert!((fwd.scale() - rev.scale()).abs() < 1e-10);
        }
    }
}
