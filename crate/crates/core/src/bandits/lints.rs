//! Linear Thompson sampling.

use alloc::vec::Vec;
use nalgebra::DVector;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{linear_scores, Agent, ArmFeatures, Decision};
use crate::error::{invalid, Result};
use crate::linalg::sample_inv_cov;
use crate::regime::masked_max;
use crate::regression::SuffStats;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TsPrior {
    /// `mu ~ N(B^{-1} b, nu^2 B^{-1})`. `nu = 0` is the greedy agent.
    Gaussian { nu: f64 },
    /// Normal-inverse-gamma with zero prior mean, precision `lambda I` and
    /// `sigma^2 ~ InvGamma(a, b)` a priori.
    Nig { a: f64, b: f64 },
}

#[derive(Debug, Clone)]
pub struct LinTs {
    stats: SuffStats,
    prior: TsPrior,
    sum_sq: f64,
}

impl LinTs {
    pub fn new(dim: usize, lambda: f64, prior: TsPrior) -> Result<Self> {
        match prior {
            TsPrior::Gaussian { nu } if !(nu >= 0.0) => return Err(invalid("Thompson scale nu must be >= 0")),
            TsPrior::Nig { a, b } if !(a > 0.0 && b > 0.0) => return Err(invalid("NIG prior needs a, b > 0")),
            _ => {}
        }
        Ok(Self { stats: SuffStats::new(dim, lambda)?, prior, sum_sq: 0.0 })
    }

    pub fn stats(&self) -> &SuffStats {
        &self.stats
    }

    /// Posterior `(shape, scale)` of `sigma^2` under the NIG prior.
    pub fn noise_posterior(&self) -> Option<(f64, f64)> {
        let TsPrior::Nig { a, b } = self.prior else { return None };
        let mu = self.stats.mean();
        let fit = mu.dot(&(self.stats.gram() * mu));
        Some((a + 0.5 * self.stats.count() as f64, b + 0.5 * (self.sum_sq - fit).max(0.0)))
    }

    /// One posterior draw of the reward parameter.
    pub fn draw(&self, rng: &mut Stream) -> Result<DVector<f64>> {
        let scale = match self.prior {
            TsPrior::Gaussian { nu } => nu,
            TsPrior::Nig { .. } => {
                let (a, b) = self.noise_posterior().expect("nig prior");
                let g = Gamma::new(a, 1.0 / b).map_err(|_| invalid("invalid gamma parameters"))?;
                libm::sqrt(1.0 / g.sample(rng))
            }
        };
        if scale == 0.0 {
            return Ok(self.stats.mean().clone());
        }
        Ok(sample_inv_cov(self.stats.factor(), self.stats.mean(), scale, rng))
    }
}

impl Agent for LinTs {
    fn name(&self) -> &'static str {
        "lints"
    }

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision> {
        arms.check(self.stats.dim())?;
        let mu = self.draw(rng)?;
        let arm = masked_max(&linear_scores(arms, mu.as_slice()), &arms.available).expect("checked availability");
        Ok(Decision { arm, ..Decision::default() })
    }

    fn absorb(&mut self, arms: &ArmFeatures, d: &Decision, reward: Option<f64>, _rng: &mut Stream) -> Result<()> {
        let Some(y) = reward else { return Ok(()) };
        self.stats.update(&arms.features[d.arm], y)?;
        self.sum_sq += y * y;
        Ok(())
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        Some(self.stats.mean().as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandits::LinUcb;
    use crate::regression::NigPosterior;
    use crate::rng::RngSpec;
    use alloc::vec;
    use nalgebra::DMatrix;
    use rand::Rng;

    #[test]
    fn zero_scale_matches_greedy_linucb() {
        let mut ts = LinTs::new(3, 1.0, TsPrior::Gaussian { nu: 0.0 }).unwrap();
        let mut ucb = LinUcb::new(3, 0.0, 1.0).unwrap();
        let mut rng = RngSpec::new(4, 0).stream();
        let mut r2 = RngSpec::new(4, 1).stream();
        for _ in 0..300 {
            let arms = ArmFeatures::new((0..4).map(|_| (0..3).map(|_| r2.random_range(-1.0..1.0)).collect()).collect());
            let a = ts.step(&arms, &mut rng).unwrap();
            let b = ucb.step(&arms, &mut rng).unwrap();
            assert_eq!(a.arm, b.arm);
            let y = arms.features[a.arm][0] + 0.1 * r2.random::<f64>();
            ts.absorb(&arms, &a, Some(y), &mut rng).unwrap();
            ucb.absorb(&arms, &b, Some(y), &mut rng).unwrap();
        }
    }

    #[test]
    fn nig_noise_posterior_matches_conjugate_update() {
        let mut ts = LinTs::new(2, 2.0, TsPrior::Nig { a: 3.0, b: 1.5 }).unwrap();
        let mut rng = RngSpec::new(5, 0).stream();
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..40 {
            let f: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = 0.7 * f[0] - 0.2 * f[1] + rng.random::<f64>();
            ts.absorb(&ArmFeatures::new(vec![f.clone()]), &Decision::greedy(0, 1), Some(y), &mut rng).unwrap();
            rows.extend(f);
            ys.push(y);
        }
        let post = NigPosterior::ridge_prior(2, 2.0, 3.0, 1.5)
            .unwrap()
            .update(&DMatrix::from_row_slice(40, 2, &rows), &DVector::from_vec(ys))
            .unwrap();
        let (a, b) = ts.noise_posterior().unwrap();
        assert!((a - post.shape()).abs() < 1e-12);
        assert!((b - post.scale()).abs() < 1e-9 * post.scale());
        assert!((ts.stats().mean() - post.mean()).amax() < 1e-10);
    }
}
