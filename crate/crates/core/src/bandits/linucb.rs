//! Optimism-based linear agent.

use alloc::vec::Vec;

use super::{Agent, ArmFeatures, Decision};
use crate::error::{invalid, Result};
use crate::regime::masked_max;
use crate::regression::SuffStats;
use crate::rng::Stream;

/// Picks `argmax_a f_a . mu + alpha sqrt(f_a^T B^{-1} f_a)`.
#[derive(Debug, Clone)]
pub struct LinUcb {
    stats: SuffStats,
    alpha: f64,
}

impl LinUcb {
    pub fn new(dim: usize, alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(invalid("LinUCB alpha must be >= 0"));
        }
        Ok(Self { stats: SuffStats::new(dim, lambda)?, alpha })
    }

    pub fn stats(&self) -> &SuffStats {
        &self.stats
    }

    pub fn scores(&self, arms: &ArmFeatures) -> Vec<f64> {
        let mu = self.stats.mean();
        arms.features
            .iter()
            .map(|f| {
                let mean: f64 = f.iter().zip(mu.iter()).map(|(a, b)| a * b).sum();
                if self.alpha == 0.0 {
                    mean
                } else {
                    mean + self.alpha * libm::sqrt(self.stats.inv_quad(f))
                }
            })
            .collect()
    }
}

impl Agent for LinUcb {
    fn name(&self) -> &'static str {
        "linucb"
    }

    fn step(&self, arms: &ArmFeatures, _rng: &mut Stream) -> Result<Decision> {
        arms.check(self.stats.dim())?;
        let arm = masked_max(&self.scores(arms), &arms.available).expect("checked availability");
        Ok(Decision::greedy(arm, arms.arms()))
    }

    fn absorb(&mut self, arms: &ArmFeatures, d: &Decision, reward: Option<f64>, _rng: &mut Stream) -> Result<()> {
        match reward {
            Some(y) => self.stats.update(&arms.features[d.arm], y),
            None => Ok(()),
        }
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        Some(self.stats.mean().as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;
    use alloc::vec;

    #[test]
    fn picks_exploration_bonus_when_means_tie() {
        let mut agent = LinUcb::new(2, 1.0, 1.0).unwrap();
        let mut rng = RngSpec::new(0, 0).stream();
        let arms = ArmFeatures::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        for _ in 0..5 {
            agent.absorb(&arms, &Decision::greedy(0, 2), Some(0.0), &mut rng).unwrap();
        }
        assert_eq!(agent.step(&arms, &mut rng).unwrap().arm, 1);
    }

    #[test]
    fn unavailable_arm_never_chosen() {
        let agent = LinUcb::new(1, 0.5, 1.0).unwrap();
        let mut rng = RngSpec::new(0, 0).stream();
        let arms = ArmFeatures { context: vec![], features: vec![vec![1.0], vec![5.0]], available: vec![true, false] };
        assert_eq!(agent.step(&arms, &mut rng).unwrap().arm, 0);
        let none = ArmFeatures { available: vec![false, false], ..arms };
        assert_eq!(agent.step(&none, &mut rng).unwrap_err(), crate::error::Error::NoAvailableArm);
    }

    #[test]
    fn missing_reward_is_noop() {
        let mut agent = LinUcb::new(1, 0.5, 1.0).unwrap();
        let mut rng = RngSpec::new(0, 0).stream();
        let arms = ArmFeatures::new(vec![vec![1.0]]);
        agent.absorb(&arms, &Decision::greedy(0, 1), None, &mut rng).unwrap();
        assert_eq!(agent.stats().count(), 0);
    }
}
