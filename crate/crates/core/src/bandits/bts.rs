//! Bootstrap Thompson sampling.

use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{linear_scores, Agent, ArmFeatures, Decision};
use crate::error::{invalid, Result};
use crate::regime::masked_max;
use crate::regression::SuffStats;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapWeights {
    /// Each replicate sees the observation twice or not at all.
    DoubleOrNothing,
    /// Every replicate sees every observation once.
    Unit,
}

/// `J` ridge replicates; each round plays greedily on one chosen uniformly.
#[derive(Debug, Clone)]
pub struct Bts {
    replicates: Vec<SuffStats>,
    weights: BootstrapWeights,
}

impl Bts {
    pub fn new(dim: usize, replicates: usize, lambda: f64, weights: BootstrapWeights) -> Result<Self> {
        if replicates < 2 {
            return Err(invalid("bootstrap Thompson sampling needs at least 2 replicates"));
        }
        let reps = (0..replicates).map(|_| SuffStats::new(dim, lambda)).collect::<Result<Vec<_>>>()?;
        Ok(Self { replicates: reps, weights })
    }

    pub fn replicates(&self) -> &[SuffStats] {
        &self.replicates
    }
}

impl Agent for Bts {
    fn name(&self) -> &'static str {
        "bts"
    }

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision> {
        arms.check(self.replicates[0].dim())?;
        let j = rng.random_range(0..self.replicates.len());
        let scores = linear_scores(arms, self.replicates[j].mean().as_slice());
        let arm = masked_max(&scores, &arms.available).expect("checked availability");
        Ok(Decision { arm, ..Decision::default() })
    }

    fn absorb(&mut self, arms: &ArmFeatures, d: &Decision, reward: Option<f64>, rng: &mut Stream) -> Result<()> {
        let Some(y) = reward else { return Ok(()) };
        let f = &arms.features[d.arm];
        for rep in &mut self.replicates {
            let w = match self.weights {
                BootstrapWeights::DoubleOrNothing => {
                    if rng.random::<bool>() {
                        2.0
                    } else {
                        0.0
                    }
                }
                BootstrapWeights::Unit => 1.0,
            };
            rep.update_weighted(f, y, w)?;
        }
        Ok(())
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        let j = self.replicates.len() as f64;
        let dim = self.replicates[0].dim();
        Some((0..dim).map(|i| self.replicates.iter().map(|r| r.mean()[i]).sum::<f64>() / j).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;
    use alloc::vec;

    #[test]
    fn fewer_than_two_replicates_rejected() {
        assert!(Bts::new(2, 1, 1.0, BootstrapWeights::DoubleOrNothing).is_err());
    }

    #[test]
    fn unit_weights_reproduce_plain_ridge() {
        let mut bts = Bts::new(2, 5, 1.0, BootstrapWeights::Unit).unwrap();
        let mut plain = SuffStats::new(2, 1.0).unwrap();
        let mut rng = RngSpec::new(0, 0).stream();
        for i in 0..50 {
            let f = vec![libm::sin(i as f64), libm::cos(0.3 * i as f64)];
            let y = 0.5 * f[0] + 0.1 * i as f64;
            bts.absorb(&ArmFeatures::new(vec![f.clone()]), &Decision::greedy(0, 1), Some(y), &mut rng).unwrap();
            plain.update(&f, y).unwrap();
        }
        for rep in bts.replicates() {
            assert!((rep.mean() - plain.mean()).amax() < 1e-12);
        }
    }

    #[test]
    fn double_or_nothing_weights_average_one() {
        let mut bts = Bts::new(1, 20, 1.0, BootstrapWeights::DoubleOrNothing).unwrap();
        let mut rng = RngSpec::new(1, 0).stream();
        for _ in 0..500 {
            bts.absorb(&ArmFeatures::new(vec![vec![1.0]]), &Decision::greedy(0, 1), Some(1.0), &mut rng).unwrap();
        }
        let mean_gram: f64 = bts.replicates().iter().map(|r| r.gram()[(0, 0)] - 1.0).sum::<f64>() / 20.0;
        assert!((mean_gram / 500.0 - 1.0).abs() < 0.05);
    }
}
