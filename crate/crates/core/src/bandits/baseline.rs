//! Reference agents: uniform, epsilon-greedy and Boltzmann exploration on a
//! ridge estimate.

use alloc::vec::Vec;

use super::{linear_scores, Agent, ArmFeatures, Decision};
use crate::error::{invalid, Result};
use crate::regime::{masked_max, sample_index, softmax};
use crate::regression::SuffStats;
use crate::rng::Stream;

fn uniform_over(available: &[bool]) -> Vec<f64> {
    let k = available.iter().filter(|&&ok| ok).count() as f64;
    available.iter().map(|&ok| if ok { 1.0 / k } else { 0.0 }).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl Agent for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision> {
        if !arms.available.iter().any(|&v| v) {
            return Err(crate::error::Error::NoAvailableArm);
        }
        let probs = uniform_over(&arms.available);
        Ok(Decision { arm: sample_index(&probs, rng), probs: Some(probs), ..Decision::default() })
    }

    fn absorb(&mut self, _: &ArmFeatures, _: &Decision, _: Option<f64>, _: &mut Stream) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    stats: SuffStats,
    epsilon: f64,
}

impl EpsilonGreedy {
    pub fn new(dim: usize, epsilon: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(invalid("epsilon must lie in [0, 1]"));
        }
        Ok(Self { stats: SuffStats::new(dim, lambda)?, epsilon })
    }
}

impl Agent for EpsilonGreedy {
    fn name(&self) -> &'static str {
        "epsilon_greedy"
    }

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision> {
        arms.check(self.stats.dim())?;
        let best = masked_max(&linear_scores(arms, self.stats.mean().as_slice()), &arms.available).expect("checked availability");
        let mut probs: Vec<f64> = uniform_over(&arms.available).into_iter().map(|p| self.epsilon * p).collect();
        probs[best] += 1.0 - self.epsilon;
        Ok(Decision { arm: sample_index(&probs, rng), probs: Some(probs), ..Decision::default() })
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

#[derive(Debug, Clone)]
pub struct Boltzmann {
    stats: SuffStats,
    temperature: f64,
}

impl Boltzmann {
    pub fn new(dim: usize, temperature: f64, lambda: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(invalid("Boltzmann temperature must be positive"));
        }
        Ok(Self { stats: SuffStats::new(dim, lambda)?, temperature })
    }
}

impl Agent for Boltzmann {
    fn name(&self) -> &'static str {
        "boltzmann"
    }

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision> {
        arms.check(self.stats.dim())?;
        let scores: Vec<f64> = linear_scores(arms, self.stats.mean().as_slice())
            .into_iter()
            .zip(&arms.available)
            .map(|(s, &ok)| if ok { s } else { f64::NEG_INFINITY })
            .collect();
        let probs = softmax(&scores, self.temperature);
        Ok(Decision { arm: sample_index(&probs, rng), probs: Some(probs), ..Decision::default() })
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
