//! Action-centered Thompson sampling for send/no-send decisions.
//!
//! Arm 0 is the control. Each round picks a candidate arm among the
//! available non-control arms, then sends it with a clipped posterior
//! probability that its effect is positive. Learning uses the centered
//! feature `f (1{sent} - pi)`, which removes any action-independent baseline.

use alloc::vec::Vec;
use rand::Rng;

use super::{linear_scores, Agent, ArmFeatures, Decision};
use crate::error::{invalid, Error, Result};
use crate::regime::masked_max;
use crate::regression::SuffStats;
use crate::rng::Stream;

#[derive(Debug, Clone)]
pub struct Acts {
    stats: SuffStats,
    nu: f64,
    pi_min: f64,
    pi_max: f64,
    draws: usize,
    uniform_candidate: bool,
}

impl Acts {
    pub fn new(dim: usize, nu: f64, lambda: f64, pi_min: f64, pi_max: f64, draws: usize, uniform_candidate: bool) -> Result<Self> {
        if !(pi_min > 0.0 && pi_min <= pi_max && pi_max < 1.0) {
            return Err(Error::ClipBoundsInvalid(pi_min, pi_max));
        }
        if !(nu >= 0.0) || draws == 0 {
            return Err(invalid("ACTS needs nu >= 0 and at least one posterior draw"));
        }
        Ok(Self { stats: SuffStats::new(dim, lambda)?, nu, pi_min, pi_max, draws, uniform_candidate })
    }

    pub fn stats(&self) -> &SuffStats {
        &self.stats
    }

    /// Clipped posterior probability that `f . mu > 0`, from `draws` samples.
    pub fn send_probability(&self, f: &[f64], rng: &mut Stream) -> f64 {
        let positive = (0..self.draws)
            .filter(|_| {
                let mu = self.stats.sample(self.nu, rng);
                f.iter().zip(mu.iter()).map(|(a, b)| a * b).sum::<f64>() > 0.0
            })
            .count();
        (positive as f64 / self.draws as f64).clamp(self.pi_min, self.pi_max)
    }
}

impl Agent for Acts {
    fn name(&self) -> &'static str {
        "acts"
    }

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision> {
        arms.check(self.stats.dim())?;
        let k = arms.arms();
        let candidates: Vec<usize> = arms.available_arms().filter(|&a| a != 0).collect();
        if candidates.is_empty() {
            return Ok(Decision::greedy(0, k));
        }
        let candidate = if self.uniform_candidate {
            candidates[rng.random_range(0..candidates.len())]
        } else {
            let mu = self.stats.sample(self.nu, rng);
            let mut mask = alloc::vec![false; k];
            candidates.iter().for_each(|&a| mask[a] = true);
            masked_max(&linear_scores(arms, mu.as_slice()), &mask).expect("non-empty candidates")
        };
        let pi = self.send_probability(&arms.features[candidate], rng);
        let arm = if rng.random::<f64>() < pi { candidate } else { 0 };
        let mut probs = alloc::vec![0.0; k];
        probs[0] = 1.0 - pi;
        probs[candidate] = pi;
        Ok(Decision { arm, probs: Some(probs), send_prob: Some(pi), candidate: Some(candidate) })
    }

    fn absorb(&mut self, arms: &ArmFeatures, d: &Decision, reward: Option<f64>, _rng: &mut Stream) -> Result<()> {
        let (Some(y), Some(pi), Some(c)) = (reward, d.send_prob, d.candidate) else { return Ok(()) };
        let centered = f64::from(u8::from(d.arm != 0)) - pi;
        let f: Vec<f64> = arms.features[c].iter().map(|v| v * centered).collect();
        self.stats.update(&f, y)
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        Some(self.stats.mean().as_slice().to_vec())
    }
}
