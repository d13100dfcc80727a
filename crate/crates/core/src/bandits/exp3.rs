//! Adversarial multi-armed bandit with exponential weights.

use alloc::vec;
use alloc::vec::Vec;

use super::{Agent, ArmFeatures, Decision};
use crate::error::{invalid, Error, Result};
use crate::regime::{sample_index, softmax};
use crate::rng::Stream;

/// EXP3 with uniform mixing `gamma`. Rewards must lie in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Exp3 {
    log_weights: Vec<f64>,
    gamma: f64,
}

impl Exp3 {
    pub fn new(arms: usize, gamma: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::EmptyInput);
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(invalid("EXP3 mixing gamma must lie in (0, 1]"));
        }
        Ok(Self { log_weights: vec![0.0; arms], gamma })
    }

    /// Selection distribution over available arms.
    pub fn probabilities(&self, available: &[bool]) -> Vec<f64> {
        let scores: Vec<f64> = self.log_weights.iter().zip(available).map(|(&w, &ok)| if ok { w } else { f64::NEG_INFINITY }).collect();
        let k = available.iter().filter(|&&ok| ok).count() as f64;
        softmax(&scores, 1.0)
            .into_iter()
            .zip(available)
            .map(|(p, &ok)| if ok { (1.0 - self.gamma) * p + self.gamma / k } else { 0.0 })
            .collect()
    }
}

impl Agent for Exp3 {
    fn name(&self) -> &'static str {
        "exp3"
    }

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision> {
        if arms.available.len() != self.log_weights.len() {
            return Err(Error::DimensionMismatch { expected: self.log_weights.len(), got: arms.available.len() });
        }
        if !arms.available.iter().any(|&v| v) {
            return Err(Error::NoAvailableArm);
        }
        let probs = self.probabilities(&arms.available);
        let arm = sample_index(&probs, rng);
        Ok(Decision { arm, probs: Some(probs), ..Decision::default() })
    }

    fn absorb(&mut self, arms: &ArmFeatures, d: &Decision, reward: Option<f64>, _rng: &mut Stream) -> Result<()> {
        let Some(r) = reward else { return Ok(()) };
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::RewardOutOfRange(r));
        }
        let p = match &d.probs {
            Some(p) => p[d.arm],
            None => self.probabilities(&arms.available)[d.arm],
        };
        let k = arms.available.iter().filter(|&&ok| ok).count() as f64;
        self.log_weights[d.arm] += self.gamma * r / (k * p);
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.log_weights.iter_mut().for_each(|w| *w -= top);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::SwitchingBernoulli;
    use crate::rng::RngSpec;

    #[test]
    fn probabilities_have_exploration_floor() {
        let mut agent = Exp3::new(3, 0.1).unwrap();
        let arms = ArmFeatures::new(vec![vec![]; 3]);
        let mut rng = RngSpec::new(0, 0).stream();
        for _ in 0..2000 {
            let d = agent.step(&arms, &mut rng).unwrap();
            let r = if d.arm == 0 { 1.0 } else { 0.0 };
            agent.absorb(&arms, &d, Some(r), &mut rng).unwrap();
            let p = agent.probabilities(&arms.available);
            assert!(p.iter().all(|&v| v >= 0.1 / 3.0 - 1e-15));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_reward_rejected() {
        let mut agent = Exp3::new(2, 0.1).unwrap();
        let arms = ArmFeatures::new(vec![vec![]; 2]);
        let mut rng = RngSpec::new(0, 0).stream();
        let d = agent.step(&arms, &mut rng).unwrap();
        assert_eq!(agent.absorb(&arms, &d, Some(1.5), &mut rng).unwrap_err(), Error::RewardOutOfRange(1.5));
    }

    #[test]
    fn tracks_a_switch() {
        let env = SwitchingBernoulli::default();
        let mut agent = Exp3::new(2, 0.1).unwrap();
        let arms = env.round();
        let mut rng = RngSpec::new(7, 0).stream();
        let mut after = 0usize;
        for t in 0..10_000 {
            let d = agent.step(&arms, &mut rng).unwrap();
            let r = env.pull(t, d.arm, &mut rng);
            agent.absorb(&arms, &d, Some(r), &mut rng).unwrap();
            if t >= env.switch_at && d.arm == 1 {
                after += 1;
            }
        }
        assert!(after as f64 / 5000.0 > 0.6, "{after}");
    }
}
