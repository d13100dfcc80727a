//! Actor-critic for binary send/no-send decisions.
//!
//! The actor is `pi(1 | x) = expit(g(x) . theta)`. The critic is a ridge fit
//! of rewards on `f(x, a)`. After each round the actor takes gradient-ascent
//! steps on
//! `J(theta) = mean_tau sum_a Yhat_tau(a) pi(a | x_tau) - lambda theta^T E[g g^T] theta`
//! with `Yhat_tau(a) = f(x_tau, a) . mu` from the current critic.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, ArmFeatures, Decision};
use crate::error::{invalid, Error, Result};
use crate::offline::expit;
use crate::regression::SuffStats;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyFeatures {
    /// `g(x) = 1`.
    Intercept,
    /// `g(x) = (1, context)`.
    #[default]
    InterceptAndContext,
}

#[derive(Debug, Clone)]
pub struct ActorCritic {
    critic: SuffStats,
    theta: Vec<f64>,
    policy_features: PolicyFeatures,
    lambda: f64,
    learning_rate: f64,
    iterations: usize,
    /// `(g(x), f(x, 0), f(x, 1))` of every absorbed round.
    past: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// Running `sum g g^T`, row-major.
    ggt: Vec<f64>,
}

impl ActorCritic {
    pub fn new(
        dim: usize,
        context_dim: usize,
        policy_features: PolicyFeatures,
        lambda_critic: f64,
        lambda_actor: f64,
        learning_rate: f64,
        iterations: usize,
    ) -> Result<Self> {
        if !(lambda_actor >= 0.0) || !(learning_rate > 0.0) {
            return Err(invalid("actor-critic needs lambda_actor >= 0 and learning_rate > 0"));
        }
        let q = match policy_features {
            PolicyFeatures::Intercept => 1,
            PolicyFeatures::InterceptAndContext => 1 + context_dim,
        };
        Ok(Self {
            critic: SuffStats::new(dim, lambda_critic)?,
            theta: vec![0.0; q],
            policy_features,
            lambda: lambda_actor,
            learning_rate,
            iterations,
            past: Vec::new(),
            ggt: vec![0.0; q * q],
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn critic(&self) -> &SuffStats {
        &self.critic
    }

    fn policy_vector(&self, arms: &ArmFeatures) -> Result<Vec<f64>> {
        let mut g = vec![1.0];
        if self.policy_features == PolicyFeatures::InterceptAndContext {
            g.extend_from_slice(&arms.context);
        }
        if g.len() != self.theta.len() {
            return Err(Error::DimensionMismatch { expected: self.theta.len(), got: g.len() });
        }
        Ok(g)
    }

    /// `pi(1 | x)`.
    pub fn send_probability(&self, arms: &ArmFeatures) -> Result<f64> {
        let g = self.policy_vector(arms)?;
        Ok(expit(g.iter().zip(&self.theta).map(|(a, b)| a * b).sum()))
    }

    fn ascend(&mut self) {
        let n = self.past.len() as f64;
        let q = self.theta.len();
        let mu = self.critic.mean();
        let trace: f64 = (0..q).map(|i| self.ggt[i * q + i]).sum::<f64>() / n;
        let step = self.learning_rate / (1.0 + 2.0 * self.lambda * trace);
        let contrasts: Vec<f64> =
            self.past.iter().map(|(_, f0, f1)| f1.iter().zip(f0).zip(mu.iter()).map(|((a, b), m)| (a - b) * m).sum()).collect();
        for _ in 0..self.iterations {
            let mut grad = vec![0.0; q];
            for ((g, _, _), c) in self.past.iter().zip(&contrasts) {
                let p = expit(g.iter().zip(&self.theta).map(|(a, b)| a * b).sum());
                let w = c * p * (1.0 - p) / n;
                grad.iter_mut().zip(g).for_each(|(gr, gi)| *gr += w * gi);
            }
            for i in 0..q {
                let s: f64 = (0..q).map(|j| self.ggt[i * q + j] * self.theta[j]).sum::<f64>() / n;
                grad[i] -= 2.0 * self.lambda * s;
            }
            self.theta.iter_mut().zip(&grad).for_each(|(t, g)| *t += step * g);
        }
    }
}

impl Agent for ActorCritic {
    fn name(&self) -> &'static str {
        "actor_critic"
    }

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision> {
        if arms.arms() != 2 {
            return Err(Error::NonBinaryAction(arms.arms().saturating_sub(1)));
        }
        arms.check(self.critic.dim())?;
        let p1 = if arms.available[1] { self.send_probability(arms)? } else { 0.0 };
        let p1 = if arms.available[0] { p1 } else { 1.0 };
        let arm = usize::from(rng.random::<f64>() < p1);
        Ok(Decision { arm, probs: Some(vec![1.0 - p1, p1]), send_prob: Some(p1), candidate: Some(1) })
    }

    fn absorb(&mut self, arms: &ArmFeatures, d: &Decision, reward: Option<f64>, _rng: &mut Stream) -> Result<()> {
        if d.arm > 1 || arms.arms() != 2 {
            return Err(Error::NonBinaryAction(d.arm.max(arms.arms().saturating_sub(1))));
        }
        let Some(y) = reward else { return Ok(()) };
        self.critic.update(&arms.features[d.arm], y)?;
        let g = self.policy_vector(arms)?;
        let q = g.len();
        for i in 0..q {
            for j in 0..q {
                self.ggt[i * q + j] += g[i] * g[j];
            }
        }
        self.past.push((g, arms.features[0].clone(), arms.features[1].clone()));
        self.ascend();
        Ok(())
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        Some(self.critic.mean().as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;

    fn round(x: f64) -> ArmFeatures {
        ArmFeatures { context: vec![x], features: vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, x]], available: vec![true, true] }
    }

    #[test]
    fn rejects_more_than_two_arms() {
        let agent = ActorCritic::new(1, 0, PolicyFeatures::Intercept, 1.0, 0.1, 0.5, 5).unwrap();
        let arms = ArmFeatures::new(vec![vec![0.0], vec![1.0], vec![2.0]]);
        assert_eq!(agent.step(&arms, &mut RngSpec::new(0, 0).stream()).unwrap_err(), Error::NonBinaryAction(2));
    }

    #[test]
    fn huge_penalty_keeps_policy_uniform() {
        let mut agent = ActorCritic::new(3, 1, PolicyFeatures::InterceptAndContext, 1.0, 1e9, 0.5, 10).unwrap();
        let mut rng = RngSpec::new(1, 0).stream();
        for _ in 0..300 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let arms = round(x);
            let d = agent.step(&arms, &mut rng).unwrap();
            let y = if d.arm == 1 { 2.0 + x } else { 0.0 };
            agent.absorb(&arms, &d, Some(y), &mut rng).unwrap();
        }
        assert!(agent.theta().iter().all(|t| t.abs() < 1e-6));
        assert!((agent.send_probability(&round(0.5)).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn learns_to_send_when_sending_helps() {
        let mut agent = ActorCritic::new(3, 1, PolicyFeatures::InterceptAndContext, 1.0, 0.01, 0.5, 10).unwrap();
        let mut rng = RngSpec::new(2, 0).stream();
        for _ in 0..500 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let arms = round(x);
            let d = agent.step(&arms, &mut rng).unwrap();
            let y = if d.arm == 1 { 1.0 } else { 0.0 } + 0.1 * rng.random::<f64>();
            agent.absorb(&arms, &d, Some(y), &mut rng).unwrap();
        }
        assert!(agent.send_probability(&round(0.0)).unwrap() > 0.8);
    }
}
