//! Online agents for linear contextual bandits.
//!
//! An agent proposes an arm with [`Agent::step`], which never mutates it,
//! and learns from the outcome with [`Agent::absorb`]. Missing rewards are
//! absorbed as no-ops.

use alloc::boxed::Box;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

pub mod actor_critic;
pub mod acts;
pub mod baseline;
pub mod bts;
pub mod centered;
pub mod exp3;
pub mod lints;
pub mod linucb;

pub use actor_critic::{ActorCritic, PolicyFeatures};
pub use acts::Acts;
pub use baseline::{Boltzmann, EpsilonGreedy, Uniform};
pub use bts::{BootstrapWeights, Bts};
pub use centered::{centered_estimate, uncentered_estimate, CenteredAgent, CenteredVariant, LogEntry};
pub use exp3::Exp3;
pub use lints::{LinTs, TsPrior};
pub use linucb::LinUcb;

/// Per-round observation: one feature vector per arm plus an availability mask.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmFeatures {
    /// Shared context, used by agents that parameterize a policy directly.
    #[serde(default)]
    pub context: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    pub available: Vec<bool>,
}

impl ArmFeatures {
    /// All arms available, empty context.
    pub fn new(features: Vec<Vec<f64>>) -> Self {
        let available = alloc::vec![true; features.len()];
        Self { context: Vec::new(), features, available }
    }

    pub fn arms(&self) -> usize {
        self.features.len()
    }

    pub fn available_arms(&self) -> impl Iterator<Item = usize> + '_ {
        self.available.iter().enumerate().filter(|(_, &ok)| ok).map(|(a, _)| a)
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        if self.available.len() != self.features.len() {
            return Err(Error::DimensionMismatch { expected: self.features.len(), got: self.available.len() });
        }
        if !self.available.iter().any(|&v| v) {
            return Err(Error::NoAvailableArm);
        }
        for f in &self.features {
            if f.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: f.len() });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput("arm features"));
            }
        }
        Ok(())
    }
}

/// An agent's choice for one round.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Decision {
    pub arm: usize,
    /// Selection distribution over all arms, when the agent knows it.
    pub probs: Option<Vec<f64>>,
    /// Send probability of the candidate arm (control-arm agents).
    pub send_prob: Option<f64>,
    /// Candidate non-control arm considered this round.
    pub candidate: Option<usize>,
}

impl Decision {
    pub(crate) fn greedy(arm: usize, arms: usize) -> Self {
        let mut p = alloc::vec![0.0; arms];
        p[arm] = 1.0;
        Self { arm, probs: Some(p), ..Self::default() }
    }
}

pub trait Agent {
    fn name(&self) -> &'static str;

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision>;

    fn absorb(&mut self, arms: &ArmFeatures, decision: &Decision, reward: Option<f64>, rng: &mut Stream) -> Result<()>;

    /// Current reward-parameter estimate, if the agent keeps one.
    fn estimate(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Serializable agent configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "agent", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    LinUcb {
        alpha: f64,
        #[serde(default = "unit")]
        lambda: f64,
    },
    LinTs {
        nu: f64,
        #[serde(default = "unit")]
        lambda: f64,
        /// `(a0, b0)` switches to a normal-inverse-gamma posterior.
        #[serde(default)]
        nig: Option<(f64, f64)>,
    },
    Bts {
        replicates: usize,
        #[serde(default = "unit")]
        lambda: f64,
    },
    Acts {
        nu: f64,
        pi_min: f64,
        pi_max: f64,
        #[serde(default = "unit")]
        lambda: f64,
        #[serde(default = "default_draws")]
        draws: usize,
        #[serde(default)]
        uniform_candidate: bool,
    },
    Centered {
        variant: CenteredVariant,
        #[serde(default = "unit")]
        nu: f64,
        #[serde(default = "unit")]
        lambda: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_draws")]
        draws: usize,
    },
    ActorCritic {
        lambda_actor: f64,
        #[serde(default = "unit")]
        lambda_critic: f64,
        #[serde(default = "default_lr")]
        learning_rate: f64,
        #[serde(default = "default_iters")]
        iterations: usize,
        #[serde(default)]
        policy_features: PolicyFeatures,
    },
    Exp3 {
        gamma: f64,
    },
    EpsilonGreedy {
        epsilon: f64,
        #[serde(default = "unit")]
        lambda: f64,
    },
    Boltzmann {
        temperature: f64,
        #[serde(default = "unit")]
        lambda: f64,
    },
    Uniform,
}

fn unit() -> f64 {
    1.0
}

fn default_draws() -> usize {
    200
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_lr() -> f64 {
    0.5
}

fn default_iters() -> usize {
    10
}

impl AgentSpec {
    /// Builds the agent for `arms` arms with `dim`-dimensional features and
    /// `context_dim` shared context.
    pub fn build(&self, dim: usize, arms: usize, context_dim: usize) -> Result<Box<dyn Agent>> {
        Ok(match *self {
            AgentSpec::LinUcb { alpha, lambda } => Box::new(LinUcb::new(dim, alpha, lambda)?),
            AgentSpec::LinTs { nu, lambda, nig } => {
                let prior = match nig {
                    Some((a, b)) => TsPrior::Nig { a, b },
                    None => TsPrior::Gaussian { nu },
                };
                Box::new(LinTs::new(dim, lambda, prior)?)
            }
            AgentSpec::Bts { replicates, lambda } => Box::new(Bts::new(dim, replicates, lambda, BootstrapWeights::DoubleOrNothing)?),
            AgentSpec::Acts { nu, pi_min, pi_max, lambda, draws, uniform_candidate } => {
                Box::new(Acts::new(dim, nu, lambda, pi_min, pi_max, draws, uniform_candidate)?)
            }
            AgentSpec::Centered { variant, nu, lambda, epsilon, draws } => {
                Box::new(CenteredAgent::new(dim, variant, nu, lambda, epsilon, draws)?)
            }
            AgentSpec::ActorCritic { lambda_actor, lambda_critic, learning_rate, iterations, policy_features } => {
                Box::new(ActorCritic::new(dim, context_dim, policy_features, lambda_critic, lambda_actor, learning_rate, iterations)?)
            }
            AgentSpec::Exp3 { gamma } => Box::new(Exp3::new(arms, gamma)?),
            AgentSpec::EpsilonGreedy { epsilon, lambda } => Box::new(EpsilonGreedy::new(dim, epsilon, lambda)?),
            AgentSpec::Boltzmann { temperature, lambda } => Box::new(Boltzmann::new(dim, temperature, lambda)?),
            AgentSpec::Uniform => Box::new(Uniform),
        })
    }
}

/// Scores `f_a . w` for every arm.
pub(crate) fn linear_scores(arms: &ArmFeatures, w: &[f64]) -> Vec<f64> {
    arms.features.iter().map(|f| f.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
}
