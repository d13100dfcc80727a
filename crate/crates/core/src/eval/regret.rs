//! Online bandit runs and regret aggregation.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::bandits::{AgentSpec, Decision, LogEntry};
use crate::envs::{BanditEnv, BanditEnvSpec};
use crate::error::{Error, Result};
use crate::regime::masked_max;
use crate::rng::RngSpec;

/// Who picks the arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    /// Plays the best available arm using the true means.
    Oracle,
    Agent(AgentSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep the per-round log (features, selection distribution, reward).
    pub keep_log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditRun {
    /// Cumulative regret after each round.
    pub cumulative_regret: Vec<f64>,
    pub arms: Vec<usize>,
    pub rewards: Vec<Option<f64>>,
    /// Send probability reported by the agent on each round.
    pub send_probs: Vec<Option<f64>>,
    pub final_estimate: Option<Vec<f64>>,
    pub log: Vec<LogEntry>,
}

/// Runs one seed for `horizon` rounds. The environment draws from
/// `rng.child(0)` and the agent from `rng.child(1)`, so agents facing the
/// same seed see identical contexts.
pub fn run_bandit(player: &Player, env_spec: &BanditEnvSpec, horizon: usize, rng: RngSpec, opts: RunOptions) -> Result<BanditRun> {
    let mut env = BanditEnv::new(env_spec.clone())?;
    let mut env_rng = rng.child(0).stream();
    let mut agent_rng = rng.child(1).stream();
    let mut agent = match player {
        Player::Oracle => None,
        Player::Agent(spec) => Some(spec.build(env_spec.feature_dim(), env_spec.arms, env_spec.context_dim())?),
    };
    let mut run = BanditRun {
        cumulative_regret: Vec::with_capacity(horizon),
        arms: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        send_probs: Vec::with_capacity(horizon),
        final_estimate: None,
        log: Vec::new(),
    };
    let mut total = 0.0;
    for _ in 0..horizon {
        let round = env.observe(&mut env_rng);
        let decision = match agent.as_ref() {
            Some(a) => a.step(&round.arms, &mut agent_rng)?,
            None => {
                let arm = masked_max(&round.means, &round.arms.available).ok_or(Error::NoAvailableArm)?;
                Decision::greedy(arm, round.arms.arms())
            }
        };
        let fb = env.respond(&round, decision.arm, &mut env_rng)?;
        if let Some(a) = agent.as_mut() {
            a.absorb(&round.arms, &decision, fb.reward, &mut agent_rng)?;
        }
        total += fb.regret;
        run.cumulative_regret.push(total);
        run.arms.push(decision.arm);
        run.rewards.push(fb.reward);
        run.send_probs.push(decision.send_prob);
        if opts.keep_log {
            run.log.push(LogEntry { arms: round.arms, arm: decision.arm, probs: decision.probs, reward: fb.reward });
        }
    }
    run.final_estimate = agent.and_then(|a| a.estimate());
    Ok(run)
}

/// Pointwise mean and standard error of cumulative regret across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub seeds: usize,
}

impl RegretSummary {
    /// Curves are folded in the order given.
    pub fn from_curves<'a>(curves: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let curves: Vec<&[f64]> = curves.into_iter().collect();
        let len = curves.first().map(|c| c.len()).ok_or(Error::EmptyInput)?;
        if let Some(c) = curves.iter().find(|c| c.len() != len) {
            return Err(Error::DimensionMismatch { expected: len, got: c.len() });
        }
        let k = curves.len() as f64;
        let mut mean = alloc::vec![0.0; len];
        let mut std_error = alloc::vec![0.0; len];
        for t in 0..len {
            let m = curves.iter().map(|c| c[t]).sum::<f64>() / k;
            mean[t] = m;
            if curves.len() > 1 {
                let var = curves.iter().map(|c| (c[t] - m) * (c[t] - m)).sum::<f64>() / (k - 1.0);
                std_error[t] = libm::sqrt(var / k);
            }
        }
        Ok(Self { mean, std_error, seeds: curves.len() })
    }

    /// Mean cumulative regret after `t` rounds (`t >= 1`).
    pub fn at(&self, t: usize) -> f64 {
        self.mean[t - 1]
    }
}
