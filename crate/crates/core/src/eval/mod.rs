//! Experiment drivers and metrics: regret curves, Monte-Carlo values,
//! regime agreement and the double-robustness study.

use alloc::vec::Vec;

use crate::domain::{discounted_return, Dataset};
use crate::envs::SmartSpec;
use crate::error::{Error, Result};
use crate::regime::Regime;
use crate::rng::Stream;

pub mod dr;
pub mod regret;

pub use dr::{dr_replicate, DrReplicate, DrSummary};
pub use regret::{run_bandit, BanditRun, Player, RegretSummary, RunOptions};

/// Sample mean and its standard error over `n` draws of `f`.
pub fn monte_carlo(n: usize, rng: &mut Stream, mut f: impl FnMut(&mut Stream) -> Result<f64>) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::EmptyInput);
    }
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=n {
        let v = f(rng)?;
        let delta = v - mean;
        mean += delta / k as f64;
        m2 += delta * (v - mean);
    }
    Ok((mean, libm::sqrt(m2 / (n - 1) as f64 / n as f64)))
}

/// Monte-Carlo value of a regime in the two-stage trial.
pub fn smart_regime_value(spec: &SmartSpec, regime: &Regime, gamma: f64, n: usize, rng: &mut Stream) -> Result<(f64, f64)> {
    monte_carlo(n, rng, |rng| {
        let tr = spec.simulate_one(Some(regime), rng)?;
        discounted_return(&tr.complete_rewards(0)?, gamma)
    })
}

/// Per-stage fraction of observed histories on which two regimes choose
/// the same action.
pub fn regime_agreement(a: &Regime, b: &Regime, data: &Dataset) -> Result<Vec<f64>> {
    let stages = data.trajectories.iter().map(|t| t.len()).max().ok_or(Error::EmptyInput)?;
    let mut hits = alloc::vec![0usize; stages];
    let mut seen = alloc::vec![0usize; stages];
    for tr in &data.trajectories {
        for t in 0..tr.len() {
            seen[t] += 1;
            if a.decide(tr, t)? == b.decide(tr, t)? {
                hits[t] += 1;
            }
        }
    }
    Ok(hits.iter().zip(&seen).map(|(&h, &s)| if s == 0 { 1.0 } else { h as f64 / s as f64 }).collect())
}
