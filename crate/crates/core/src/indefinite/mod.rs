//! Estimators for indefinite-horizon Markov decision processes where
//! paths end in an absorbing state or are censored.
//!
//! Features of the absorbing state are identically zero. Transitions whose
//! successor was never observed contribute nothing.

use alloc::vec::Vec;

use crate::domain::{Dataset, Horizon, NextState, StateVector};
use crate::error::{invalid, Error, Result};
use crate::features::FeatureMap;

pub mod ggq;
pub mod nelder_mead;
pub mod vlearn;

pub use ggq::{ggq_fit, GgqFit, GgqObjective, GgqOptions};
pub use nelder_mead::{nelder_mead, Minimum, SimplexOptions};
pub use vlearn::{vlearning_evaluate, vlearning_fit, VEvaluation, VLearningFit, VLearningSpec};

/// One observed `(X_t, A_t, Y_{t+1}, X_{t+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovStep<'a> {
    pub traj: usize,
    pub stage: usize,
    pub state: &'a StateVector,
    pub action: usize,
    pub reward: f64,
    pub behavior_prob: Option<f64>,
    /// `None` for the absorbing state.
    pub next: Option<&'a StateVector>,
}

/// Every observed transition in data order; transitions whose successor
/// was not recorded are skipped.
pub fn markov_steps(data: &Dataset) -> Result<Vec<MarkovStep<'_>>> {
    if data.horizon != Horizon::Indefinite {
        return Err(invalid("indefinite-horizon estimators need an indefinite dataset"));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = Vec::new();
    for (i, traj) in data.trajectories.iter().enumerate() {
        for (t, rec) in traj.stages.iter().enumerate() {
            let reward = rec.reward.ok_or(Error::MissingReward { traj: i, stage: t })?;
            let next = match traj.next_state(t) {
                NextState::State(x) => Some(x),
                NextState::Absorbing => None,
                NextState::Unobserved => continue,
            };
            out.push(MarkovStep {
                traj: i,
                stage: t,
                state: &rec.state,
                action: rec.action.0,
                reward,
                behavior_prob: rec.behavior_prob,
                next,
            });
        }
    }
    Ok(out)
}

/// State-action features of a step and of every successor action.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Transition {
    pub psi: Vec<f64>,
    pub reward: f64,
    /// `psi(X_{t+1}, a')` for each `a'`; empty when absorbing.
    pub next: Vec<Vec<f64>>,
}

pub(crate) fn markov_transitions(data: &Dataset, map: &FeatureMap) -> Result<Vec<Transition>> {
    markov_steps(data)?
        .into_iter()
        .map(|s| {
            let next = match s.next {
                Some(x) => {
                    let n = map.summarize_state(x)?;
                    (0..map.n_actions).map(|a| map.features(&n, a)).collect()
                }
                None => Vec::new(),
            };
            Ok(Transition { psi: map.features(&map.summarize_state(s.state)?, s.action), reward: s.reward, next })
        })
        .collect()
}
