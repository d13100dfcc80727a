//! Longitudinal data model: states, actions, stage records, trajectories and
//! datasets, plus realized returns.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Observed state `X_t`. Dimension 0 encodes the context-free case.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("state"));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Index of an action in its stage's action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }

    /// `{-1, +1}` coding for binary problems: 0 maps to -1, anything else to +1.
    pub fn signed_code(self) -> f64 {
        if self.0 == 0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn from_signed(code: f64) -> Self {
        if code > 0.0 {
            ActionId(1)
        } else {
            ActionId(0)
        }
    }
}

/// One `(X_t, A_t, Y_{t+1})` triple with logging metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub state: StateVector,
    pub action: ActionId,
    /// `None` marks a missing reward; never substituted silently.
    pub reward: Option<f64>,
    /// Behavior-policy probability of the action actually taken.
    pub behavior_prob: Option<f64>,
    pub available: bool,
}

impl StageRecord {
    pub fn new(state: StateVector, action: ActionId, reward: Option<f64>, behavior_prob: Option<f64>) -> Self {
        Self { state, action, reward, behavior_prob, available: true }
    }
}

/// What follows the last decision of a trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum Terminal {
    /// Final state not recorded (typical for finite-horizon trials).
    #[default]
    Unobserved,
    /// Absorbing state `c` (death, loss to follow-up).
    Absorbing,
    /// Last observed state of a censored path.
    State(StateVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub stages: Vec<StageRecord>,
    pub terminal: Terminal,
}

impl Trajectory {
    pub fn new(stages: Vec<StageRecord>, terminal: Terminal) -> Result<Self> {
        let traj = Self { stages, terminal };
        traj.validate()?;
        Ok(traj)
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// A trajectory may only be empty when it starts in the absorbing state.
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() && self.terminal != Terminal::Absorbing {
            return Err(Error::EmptyInput);
        }
        let dim = self.stages.first().map(|s| s.state.dim());
        for (t, s) in self.stages.iter().enumerate() {
            if Some(s.state.dim()) != dim {
                return Err(Error::DimensionMismatch { expected: dim.unwrap_or(0), got: s.state.dim() });
            }
            if s.state.0.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput("state"));
            }
            if let Some(r) = s.reward {
                if !r.is_finite() {
                    return Err(Error::NonFiniteInput("reward"));
                }
            }
            if let Some(p) = s.behavior_prob {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::PositivityViolation { traj: 0, stage: t });
                }
            }
        }
        if let (Terminal::State(x), Some(d)) = (&self.terminal, dim) {
            if x.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
            }
        }
        Ok(())
    }

    /// Rewards with missing entries rejected.
    pub fn complete_rewards(&self, traj_index: usize) -> Result<Vec<f64>> {
        self.stages.iter().enumerate().map(|(t, s)| s.reward.ok_or(Error::MissingReward { traj: traj_index, stage: t })).collect()
    }

    /// State following stage `t`: the next stage's state, the terminal state,
    /// or `None` when absorbing / unobserved.
    pub fn next_state(&self, t: usize) -> NextState<'_> {
        if t + 1 < self.stages.len() {
            NextState::State(&self.stages[t + 1].state)
        } else {
            match &self.terminal {
                Terminal::Absorbing => NextState::Absorbing,
                Terminal::State(x) => NextState::State(x),
                Terminal::Unobserved => NextState::Unobserved,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NextState<'a> {
    State(&'a StateVector),
    Absorbing,
    Unobserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    /// Decision stages `0..=T`.
    Finite(usize),
    Indefinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub horizon: Horizon,
    /// Number of actions per stage. Indefinite datasets carry one entry.
    pub action_counts: Vec<usize>,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>, horizon: Horizon, action_counts: Vec<usize>) -> Result<Self> {
        let data = Self { trajectories, horizon, action_counts };
        data.validate()?;
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn state_dim(&self) -> Option<usize> {
        self.trajectories.iter().flat_map(|t| t.stages.first()).map(|s| s.state.dim()).next()
    }

    /// Number of actions available at stage `t`.
    pub fn action_count(&self, t: usize) -> usize {
        match self.horizon {
            Horizon::Finite(_) => self.action_counts.get(t).copied().unwrap_or(0),
            Horizon::Indefinite => self.action_counts.first().copied().unwrap_or(0),
        }
    }

    pub fn stage_count(&self) -> Option<usize> {
        match self.horizon {
            Horizon::Finite(t) => Some(t + 1),
            Horizon::Indefinite => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.state_dim();
        match self.horizon {
            Horizon::Finite(t) if self.action_counts.len() != t + 1 => {
                return Err(invalid("finite-horizon dataset needs one action count per stage"));
            }
            Horizon::Indefinite if self.action_counts.len() != 1 => {
                return Err(invalid("indefinite dataset needs exactly one action count"));
            }
            _ => {}
        }
        for (i, traj) in self.trajectories.iter().enumerate() {
            traj.validate().map_err(|e| match e {
                Error::PositivityViolation { stage, .. } => Error::PositivityViolation { traj: i, stage },
                other => other,
            })?;
            if let Horizon::Finite(t) = self.horizon {
                if traj.len() != t + 1 {
                    return Err(invalid(alloc::format!("trajectory {i} has {} stages, horizon requires {}", traj.len(), t + 1)));
                }
            }
            for (t, s) in traj.stages.iter().enumerate() {
                if Some(s.state.dim()) != dim {
                    return Err(Error::DimensionMismatch { expected: dim.unwrap_or(0), got: s.state.dim() });
                }
                let k = self.action_count(t);
                if s.action.0 >= k {
                    return Err(Error::IndexOutOfRange { index: s.action.0, bound: k });
                }
            }
        }
        Ok(())
    }

    pub fn has_missing_rewards(&self) -> bool {
        self.trajectories.iter().any(|t| t.stages.iter().any(|s| s.reward.is_none()))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(alloc::format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(())
}

/// `sum_tau gamma^tau * rewards[tau]` for a finite reward list.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFiniteInput("reward"));
    }
    // Horner form keeps the one-step recursion exact in floating point.
    Ok(rewards.iter().rev().fold(0.0, |acc, &r| r + gamma * acc))
}

/// Like [`discounted_return`], rejecting undiscounted sums over indefinite streams.
pub fn stream_return(rewards: &[f64], gamma: f64, horizon: Horizon) -> Result<f64> {
    if horizon == Horizon::Indefinite && gamma >= 1.0 {
        return Err(Error::DivergentReturn);
    }
    discounted_return(rewards, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn return_examples() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.0).unwrap(), 1.0);
        assert_eq!(discounted_return(&[1.0, 2.0, 3.0], 1.0).unwrap(), 6.0);
        assert_eq!(discounted_return(&[2.0, 2.0, 2.0], 0.5).unwrap(), 3.5);
    }

    #[test]
    fn return_errors() {
        assert_eq!(discounted_return(&[1.0, f64::NAN], 0.5), Err(Error::NonFiniteInput("reward")));
        assert_eq!(stream_return(&[1.0], 1.0, Horizon::Indefinite), Err(Error::DivergentReturn));
        assert!(stream_return(&[1.0], 0.9, Horizon::Indefinite).is_ok());
        assert!(discounted_return(&[1.0], 1.5).is_err());
    }

    #[test]
    fn signed_coding() {
        assert_eq!(ActionId(0).signed_code(), -1.0);
        assert_eq!(ActionId(1).signed_code(), 1.0);
        assert_eq!(ActionId::from_signed(-1.0), ActionId(0));
    }

    #[test]
    fn empty_trajectory_only_when_absorbing() {
        assert!(Trajectory::new(vec![], Terminal::Absorbing).is_ok());
        assert_eq!(Trajectory::new(vec![], Terminal::Unobserved), Err(Error::EmptyInput));
    }

    #[test]
    fn positivity_checked() {
        let s = StageRecord::new(StateVector(vec![0.0]), ActionId(0), Some(1.0), Some(0.0));
        let traj = Trajectory { stages: vec![s], terminal: Terminal::Unobserved };
        let err = Dataset::new(vec![traj], Horizon::Finite(0), vec![2]).unwrap_err();
        assert_eq!(err, Error::PositivityViolation { traj: 0, stage: 0 });
    }

    #[test]
    fn finite_horizon_length_enforced() {
        let s = StageRecord::new(StateVector(vec![0.0]), ActionId(0), Some(1.0), Some(0.5));
        let traj = Trajectory { stages: vec![s], terminal: Terminal::Unobserved };
        assert!(Dataset::new(vec![traj], Horizon::Finite(1), vec![2, 2]).is_err());
    }

    proptest! {
        #[test]
        fn return_recursion(rewards in prop::collection::vec(-10.0f64..10.0, 2..20), g in prop::sample::select(vec![0.0, 0.5, 1.0])) {
            for t in 0..rewards.len() - 1 {
                let lhs = discounted_return(&rewards[t..], g).unwrap();
                let rhs = rewards[t] + g * discounted_return(&rewards[t + 1..], g).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
