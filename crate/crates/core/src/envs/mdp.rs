//! Finite Markov decision processes with an absorbing state.
//!
//! States `0..n_states` are transient; index `n_states` is the absorbing state
//! `c`, which has no actions, no reward and is never emitted in a trajectory.
//! Transient states are exposed as one-hot vectors.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{ActionId, Dataset, Horizon, StageRecord, StateVector, Terminal, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::regime::{first_max, sample_index};
use crate::rng::Stream;

/// Default cap on path length; longer paths are censored.
pub const DEFAULT_STEP_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transitions[x][a][x']` over `n_states + 1` targets (last = absorbing).
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// Mean reward `rewards[x][a][x']` for the transition `x -a-> x'`.
    pub rewards: Vec<Vec<Vec<f64>>>,
    /// Standard deviation of Gaussian reward noise.
    #[serde(default)]
    pub reward_noise: f64,
    pub gamma: f64,
    /// Initial distribution over `n_states + 1` states.
    pub initial: Vec<f64>,
}

/// Per-state action probabilities `policy[x][a]`.
pub type MdpPolicy = Vec<Vec<f64>>;

impl MdpSpec {
    pub fn absorbing(&self) -> usize {
        self.n_states
    }

    pub fn validate(&self) -> Result<()> {
        let (s, k) = (self.n_states, self.n_actions);
        if s == 0 || k == 0 {
            return Err(invalid("MDP needs at least one state and one action"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(invalid("MDP discount must lie in [0, 1)"));
        }
        if !(self.reward_noise >= 0.0) {
            return Err(invalid("reward noise must be >= 0"));
        }
        check_simplex(&self.initial, s + 1, "initial distribution")?;
        if self.transitions.len() != s || self.rewards.len() != s {
            return Err(Error::DimensionMismatch { expected: s, got: self.transitions.len().min(self.rewards.len()) });
        }
        for x in 0..s {
            if self.transitions[x].len() != k || self.rewards[x].len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: self.transitions[x].len() });
            }
            for a in 0..k {
                check_simplex(&self.transitions[x][a], s + 1, "transition row")?;
                if self.rewards[x][a].len() != s + 1 || self.rewards[x][a].iter().any(|r| !r.is_finite()) {
                    return Err(invalid("reward rows need n_states + 1 finite entries"));
                }
            }
        }
        Ok(())
    }

    /// One-hot encoding of a transient state.
    pub fn encode(&self, x: usize) -> StateVector {
        let mut v = vec![0.0; self.n_states];
        v[x] = 1.0;
        StateVector(v)
    }

    /// Inverse of [`MdpSpec::encode`].
    pub fn decode(&self, v: &StateVector) -> Result<usize> {
        v.0.iter()
            .position(|&e| e == 1.0)
            .filter(|_| v.dim() == self.n_states)
            .ok_or(invalid("state vector is not a one-hot transient state"))
    }

    /// Expected immediate reward `r(x, a)`.
    pub fn mean_reward(&self, x: usize, a: usize) -> f64 {
        self.transitions[x][a].iter().zip(&self.rewards[x][a]).map(|(p, r)| p * r).sum()
    }

    /// `Q*` by value iteration to sup-norm change below `tol`.
    pub fn optimal_q(&self, tol: f64) -> Vec<Vec<f64>> {
        let (s, k) = (self.n_states, self.n_actions);
        let mut v = vec![0.0; s + 1];
        let mut q = vec![vec![0.0; k]; s];
        loop {
            let mut delta: f64 = 0.0;
            for x in 0..s {
                for a in 0..k {
                    let cont: f64 = self.transitions[x][a].iter().zip(&v).map(|(p, vv)| p * vv).sum();
                    q[x][a] = self.mean_reward(x, a) + self.gamma * cont;
                }
            }
            for x in 0..s {
                let best = q[x].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                delta = delta.max((best - v[x]).abs());
                v[x] = best;
            }
            if delta < tol * (1.0 - self.gamma) {
                return q;
            }
        }
    }

    /// Greedy policy of `Q*`, lowest index on ties.
    pub fn optimal_policy(&self) -> Vec<usize> {
        self.optimal_q(1e-12).iter().map(|row| first_max(row)).collect()
    }

    /// `V^pi` on transient states from `(I - gamma P_pi) V = r_pi`.
    pub fn evaluate(&self, policy: &MdpPolicy) -> Result<Vec<f64>> {
        let s = self.n_states;
        let mut m = DMatrix::<f64>::identity(s, s);
        let mut r = DVector::<f64>::zeros(s);
        for x in 0..s {
            for (a, &pa) in policy[x].iter().enumerate() {
                r[x] += pa * self.mean_reward(x, a);
                for y in 0..s {
                    m[(x, y)] -= self.gamma * pa * self.transitions[x][a][y];
                }
            }
        }
        m.lu().solve(&r).map(|v| v.as_slice().to_vec()).ok_or(Error::SingularSystem)
    }

    /// Expected discounted return from the initial distribution.
    pub fn policy_value(&self, policy: &MdpPolicy) -> Result<f64> {
        let v = self.evaluate(policy)?;
        Ok(v.iter().zip(&self.initial).map(|(a, b)| a * b).sum())
    }

    pub fn deterministic_policy(&self, actions: &[usize]) -> MdpPolicy {
        actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; self.n_actions];
                row[a] = 1.0;
                row
            })
            .collect()
    }

    pub fn uniform_policy(&self) -> MdpPolicy {
        vec![vec![1.0 / self.n_actions as f64; self.n_actions]; self.n_states]
    }

    /// Deterministic chain used in tests and examples: three transient
    /// states, two actions, discount 0.9.
    ///
    /// | state | action 0              | action 1              |
    /// |-------|-----------------------|-----------------------|
    /// | 0     | to 1, reward 0        | to 2, reward 0.2      |
    /// | 1     | to 0, reward 0        | to c, reward 5        |
    /// | 2     | to c, reward 3        | to 0, reward 0        |
    pub fn three_state_example() -> Self {
        let to = |target: usize| {
            let mut row = vec![0.0; 4];
            row[target] = 1.0;
            row
        };
        let rew = |target: usize, r: f64| {
            let mut row = vec![0.0; 4];
            row[target] = r;
            row
        };
        Self {
            n_states: 3,
            n_actions: 2,
            transitions: vec![vec![to(1), to(2)], vec![to(0), to(3)], vec![to(3), to(0)]],
            rewards: vec![vec![rew(1, 0.0), rew(2, 0.2)], vec![rew(0, 0.0), rew(3, 5.0)], vec![rew(3, 3.0), rew(0, 0.0)]],
            reward_noise: 0.0,
            gamma: 0.9,
            initial: vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0],
        }
    }

    /// Simulates one path under `policy`, recording `pi(a | x)` as the
    /// behavior probability. Paths reaching `cap` decisions are censored
    /// with their last state observed.
    pub fn rollout_one(&self, policy: &MdpPolicy, start: usize, cap: usize, rng: &mut Stream) -> Result<Trajectory> {
        let mut stages = Vec::new();
        let mut x = start;
        while x != self.absorbing() {
            if stages.len() == cap {
                return Trajectory::new(stages, Terminal::State(self.encode(x)));
            }
            let a = sample_index(&policy[x], rng);
            let next = sample_index(&self.transitions[x][a], rng);
            let mut r = self.rewards[x][a][next];
            if self.reward_noise > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                r += self.reward_noise * z;
            }
            stages.push(StageRecord::new(self.encode(x), ActionId(a), Some(r), Some(policy[x][a])));
            x = next;
        }
        Trajectory::new(stages, Terminal::Absorbing)
    }

    /// `n_paths` independent paths from the initial distribution.
    pub fn rollout(&self, policy: &MdpPolicy, n_paths: usize, cap: usize, rng: &mut Stream) -> Result<Dataset> {
        self.validate()?;
        if policy.len() != self.n_states || policy.iter().any(|row| check_simplex(row, self.n_actions, "policy").is_err()) {
            return Err(invalid("policy must give a distribution over actions for every transient state"));
        }
        let trajs = (0..n_paths)
            .map(|_| {
                let start = sample_index(&self.initial, rng);
                self.rollout_one(policy, start, cap, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(trajs, Horizon::Indefinite, vec![self.n_actions])
    }
}

fn check_simplex(p: &[f64], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(Error::DimensionMismatch { expected: len, got: p.len() });
    }
    let total: f64 = p.iter().sum();
    if p.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(invalid(alloc::format!("{what} is not a probability vector")));
    }
    Ok(())
}

/// Discounted returns of every path in a dataset, as a convenience for
/// Monte-Carlo checks.
pub fn path_returns(data: &Dataset, gamma: f64) -> Result<Vec<f64>> {
    data.trajectories.iter().enumerate().map(|(i, tr)| crate::domain::discounted_return(&tr.complete_rewards(i)?, gamma)).collect()
}

/// Uniformly random draw of a transient state, used for exploring starts.
pub fn random_transient(spec: &MdpSpec, rng: &mut Stream) -> usize {
    rng.random_range(0..spec.n_states)
}
