//! Q-learning: tabular updates and backward-induction linear fits.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Horizon, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::features::{history_summary_indexed, FeatureMap};
use crate::regime::{Regime, StageRule};
use crate::regression::{ridge_fit, wls_fit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum QLoss {
    Ols,
    Ridge {
        lambda: f64,
    },
    /// Per-trajectory weights, shared by every stage.
    Wls {
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QStage {
    pub theta: Vec<f64>,
    pub map: FeatureMap,
}

impl QStage {
    fn max_q(&self, traj: &Trajectory, t: usize, traj_index: usize) -> Result<f64> {
        let s = history_summary_indexed(traj, t, &self.map, traj_index)?;
        Ok((0..self.map.n_actions).map(|a| self.map.score(&self.theta, &s, a)).fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Per-stage linear Q-functions `Q_t(h, a) = theta_t . phi_t(h, a)`.
/// Stage `T + 1` is implicitly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QModel {
    pub stages: Vec<QStage>,
    pub gamma: f64,
}

impl QModel {
    pub fn q_value(&self, traj: &Trajectory, t: usize, a: usize) -> Result<f64> {
        let st = &self.stages[t];
        let s = history_summary_indexed(traj, t, &st.map, 0)?;
        Ok(st.map.score(&st.theta, &s, a))
    }

    pub fn max_q(&self, traj: &Trajectory, t: usize) -> Result<f64> {
        self.stages[t].max_q(traj, t, 0)
    }

    /// `d_t(h) = argmax_a Q_t(h, a)`, lowest index on ties.
    pub fn regime(&self) -> Regime {
        Regime::new(
            self.stages.iter().map(|s| StageRule::Deterministic { theta: s.theta.clone(), map: s.map.clone(), threshold: 0.0 }).collect(),
        )
    }
}

/// Backward induction with a linear working model per stage.
///
/// `maps` holds one feature map per stage (a single map is reused at every
/// stage). The stage-`t` response is `Y_{t+1} + gamma max_a Q_{t+1}(H_{t+1}, a)`.
pub fn q_learning_fit(data: &Dataset, maps: &[FeatureMap], gamma: f64, loss: &QLoss) -> Result<(QModel, Regime)> {
    let Horizon::Finite(last) = data.horizon else {
        return Err(invalid("q_learning_fit needs a finite-horizon dataset"));
    };
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid("gamma must lie in [0, 1]"));
    }
    let stages = last + 1;
    if maps.len() != stages && maps.len() != 1 {
        return Err(Error::DimensionMismatch { expected: stages, got: maps.len() });
    }
    let rewards: Vec<Vec<f64>> = data.trajectories.iter().enumerate().map(|(i, tr)| tr.complete_rewards(i)).collect::<Result<_>>()?;
    if let QLoss::Wls { weights } = loss {
        if weights.len() != data.len() {
            return Err(Error::DimensionMismatch { expected: data.len(), got: weights.len() });
        }
    }

    let mut fitted: Vec<QStage> = Vec::with_capacity(stages);
    for t in (0..stages).rev() {
        let map = &maps[t.min(maps.len() - 1)];
        let n = data.len();
        let mut x = DMatrix::zeros(n, map.output_dim());
        let mut y = DVector::zeros(n);
        for (i, traj) in data.trajectories.iter().enumerate() {
            let s = history_summary_indexed(traj, t, map, i)?;
            let phi = map.features(&s, traj.stages[t].action.0);
            for (j, v) in phi.iter().enumerate() {
                x[(i, j)] = *v;
            }
            y[i] = rewards[i][t];
            if let Some(next) = fitted.last() {
                y[i] += gamma * next.max_q(traj, t + 1, i)?;
            }
        }
        let theta = match loss {
            QLoss::Ols => ridge_fit(&x, &y, 0.0)?,
            QLoss::Ridge { lambda } => ridge_fit(&x, &y, *lambda)?,
            QLoss::Wls { weights } => wls_fit(&x, &y, &DVector::from_column_slice(weights), 0.0)?,
        };
        fitted.push(QStage { theta: theta.as_slice().to_vec(), map: map.clone() });
    }
    fitted.reverse();
    let model = QModel { stages: fitted, gamma };
    let regime = model.regime();
    Ok((model, regime))
}

/// Regime whose treatment contrasts are soft-thresholded before the argmax.
pub fn soft_threshold_regime(model: &QModel, threshold: f64) -> Result<Regime> {
    if !(threshold >= 0.0) {
        return Err(invalid("threshold must be >= 0"));
    }
    Ok(model.regime().with_threshold(threshold))
}

/// Lookup-table Q-function over discrete states and actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularQ {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl TabularQ {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    fn index(&self, x: usize, a: usize) -> Result<usize> {
        if x >= self.n_states {
            return Err(Error::IndexOutOfRange { index: x, bound: self.n_states });
        }
        if a >= self.n_actions {
            return Err(Error::IndexOutOfRange { index: a, bound: self.n_actions });
        }
        Ok(x * self.n_actions + a)
    }

    pub fn get(&self, x: usize, a: usize) -> Result<f64> {
        Ok(self.values[self.index(x, a)?])
    }

    pub fn max_value(&self, x: usize) -> Result<f64> {
        self.index(x, 0)?;
        Ok(self.values[x * self.n_actions..(x + 1) * self.n_actions].iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Greedy action per state, lowest index on ties.
    pub fn greedy(&self) -> Vec<usize> {
        (0..self.n_states).map(|x| crate::regime::first_max(&self.values[x * self.n_actions..(x + 1) * self.n_actions])).collect()
    }
}

/// `Q(x, a) += alpha [y + gamma max_a' Q(x', a') - Q(x, a)]`.
///
/// `x_next = None` is the absorbing state, whose value is zero.
pub fn tabular_q_update(table: &mut TabularQ, x: usize, a: usize, y: f64, x_next: Option<usize>, alpha: f64, gamma: f64) -> Result<()> {
    let idx = table.index(x, a)?;
    let next = match x_next {
        Some(x2) => table.max_value(x2)?,
        None => 0.0,
    };
    let old = table.values[idx];
    table.values[idx] = old + alpha * (y + gamma * next - old);
    Ok(())
}
