//! History summaries and state-action feature maps.
//!
//! The history at stage `t` is the flat vector
//! `H_t = (X_0, a_0, y_1, X_1, a_1, y_2, ..., X_t)`, actions encoded by their
//! index. A [`FeatureMap`] selects columns of `H_t` into a main-effect summary
//! `h0` and a tailoring summary `h1`, then couples them with an action.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::domain::{StateVector, Trajectory};
use crate::error::{Error, Result};

/// Column arithmetic for the flattened history vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryLayout {
    pub state_dim: usize,
}

impl HistoryLayout {
    pub const fn new(state_dim: usize) -> Self {
        Self { state_dim }
    }

    pub const fn state_col(&self, stage: usize, j: usize) -> usize {
        stage * (self.state_dim + 2) + j
    }

    pub const fn action_col(&self, stage: usize) -> usize {
        stage * (self.state_dim + 2) + self.state_dim
    }

    pub const fn reward_col(&self, stage: usize) -> usize {
        stage * (self.state_dim + 2) + self.state_dim + 1
    }

    /// Length of `H_t`.
    pub const fn len_at(&self, t: usize) -> usize {
        t * (self.state_dim + 2) + self.state_dim
    }
}

/// Reads column `col` of `H_t` from a trajectory, touching only stages `<= t`.
fn history_value(traj: &Trajectory, t: usize, col: usize, traj_index: usize) -> Result<f64> {
    let p = traj.stages[0].state.dim();
    let layout = HistoryLayout::new(p);
    if col >= layout.len_at(t) {
        return Err(Error::IndexOutOfRange { index: col, bound: layout.len_at(t) });
    }
    let block = p + 2;
    let stage = col / block;
    let offset = col % block;
    let rec = &traj.stages[stage];
    if offset < p {
        Ok(rec.state.0[offset])
    } else if offset == p {
        Ok(rec.action.0 as f64)
    } else {
        rec.reward.ok_or(Error::MissingReward { traj: traj_index, stage })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureKind {
    /// `(h0, 1{a=1}, ..., 1{a=K-1})`: main effects plus action dummies.
    Linear,
    /// `(h0, h1 1{a=1}, ..., h1 1{a=K-1})`; for binary actions `(h0, h1 a)`.
    LinearWithActionInteraction,
    /// Per-column powers `x, x^2, ..., x^degree` in both summaries, coupled as
    /// `LinearWithActionInteraction`.
    Polynomial { degree: u32 },
    /// `(h0, h1 1{a=0}, ..., h1 1{a=K-1})`: a separate block for every action.
    OneHotActionCross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMap {
    pub kind: FeatureKind,
    /// Columns of `H_t` forming the main-effect summary `h0`.
    pub main_columns: Vec<usize>,
    /// Columns of `H_t` forming the tailoring summary `h1`.
    pub tailoring_columns: Vec<usize>,
    /// Prepends a constant 1 to both summaries.
    pub include_intercept: bool,
    pub n_actions: usize,
}

/// `(h0, h1)` pair for one decision point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub main: Vec<f64>,
    pub tailoring: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        kind: FeatureKind,
        main_columns: Vec<usize>,
        tailoring_columns: Vec<usize>,
        include_intercept: bool,
        n_actions: usize,
    ) -> Self {
        Self { kind, main_columns, tailoring_columns, include_intercept, n_actions }
    }

    /// Binary-action `(h0, h1 a)` map.
    pub fn interaction(main: Vec<usize>, tailoring: Vec<usize>) -> Self {
        Self::new(FeatureKind::LinearWithActionInteraction, main, tailoring, true, 2)
    }

    fn degree(&self) -> usize {
        match self.kind {
            FeatureKind::Polynomial { degree } => degree.max(1) as usize,
            _ => 1,
        }
    }

    pub fn main_dim(&self) -> usize {
        usize::from(self.include_intercept) + self.main_columns.len() * self.degree()
    }

    pub fn tailoring_dim(&self) -> usize {
        usize::from(self.include_intercept) + self.tailoring_columns.len() * self.degree()
    }

    /// Dimension `d` of the state-action feature vector.
    pub fn output_dim(&self) -> usize {
        let k = self.n_actions;
        match self.kind {
            FeatureKind::Linear => self.main_dim() + k.saturating_sub(1),
            FeatureKind::LinearWithActionInteraction | FeatureKind::Polynomial { .. } => {
                self.main_dim() + k.saturating_sub(1) * self.tailoring_dim()
            }
            FeatureKind::OneHotActionCross => self.main_dim() + k * self.tailoring_dim(),
        }
    }

    fn expand(&self, columns: &[usize], mut value: impl FnMut(usize) -> Result<f64>) -> Result<Vec<f64>> {
        let deg = self.degree();
        let mut out = Vec::with_capacity(usize::from(self.include_intercept) + columns.len() * deg);
        if self.include_intercept {
            out.push(1.0);
        }
        for &c in columns {
            let x = value(c)?;
            let mut pow = x;
            for _ in 0..deg {
                out.push(pow);
                pow *= x;
            }
        }
        Ok(out)
    }

    /// Summary built from an arbitrary column lookup.
    pub fn summarize(&self, mut value: impl FnMut(usize) -> Result<f64>) -> Result<Summary> {
        let main = self.expand(&self.main_columns, &mut value)?;
        let tailoring = self.expand(&self.tailoring_columns, &mut value)?;
        Ok(Summary { main, tailoring })
    }

    /// Summary of a bare state (stage 0, or Markov problems where `H_t = X_t`).
    pub fn summarize_state(&self, x: &StateVector) -> Result<Summary> {
        self.summarize(|c| x.0.get(c).copied().ok_or(Error::IndexOutOfRange { index: c, bound: x.dim() }))
    }

    /// State-action feature vector `phi(h, a)`.
    pub fn features(&self, s: &Summary, action: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.output_dim());
        out.extend_from_slice(&s.main);
        let k = self.n_actions;
        match self.kind {
            FeatureKind::Linear => {
                for a in 1..k {
                    out.push(if a == action { 1.0 } else { 0.0 });
                }
            }
            FeatureKind::LinearWithActionInteraction | FeatureKind::Polynomial { .. } => {
                for a in 1..k {
                    let on = if a == action { 1.0 } else { 0.0 };
                    out.extend(s.tailoring.iter().map(|v| v * on));
                }
            }
            FeatureKind::OneHotActionCross => {
                for a in 0..k {
                    let on = if a == action { 1.0 } else { 0.0 };
                    out.extend(s.tailoring.iter().map(|v| v * on));
                }
            }
        }
        out
    }

    /// Linear score `theta . phi(h, a)` without materializing `phi`.
    pub fn score(&self, theta: &[f64], s: &Summary, action: usize) -> f64 {
        let m = s.main.len();
        let mut total: f64 = theta[..m].iter().zip(&s.main).map(|(t, x)| t * x).sum();
        let q = s.tailoring.len();
        match self.kind {
            FeatureKind::Linear => {
                if action >= 1 {
                    total += theta[m + action - 1];
                }
            }
            FeatureKind::LinearWithActionInteraction | FeatureKind::Polynomial { .. } => {
                if action >= 1 {
                    let off = m + (action - 1) * q;
                    total += theta[off..off + q].iter().zip(&s.tailoring).map(|(t, x)| t * x).sum::<f64>();
                }
            }
            FeatureKind::OneHotActionCross => {
                let off = m + action * q;
                total += theta[off..off + q].iter().zip(&s.tailoring).map(|(t, x)| t * x).sum::<f64>();
            }
        }
        total
    }
}

/// `(h0, h1)` at stage `t` of `traj`, reading only records with index `<= t`.
pub fn history_summary(traj: &Trajectory, t: usize, map: &FeatureMap) -> Result<Summary> {
    history_summary_indexed(traj, t, map, 0)
}

pub(crate) fn history_summary_indexed(traj: &Trajectory, t: usize, map: &FeatureMap, traj_index: usize) -> Result<Summary> {
    if t >= traj.len() {
        return Err(Error::StageOutOfRange { stage: t, len: traj.len() });
    }
    map.summarize(|c| history_value(traj, t, c, traj_index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ActionId, StageRecord, Terminal};
    use alloc::vec;
    use proptest::prelude::*;

    fn traj(states: &[&[f64]], actions: &[usize], rewards: &[f64]) -> Trajectory {
        let stages = states
            .iter()
            .zip(actions)
            .zip(rewards)
            .map(|((x, &a), &r)| StageRecord::new(StateVector(x.to_vec()), ActionId(a), Some(r), Some(0.5)))
            .collect();
        Trajectory { stages, terminal: Terminal::Unobserved }
    }

    #[test]
    fn stage_zero_linear_with_intercept() {
        let tr = traj(&[&[0.3, -1.2]], &[1], &[2.0]);
        let map = FeatureMap::new(FeatureKind::Linear, vec![0, 1], vec![1], true, 2);
        let s = history_summary(&tr, 0, &map).unwrap();
        assert_eq!(s.main, vec![1.0, 0.3, -1.2]);
        assert_eq!(s.tailoring, vec![1.0, -1.2]);
    }

    #[test]
    fn polynomial_expansion() {
        let tr = traj(&[&[2.0]], &[0], &[0.0]);
        let map = FeatureMap::new(FeatureKind::Polynomial { degree: 2 }, vec![0], vec![], true, 2);
        assert_eq!(history_summary(&tr, 0, &map).unwrap().main, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn stage_out_of_range() {
        let tr = traj(&[&[2.0]], &[0], &[0.0]);
        let map = FeatureMap::interaction(vec![0], vec![0]);
        assert_eq!(history_summary(&tr, 1, &map), Err(Error::StageOutOfRange { stage: 1, len: 1 }));
    }

    #[test]
    fn history_columns_reach_past_actions_and_rewards() {
        let tr = traj(&[&[0.5], &[1.5]], &[1, 0], &[7.0, 9.0]);
        let layout = HistoryLayout::new(1);
        let map = FeatureMap::new(
            FeatureKind::Linear,
            vec![layout.state_col(0, 0), layout.action_col(0), layout.reward_col(0), layout.state_col(1, 0)],
            vec![],
            false,
            2,
        );
        assert_eq!(history_summary(&tr, 1, &map).unwrap().main, vec![0.5, 1.0, 7.0, 1.5]);
        // Stage-1 reward is not part of H_1.
        let bad = FeatureMap::new(FeatureKind::Linear, vec![layout.reward_col(1)], vec![], false, 2);
        assert!(matches!(history_summary(&tr, 1, &bad), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn feature_layouts() {
        let s = Summary { main: vec![1.0, 2.0], tailoring: vec![1.0, 3.0] };
        let inter = FeatureMap::new(FeatureKind::LinearWithActionInteraction, vec![0], vec![0], true, 2);
        assert_eq!(inter.features(&s, 0), vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(inter.features(&s, 1), vec![1.0, 2.0, 1.0, 3.0]);
        let onehot = FeatureMap::new(FeatureKind::OneHotActionCross, vec![0], vec![0], true, 2);
        assert_eq!(onehot.features(&s, 0), vec![1.0, 2.0, 1.0, 3.0, 0.0, 0.0]);
        let lin = FeatureMap::new(FeatureKind::Linear, vec![0], vec![0], true, 3);
        assert_eq!(lin.features(&s, 2), vec![1.0, 2.0, 0.0, 1.0]);
        for map in [inter, onehot, lin] {
            let theta: Vec<f64> = (0..map.output_dim()).map(|i| i as f64 * 0.5 - 1.0).collect();
            for a in 0..map.n_actions {
                let phi = map.features(&s, a);
                assert_eq!(phi.len(), map.output_dim());
                let direct: f64 = phi.iter().zip(&theta).map(|(p, t)| p * t).sum();
                assert!((direct - map.score(&theta, &s, a)).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn no_look_ahead(x0 in -5.0f64..5.0, x1 in -5.0f64..5.0, y1 in -5.0f64..5.0, y2 in -5.0f64..5.0, y2b in -5.0f64..5.0) {
            let layout = HistoryLayout::new(1);
            let map = FeatureMap::interaction(
                vec![layout.state_col(0, 0), layout.reward_col(0), layout.state_col(1, 0)],
                vec![layout.state_col(1, 0)],
            );
            let a = traj(&[&[x0], &[x1]], &[0, 1], &[y1, y2]);
            let b = traj(&[&[x0], &[x1]], &[0, 0], &[y1, y2b]);
            prop_assert_eq!(history_summary(&a, 1, &map).unwrap(), history_summary(&b, 1, &map).unwrap());
        }
    }
}
