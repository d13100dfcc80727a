//! Last-observation-carried-forward imputation of missing rewards.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::domain::Dataset;

/// Which rewards were imputed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Imputation {
    /// `(trajectory, stage)` of every imputed reward.
    pub imputed: Vec<(usize, usize)>,
    /// Subset of `imputed` with no earlier observation; these were set to 0.
    pub leading: Vec<(usize, usize)>,
}

impl Imputation {
    pub fn is_empty(&self) -> bool {
        self.imputed.is_empty()
    }

    /// Per-stage imputation mask for one trajectory of length `len`.
    pub fn mask(&self, traj: usize, len: usize) -> Vec<bool> {
        let mut m = vec![false; len];
        for &(i, t) in &self.imputed {
            if i == traj && t < len {
                m[t] = true;
            }
        }
        m
    }
}

/// Fills each missing reward with the previous observed reward of the same
/// trajectory. Leading gaps become 0 and are flagged in [`Imputation::leading`].
pub fn locf(data: &Dataset) -> (Dataset, Imputation) {
    let mut out = data.clone();
    let mut report = Imputation::default();
    for (i, traj) in out.trajectories.iter_mut().enumerate() {
        let mut last: Option<f64> = None;
        for (t, s) in traj.stages.iter_mut().enumerate() {
            match s.reward {
                Some(r) => last = Some(r),
                None => {
                    report.imputed.push((i, t));
                    if last.is_none() {
                        report.leading.push((i, t));
                    }
                    s.reward = Some(last.unwrap_or(0.0));
                }
            }
        }
    }
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ActionId, Horizon, StageRecord, StateVector, Terminal, Trajectory};

    fn data(rewards: &[Option<f64>]) -> Dataset {
        let stages = rewards.iter().map(|&r| StageRecord::new(StateVector(vec![0.0]), ActionId(0), r, Some(1.0))).collect();
        Dataset::new(
            vec![Trajectory::new(stages, Terminal::Unobserved).unwrap()],
            Horizon::Finite(rewards.len() - 1),
            vec![1; rewards.len()],
        )
        .unwrap()
    }

    fn rewards(d: &Dataset) -> Vec<f64> {
        d.trajectories[0].stages.iter().map(|s| s.reward.unwrap()).collect()
    }

    #[test]
    fn carries_forward() {
        let (out, rep) = locf(&data(&[Some(5.0), None, None]));
        assert_eq!(rewards(&out), vec![5.0, 5.0, 5.0]);
        assert_eq!(rep.mask(0, 3), vec![false, true, true]);
        assert!(rep.leading.is_empty());
    }

    #[test]
    fn complete_data_is_identity() {
        let d = data(&[Some(1.0), Some(2.0)]);
        let (out, rep) = locf(&d);
        assert_eq!(out, d);
        assert!(rep.is_empty());
    }

    #[test]
    fn leading_gap_is_zero_and_flagged() {
        let (out, rep) = locf(&data(&[None, Some(3.0), None]));
        assert_eq!(rewards(&out), vec![0.0, 3.0, 3.0]);
        assert_eq!(rep.leading, vec![(0, 0)]);
    }
}
