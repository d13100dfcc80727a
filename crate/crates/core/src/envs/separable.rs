//! Two-stage design where only fully concordant paths are rewarded.
//!
//! `x0, x1 ~ U(-1, 1)` independently, actions randomized with probability
//! 1/2, and the only reward arrives after stage 1:
//! `Y = 1{a0 = d0(x0)} 1{a1 = d1(x1)} (gain + noise * U(0, 1))`
//! with `d_t(x) = 1{x > cut_t}`. Every discordant path has zero weight, so
//! each stage's weighted classification problem is separable.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ActionId, Dataset, Horizon, StageRecord, StateVector, Terminal, Trajectory};
use crate::error::{invalid, Result};
use crate::features::FeatureMap;
use crate::regime::{Regime, StageRule};
use crate::rng::Stream;

/// Column of `x1` in the stage-1 history `(x0, a0, y1, x1)`.
pub const X1_COL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparableSpec {
    pub cuts: [f64; 2],
    pub gain: f64,
    pub noise: f64,
}

impl Default for SeparableSpec {
    fn default() -> Self {
        Self { cuts: [0.2, -0.3], gain: 2.0, noise: 0.5 }
    }
}

impl SeparableSpec {
    pub fn simulate(&self, n: usize, rng: &mut Stream) -> Result<Dataset> {
        if !(self.gain > 0.0) || self.noise < 0.0 {
            return Err(invalid("separable design needs positive gain and non-negative noise"));
        }
        let trajs = (0..n)
            .map(|_| {
                let x0: f64 = rng.random_range(-1.0..1.0);
                let a0 = usize::from(rng.random::<f64>() < 0.5);
                let x1: f64 = rng.random_range(-1.0..1.0);
                let a1 = usize::from(rng.random::<f64>() < 0.5);
                let hit = a0 == usize::from(x0 > self.cuts[0]) && a1 == usize::from(x1 > self.cuts[1]);
                let u: f64 = rng.random();
                let y = if hit { self.gain + self.noise * u } else { 0.0 };
                Trajectory::new(
                    vec![
                        StageRecord::new(StateVector(vec![x0]), ActionId(a0), Some(0.0), Some(0.5)),
                        StageRecord::new(StateVector(vec![x1]), ActionId(a1), Some(y), Some(0.5)),
                    ],
                    Terminal::Unobserved,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(trajs, Horizon::Finite(1), vec![2, 2])
    }

    pub fn maps() -> Vec<FeatureMap> {
        vec![FeatureMap::interaction(vec![], vec![0]), FeatureMap::interaction(vec![], vec![X1_COL])]
    }

    pub fn oracle_regime(&self) -> Regime {
        let maps = Self::maps();
        Regime::new(
            maps.into_iter()
                .zip(self.cuts)
                .map(|(map, c)| StageRule::Deterministic { theta: vec![0.0, -c, 1.0], map, threshold: 0.0 })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;

    #[test]
    fn oracle_regime_reproduces_cuts() {
        let spec = SeparableSpec::default();
        let data = spec.simulate(500, &mut RngSpec::new(0, 0).stream()).unwrap();
        let d = spec.oracle_regime();
        for tr in &data.trajectories {
            assert_eq!(d.decide(tr, 0).unwrap(), usize::from(tr.stages[0].state.0[0] > 0.2));
            assert_eq!(d.decide(tr, 1).unwrap(), usize::from(tr.stages[1].state.0[0] > -0.3));
        }
    }

    #[test]
    fn only_concordant_paths_are_rewarded() {
        let spec = SeparableSpec::default();
        let data = spec.simulate(500, &mut RngSpec::new(1, 0).stream()).unwrap();
        let d = spec.oracle_regime();
        for tr in &data.trajectories {
            let y = tr.stages[1].reward.unwrap();
            let hit = (0..2).all(|t| d.decide(tr, t).unwrap() == tr.stages[t].action.0);
            assert_eq!(hit, y > 0.0);
            assert!(y == 0.0 || (2.0..=2.5).contains(&y));
        }
    }
}
