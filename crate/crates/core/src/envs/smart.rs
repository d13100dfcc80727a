//! Two-stage sequential multiple-assignment randomized trial.
//!
//! Stage 0 observes `x0 ~ N(0, 1)` and randomizes `a0`. An intermediate
//! response `r = 1{c + c_a a0 + sigma_z z > threshold}` and a fresh covariate
//! `x1 ~ N(0, 1)` are observed before stage 1, where the randomization
//! probability depends on `r`. Rewards:
//!
//! `Y1 = beta0 . (1, x0) + a0 psi0 . (1, x0) + sigma e1`
//! `Y2 = beta1 . (1, x0, a0, r, x1) + a1 psi1 . (1, r, x1) + sigma e2`
//!
//! States are `(x, r)` with `r = 0` at stage 0, so the stage-1 history is
//! `H1 = (x0, 0, a0, y1, x1, r)`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{ActionId, Dataset, Horizon, StageRecord, StateVector, Terminal, Trajectory};
use crate::error::{invalid, Result};
use crate::features::FeatureMap;
use crate::regime::{Regime, StageRule};
use crate::rng::Stream;

use super::{expected_positive_part, normal_cdf};

/// History columns used by the standard feature maps.
pub mod cols {
    pub const X0: usize = 0;
    pub const A0: usize = 2;
    pub const Y1: usize = 3;
    pub const X1: usize = 4;
    pub const R: usize = 5;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseModel {
    pub intercept: f64,
    pub treatment: f64,
    pub noise: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmartSpec {
    /// `P(a0 = 1)`.
    pub p0: f64,
    /// `P(a1 = 1)` for responders and non-responders.
    pub p1_responder: f64,
    pub p1_nonresponder: f64,
    pub beta0: [f64; 2],
    pub psi0: [f64; 2],
    pub response: ResponseModel,
    pub beta1: [f64; 5],
    pub psi1: [f64; 3],
    pub sigma: f64,
}

impl Default for SmartSpec {
    fn default() -> Self {
        Self {
            p0: 0.5,
            p1_responder: 0.5,
            p1_nonresponder: 0.5,
            beta0: [1.0, 0.5],
            psi0: [0.3, -0.8],
            response: ResponseModel { intercept: -0.2, treatment: 0.6, noise: 1.0, threshold: 0.0 },
            beta1: [0.5, 0.4, 0.2, 0.5, 0.3],
            psi1: [-0.4, 1.0, 0.8],
            sigma: 1.0,
        }
    }
}

impl SmartSpec {
    pub fn validate(&self) -> Result<()> {
        for p in [self.p0, self.p1_responder, self.p1_nonresponder] {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid("randomization probabilities must lie in (0, 1)"));
            }
        }
        if !(self.sigma >= 0.0) || !(self.response.noise >= 0.0) {
            return Err(invalid("noise scales must be >= 0"));
        }
        Ok(())
    }

    /// `P(r = 1 | a0)`.
    pub fn response_prob(&self, a0: usize) -> f64 {
        let m = self.response.intercept + self.response.treatment * a0 as f64 - self.response.threshold;
        if self.response.noise == 0.0 {
            return if m > 0.0 { 1.0 } else { 0.0 };
        }
        normal_cdf(m / self.response.noise)
    }

    fn p1(&self, r: f64) -> f64 {
        if r > 0.5 {
            self.p1_responder
        } else {
            self.p1_nonresponder
        }
    }

    /// Stage-1 blip `psi1 . (1, r, x1)`.
    pub fn blip1(&self, r: f64, x1: f64) -> f64 {
        self.psi1[0] + self.psi1[1] * r + self.psi1[2] * x1
    }

    /// `E[max(0, blip1) | a0]`, integrating over `r` and `x1`.
    fn expected_best_blip(&self, a0: usize) -> f64 {
        let pr = self.response_prob(a0);
        let s = self.psi1[2].abs();
        (1.0 - pr) * expected_positive_part(self.psi1[0], s) + pr * expected_positive_part(self.psi1[0] + self.psi1[1], s)
    }

    /// Exact stage-0 optimal Q-function coefficients in the standard stage-0
    /// map: main `(1, x0)` and tailoring `(1, x0)`.
    pub fn q0_coefficients(&self, gamma: f64) -> [f64; 4] {
        let b = &self.beta1;
        let (p0, p1) = (self.response_prob(0), self.response_prob(1));
        let (e0, e1) = (self.expected_best_blip(0), self.expected_best_blip(1));
        [
            self.beta0[0] + gamma * (b[0] + b[3] * p0 + e0),
            self.beta0[1] + gamma * b[1],
            self.psi0[0] + gamma * (b[2] + b[3] * (p1 - p0) + e1 - e0),
            self.psi0[1],
        ]
    }

    /// Value of the optimal regime, `E[max_a Q0(x0, a)]`.
    pub fn optimal_value(&self, gamma: f64) -> f64 {
        let q = self.q0_coefficients(gamma);
        q[0] + expected_positive_part(q[2], q[3].abs())
    }

    /// The optimal regime in the standard feature maps.
    pub fn oracle_regime(&self, gamma: f64) -> Regime {
        let q = self.q0_coefficients(gamma);
        let b = &self.beta1;
        Regime::new(vec![
            StageRule::Deterministic { theta: q.to_vec(), map: stage0_map(), threshold: 0.0 },
            StageRule::Deterministic {
                theta: vec![b[0], b[1], b[2], b[3], b[4], self.psi1[0], self.psi1[1], self.psi1[2]],
                map: stage1_map(),
                threshold: 0.0,
            },
        ])
    }

    /// One trial participant. With `regime = Some(d)` actions follow `d`
    /// instead of randomization and the recorded probability is 1.
    pub fn simulate_one(&self, regime: Option<&Regime>, rng: &mut Stream) -> Result<Trajectory> {
        let noise = |rng: &mut Stream| -> f64 { rng.sample::<f64, _>(StandardNormal) };
        let x0 = noise(rng);
        let s0 = StateVector(vec![x0, 0.0]);
        let (a0, p_a0) = match regime {
            Some(d) => (d.decide_state(0, &s0)?, 1.0),
            None => bernoulli(self.p0, rng),
        };
        let af0 = a0 as f64;
        let y1 = self.beta0[0] + self.beta0[1] * x0 + af0 * (self.psi0[0] + self.psi0[1] * x0) + self.sigma * noise(rng);
        let z = self.response.intercept + self.response.treatment * af0 + self.response.noise * noise(rng);
        let r = if z > self.response.threshold { 1.0 } else { 0.0 };
        let x1 = noise(rng);
        let mut stages = vec![
            StageRecord::new(s0, ActionId(a0), Some(y1), Some(p_a0)),
            StageRecord::new(StateVector(vec![x1, r]), ActionId(0), None, None),
        ];
        let (a1, p_a1) = match regime {
            Some(d) => {
                let partial = Trajectory { stages: stages.clone(), terminal: Terminal::Unobserved };
                (d.decide(&partial, 1)?, 1.0)
            }
            None => bernoulli(self.p1(r), rng),
        };
        let b = &self.beta1;
        let y2 = b[0] + b[1] * x0 + b[2] * af0 + b[3] * r + b[4] * x1 + a1 as f64 * self.blip1(r, x1) + self.sigma * noise(rng);
        stages[1].action = ActionId(a1);
        stages[1].reward = Some(y2);
        stages[1].behavior_prob = Some(p_a1);
        Trajectory::new(stages, Terminal::Unobserved)
    }

    pub fn simulate(&self, n: usize, rng: &mut Stream) -> Result<Dataset> {
        self.validate()?;
        let trajs = (0..n).map(|_| self.simulate_one(None, rng)).collect::<Result<Vec<_>>>()?;
        Dataset::new(trajs, Horizon::Finite(1), vec![2, 2])
    }

    /// `P(a1 = 1)` recorded for any participant, as a function of `r`.
    pub fn stage1_prob(&self, r: f64) -> f64 {
        self.p1(r)
    }
}

fn bernoulli(p: f64, rng: &mut Stream) -> (usize, f64) {
    let u: f64 = rng.random();
    if u < p {
        (1, p)
    } else {
        (0, 1.0 - p)
    }
}

/// Stage-0 map: main `(1, x0)`, tailoring `(1, x0)`.
pub fn stage0_map() -> FeatureMap {
    FeatureMap::interaction(vec![cols::X0], vec![cols::X0])
}

/// Stage-1 map: main `(1, x0, a0, r, x1)`, tailoring `(1, r, x1)`.
pub fn stage1_map() -> FeatureMap {
    FeatureMap::interaction(vec![cols::X0, cols::A0, cols::R, cols::X1], vec![cols::R, cols::X1])
}

pub fn standard_maps() -> Vec<FeatureMap> {
    vec![stage0_map(), stage1_map()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;

    #[test]
    fn layout_columns_match_history() {
        let spec = SmartSpec::default();
        let tr = spec.simulate_one(None, &mut RngSpec::new(3, 0).stream()).unwrap();
        let s = crate::features::history_summary(&tr, 1, &stage1_map()).unwrap();
        let (x0, a0, r, x1) = (tr.stages[0].state.0[0], tr.stages[0].action.0 as f64, tr.stages[1].state.0[1], tr.stages[1].state.0[0]);
        assert_eq!(s.main, vec![1.0, x0, a0, r, x1]);
        assert_eq!(s.tailoring, vec![1.0, r, x1]);
    }

    #[test]
    fn recorded_probabilities_match_design() {
        let spec = SmartSpec { p0: 0.3, p1_responder: 0.8, p1_nonresponder: 0.4, ..SmartSpec::default() };
        let data = spec.simulate(200, &mut RngSpec::new(1, 0).stream()).unwrap();
        for tr in &data.trajectories {
            let p0 = if tr.stages[0].action.0 == 1 { 0.3 } else { 0.7 };
            assert_eq!(tr.stages[0].behavior_prob, Some(p0));
            let q = if tr.stages[1].state.0[1] == 1.0 { 0.8 } else { 0.4 };
            let p1 = if tr.stages[1].action.0 == 1 { q } else { 1.0 - q };
            assert_eq!(tr.stages[1].behavior_prob, Some(p1));
        }
    }

    #[test]
    fn optimal_value_matches_monte_carlo() {
        let spec = SmartSpec::default();
        let d = spec.oracle_regime(1.0);
        let mut rng = RngSpec::new(5, 0).stream();
        let n = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let tr = spec.simulate_one(Some(&d), &mut rng).unwrap();
            let g: f64 = tr.stages.iter().map(|s| s.reward.unwrap()).sum();
            sum += g;
            sq += g * g;
        }
        let mean = sum / n as f64;
        let se = libm::sqrt((sq / n as f64 - mean * mean) / n as f64);
        assert!((mean - spec.optimal_value(1.0)).abs() < 4.0 * se, "{mean} vs {}", spec.optimal_value(1.0));
    }

    #[test]
    fn oracle_beats_fixed_regimes() {
        let spec = SmartSpec::default();
        let mut rng = RngSpec::new(6, 0).stream();
        let n = 50_000;
        let fixed = |a0: f64, a1: f64| {
            Regime::new(vec![
                StageRule::Deterministic { theta: vec![0.0, 0.0, a0, 0.0], map: stage0_map(), threshold: 0.0 },
                StageRule::Deterministic {
                    theta: vec![0.0; 5].into_iter().chain([a1, 0.0, 0.0]).collect(),
                    map: stage1_map(),
                    threshold: 0.0,
                },
            ])
        };
        let v = |d: &Regime, rng: &mut Stream| -> f64 {
            (0..n).map(|_| spec.simulate_one(Some(d), rng).unwrap().stages.iter().map(|s| s.reward.unwrap()).sum::<f64>()).sum::<f64>()
                / n as f64
        };
        let best = spec.optimal_value(1.0);
        for (a0, a1) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            assert!(v(&fixed(a0, a1), &mut rng) < best);
        }
    }
}
