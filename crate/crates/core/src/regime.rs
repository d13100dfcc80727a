//! Decision rules and multi-stage regimes.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{StateVector, Trajectory};
use crate::error::{Error, Result};
use crate::features::{history_summary_indexed, FeatureMap, Summary};

/// Index of the first maximum. Ties are broken at exact equality.
pub fn argmax_tiebreak(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteInput("scores"));
    }
    Ok(first_max(scores))
}

/// Infallible variant for internal use on finite, non-empty scores.
pub(crate) fn first_max(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Argmax restricted to `mask[a] == true`.
pub(crate) fn masked_max(scores: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&s, &ok)) in scores.iter().zip(mask).enumerate() {
        if ok && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Numerically stable softmax of `scores / temperature`.
pub fn softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = scores.iter().map(|s| libm::exp((s - m) / temperature)).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// `sign(s) * max(|s| - threshold, 0)`.
pub fn soft_threshold(s: f64, threshold: f64) -> f64 {
    let mag = (s.abs() - threshold).max(0.0);
    if s > 0.0 {
        mag
    } else if s < 0.0 {
        -mag
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageRule {
    /// Argmax of linear scores `theta . phi(h, a)`. With `threshold > 0` the
    /// contrasts against action 0 are soft-thresholded before the argmax.
    Deterministic {
        theta: Vec<f64>,
        #[serde(rename = "feature_map")]
        map: FeatureMap,
        #[serde(default)]
        threshold: f64,
    },
    /// `pi(a | h) ∝ exp(theta . phi(h, a) / temperature)`.
    Softmax {
        theta: Vec<f64>,
        #[serde(rename = "feature_map")]
        map: FeatureMap,
        temperature: f64,
    },
    /// Base rule with the designated action's probability clipped to `[pi_min, pi_max]`.
    Clipped { base: Box<StageRule>, pi_min: f64, pi_max: f64, designated: usize },
}

impl StageRule {
    pub fn map(&self) -> &FeatureMap {
        match self {
            StageRule::Deterministic { map, .. } | StageRule::Softmax { map, .. } => map,
            StageRule::Clipped { base, .. } => base.map(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.map().n_actions
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, StageRule::Deterministic { .. })
    }

    /// Action chosen by a deterministic rule (the mode for stochastic ones).
    pub fn decide(&self, s: &Summary) -> usize {
        match self {
            StageRule::Deterministic { theta, map, threshold } => {
                let scores: Vec<f64> = (0..map.n_actions).map(|a| map.score(theta, s, a)).collect();
                if *threshold > 0.0 {
                    let contrasts: Vec<f64> = scores.iter().map(|&v| soft_threshold(v - scores[0], *threshold)).collect();
                    first_max(&contrasts)
                } else {
                    first_max(&scores)
                }
            }
            _ => first_max(&self.probabilities(s)),
        }
    }

    pub fn probabilities(&self, s: &Summary) -> Vec<f64> {
        match self {
            StageRule::Deterministic { map, .. } => {
                let mut p = vec![0.0; map.n_actions];
                p[self.decide(s)] = 1.0;
                p
            }
            StageRule::Softmax { theta, map, temperature } => {
                let scores: Vec<f64> = (0..map.n_actions).map(|a| map.score(theta, s, a)).collect();
                softmax(&scores, *temperature)
            }
            StageRule::Clipped { base, pi_min, pi_max, designated } => {
                let mut p = base.probabilities(s);
                clip_designated(&mut p, *designated, *pi_min, *pi_max);
                p
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: &Summary, rng: &mut R) -> (usize, f64) {
        if let StageRule::Deterministic { .. } = self {
            return (self.decide(s), 1.0);
        }
        let p = self.probabilities(s);
        let a = sample_index(&p, rng);
        (a, p[a])
    }
}

/// Clips `p[designated]` into `[lo, hi]` and rescales the remaining mass.
pub(crate) fn clip_designated(p: &mut [f64], designated: usize, lo: f64, hi: f64) {
    let new = p[designated].clamp(lo, hi);
    let rest_old: f64 = p.iter().enumerate().filter(|&(a, _)| a != designated).map(|(_, v)| v).sum();
    let rest_new = 1.0 - new;
    let others = p.len() - 1;
    for (a, v) in p.iter_mut().enumerate() {
        if a == designated {
            *v = new;
        } else if rest_old > 0.0 {
            *v *= rest_new / rest_old;
        } else {
            *v = rest_new / others as f64;
        }
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the total; return the last action with mass.
    p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1)
}

/// A sequence of per-stage rules. Stages past the end reuse the last rule,
/// which makes a one-rule regime time-homogeneous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub stages: Vec<StageRule>,
}

impl Regime {
    pub fn new(stages: Vec<StageRule>) -> Self {
        Self { stages }
    }

    pub fn rule(&self, t: usize) -> &StageRule {
        &self.stages[t.min(self.stages.len() - 1)]
    }

    pub fn summary(&self, traj: &Trajectory, t: usize) -> Result<Summary> {
        history_summary_indexed(traj, t, self.rule(t).map(), 0)
    }

    pub fn decide(&self, traj: &Trajectory, t: usize) -> Result<usize> {
        Ok(self.rule(t).decide(&self.summary(traj, t)?))
    }

    /// Action for a Markov state (`H_t = X_t`).
    pub fn decide_state(&self, t: usize, x: &StateVector) -> Result<usize> {
        let rule = self.rule(t);
        Ok(rule.decide(&rule.map().summarize_state(x)?))
    }

    /// `pi_t(a | h_t)` for the action taken at stage `t` of `traj`.
    pub fn prob_of_taken(&self, traj: &Trajectory, t: usize) -> Result<f64> {
        let s = self.summary(traj, t)?;
        Ok(policy_prob(self, t, &s, traj.stages[t].action.0))
    }

    /// Replaces every deterministic rule's threshold.
    pub fn with_threshold(&self, value: f64) -> Self {
        fn apply(rule: &StageRule, value: f64) -> StageRule {
            match rule {
                StageRule::Deterministic { theta, map, .. } => {
                    StageRule::Deterministic { theta: theta.clone(), map: map.clone(), threshold: value }
                }
                StageRule::Clipped { base, pi_min, pi_max, designated } => {
                    StageRule::Clipped { base: Box::new(apply(base, value)), pi_min: *pi_min, pi_max: *pi_max, designated: *designated }
                }
                other => other.clone(),
            }
        }
        Self { stages: self.stages.iter().map(|r| apply(r, value)).collect() }
    }
}

/// `pi_t(a | h_t)`.
pub fn policy_prob(regime: &Regime, t: usize, summary: &Summary, a: usize) -> f64 {
    regime.rule(t).probabilities(summary).get(a).copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;
    use crate::rng::RngSpec;
    use proptest::prelude::*;

    fn binary_map() -> FeatureMap {
        FeatureMap::new(FeatureKind::LinearWithActionInteraction, vec![0], vec![0], true, 2)
    }

    fn summary(x: f64) -> Summary {
        Summary { main: vec![1.0, x], tailoring: vec![1.0, x] }
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_tiebreak(&[1.0, 3.0, 3.0]), Ok(1));
        assert_eq!(argmax_tiebreak(&[5.0]), Ok(0));
        assert_eq!(argmax_tiebreak(&[0.0, 0.0, 0.0]), Ok(0));
        assert_eq!(argmax_tiebreak(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn deterministic_chosen_action_has_probability_one() {
        // contrast -1 + 2x, so x = 1 picks action 1.
        let rule = StageRule::Deterministic { theta: vec![0.0, 0.0, -1.0, 2.0], map: binary_map(), threshold: 0.0 };
        let regime = Regime::new(vec![rule]);
        assert_eq!(policy_prob(&regime, 0, &summary(1.0), 1), 1.0);
        assert_eq!(policy_prob(&regime, 0, &summary(1.0), 0), 0.0);
        assert_eq!(policy_prob(&regime, 0, &summary(0.0), 0), 1.0);
    }

    #[test]
    fn softmax_zero_theta_is_uniform() {
        let map = FeatureMap::new(FeatureKind::OneHotActionCross, vec![], vec![0], false, 4);
        let rule = StageRule::Softmax { theta: vec![0.0; 4], map, temperature: 1.0 };
        let regime = Regime::new(vec![rule]);
        let s = Summary { main: vec![], tailoring: vec![0.7] };
        for a in 0..4 {
            assert!((policy_prob(&regime, 0, &s, a) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn clipped_caps_designated_probability() {
        // Softmax with contrast ln(19) gives P(a=1) = 0.95.
        let base = StageRule::Softmax { theta: vec![0.0, 0.0, libm::log(19.0), 0.0], map: binary_map(), temperature: 1.0 };
        let regime = Regime::new(vec![StageRule::Clipped { base: Box::new(base), pi_min: 0.2, pi_max: 0.8, designated: 1 }]);
        assert!((policy_prob(&regime, 0, &summary(0.0), 1) - 0.8).abs() < 1e-12);
        assert!((policy_prob(&regime, 0, &summary(0.0), 0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn threshold_shrinks_small_contrasts() {
        let rule = StageRule::Deterministic { theta: vec![0.0, 0.0, 0.1, 0.0], map: binary_map(), threshold: 0.0 };
        assert_eq!(rule.decide(&summary(0.0)), 1);
        let regime = Regime::new(vec![rule]).with_threshold(0.2);
        assert_eq!(regime.rule(0).decide(&summary(0.0)), 0);
    }

    #[test]
    fn sampling_is_replayable() {
        let rule = StageRule::Softmax { theta: vec![0.0, 0.0, 0.3, 0.5], map: binary_map(), temperature: 1.0 };
        let draw = |spec: RngSpec| {
            let mut rng = spec.stream();
            (0..50).map(|i| rule.sample(&summary(i as f64 / 10.0), &mut rng).0).collect::<Vec<_>>()
        };
        assert_eq!(draw(RngSpec::new(3, 1)), draw(RngSpec::new(3, 1)));
    }

    proptest! {
        #[test]
        fn probabilities_normalized(
            theta in prop::collection::vec(-3.0f64..3.0, 6),
            x in -2.0f64..2.0,
            temp in 0.1f64..10.0,
            lo in 0.01f64..0.5,
            width in 0.0f64..0.49,
        ) {
            let map = FeatureMap::new(FeatureKind::OneHotActionCross, vec![], vec![0], true, 3);
            let s = Summary { main: vec![], tailoring: vec![1.0, x] };
            let rules = [
                StageRule::Deterministic { theta: theta.clone(), map: map.clone(), threshold: 0.0 },
                StageRule::Softmax { theta: theta.clone(), map: map.clone(), temperature: temp },
                StageRule::Clipped {
                    base: Box::new(StageRule::Softmax { theta: theta.clone(), map: map.clone(), temperature: temp }),
                    pi_min: lo,
                    pi_max: lo + width,
                    designated: 2,
                },
            ];
            for rule in rules {
                let p = rule.probabilities(&s);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                if let StageRule::Clipped { pi_min, pi_max, .. } = rule {
                    prop_assert!(p[2] >= pi_min && p[2] <= pi_max);
                }
            }
        }
    }
}
