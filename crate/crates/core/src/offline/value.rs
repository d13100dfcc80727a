//! Off-policy value estimators: IPTW, AIPTW, outcome-model plug-in, MSM weights.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{discounted_return, Dataset, Horizon, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::features::{history_summary_indexed, FeatureMap, Summary};
use crate::offline::propensity::FittedPropensity;
use crate::offline::{effective_sample_fraction, Bootstrap, ValueEstimate};
use crate::regime::{policy_prob, Regime};
use crate::regression::ridge_fit;

/// Source of `pi_t(A_t | H_t)` for the action actually taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BehaviorProbs {
    Recorded,
    /// `probs[i][t]`, e.g. from a fitted propensity model.
    Supplied(Vec<Vec<f64>>),
}

impl BehaviorProbs {
    fn get(&self, traj: &Trajectory, i: usize, t: usize) -> Result<f64> {
        match self {
            BehaviorProbs::Recorded => traj.stages[t].behavior_prob.ok_or(Error::MissingBehaviorProb { traj: i, stage: t }),
            BehaviorProbs::Supplied(p) => {
                p.get(i).and_then(|row| row.get(t)).copied().ok_or(Error::MissingBehaviorProb { traj: i, stage: t })
            }
        }
    }
}

fn summary_for(regime: &Regime, traj: &Trajectory, t: usize, i: usize) -> Result<Summary> {
    history_summary_indexed(traj, t, regime.rule(t).map(), i)
}

/// Importance weight `prod_t d_t(A_t | H_t) / pi_t(A_t | H_t)`; for
/// deterministic regimes the numerator is the concordance indicator.
fn trajectory_weight(regime: &Regime, traj: &Trajectory, i: usize, probs: &BehaviorProbs) -> Result<f64> {
    let mut w = 1.0;
    for t in 0..traj.len() {
        let s = summary_for(regime, traj, t, i)?;
        let target = policy_prob(regime, t, &s, traj.stages[t].action.0);
        if target == 0.0 {
            return Ok(0.0);
        }
        let pi = probs.get(traj, i, t)?;
        if !(pi > 0.0) {
            return Err(Error::PositivityViolation { traj: i, stage: t });
        }
        w *= target / pi;
    }
    Ok(w)
}

/// Weight-normalized IPTW estimate `P_N[w Y] / P_N[w]` of the regime's value,
/// `Y` the `gamma`-discounted return.
pub fn value_iptw(data: &Dataset, regime: &Regime, probs: &BehaviorProbs, gamma: f64, boot: Bootstrap) -> Result<ValueEstimate> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = data.len();
    let mut w = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for (i, traj) in data.trajectories.iter().enumerate() {
        let wi = trajectory_weight(regime, traj, i, probs)?;
        let yi = if wi > 0.0 { discounted_return(&traj.complete_rewards(i)?, gamma)? } else { 0.0 };
        w.push(wi);
        y.push(yi);
    }
    let sw: f64 = w.iter().sum();
    if sw == 0.0 {
        return Err(Error::NoMatchedTrajectories);
    }
    let point = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sw;
    let se = boot.std_error(n, |c| {
        let (mut num, mut den) = (0.0, 0.0);
        for ((&k, wi), yi) in c.iter().zip(&w).zip(&y) {
            if k > 0 {
                num += k as f64 * wi * yi;
                den += k as f64 * wi;
            }
        }
        (den > 0.0).then(|| num / den)
    });
    Ok(ValueEstimate::new(point, se, effective_sample_fraction(&w), boot))
}

/// Linear outcome model `mu(a, H) = theta . phi(H, a)` on stage 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeFit {
    pub map: FeatureMap,
    pub theta: Vec<f64>,
}

impl OutcomeFit {
    /// Least-squares fit of the stage-0 reward on `phi(H_0, A_0)`.
    pub fn fit(data: &Dataset, map: &FeatureMap, lambda: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = data.len();
        let mut x = DMatrix::zeros(n, map.output_dim());
        let mut y = DVector::zeros(n);
        for (i, tr) in data.trajectories.iter().enumerate() {
            let s = history_summary_indexed(tr, 0, map, i)?;
            for (j, v) in map.features(&s, tr.stages[0].action.0).iter().enumerate() {
                x[(i, j)] = *v;
            }
            y[i] = tr.stages[0].reward.ok_or(Error::MissingReward { traj: i, stage: 0 })?;
        }
        let theta = ridge_fit(&x, &y, lambda)?;
        Ok(Self { map: map.clone(), theta: theta.as_slice().to_vec() })
    }

    pub fn predict(&self, traj: &Trajectory, a: usize, traj_index: usize) -> Result<f64> {
        let s = history_summary_indexed(traj, 0, &self.map, traj_index)?;
        Ok(self.map.score(&self.theta, &s, a))
    }
}

fn single_stage(data: &Dataset) -> Result<()> {
    if data.horizon != Horizon::Finite(0) {
        return Err(invalid("estimator requires single-stage data"));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn mean_estimate(terms: &[f64], ess: f64, boot: Bootstrap) -> ValueEstimate {
    let n = terms.len() as f64;
    let point = terms.iter().sum::<f64>() / n;
    let se = boot.std_error(terms.len(), |c| Some(c.iter().zip(terms).map(|(&k, v)| k as f64 * v).sum::<f64>() / n));
    ValueEstimate::new(point, se, ess, boot)
}

/// Augmented IPTW for a single-stage binary regime:
/// `P_N[ 1{A=d} Y / pi_d - (1{A=d} - pi_d) / pi_d * mu_d ]` with
/// `pi_d = pi(d(H) | H)` and `mu_d = mu(d(H), H)`.
///
/// The standard error resamples the per-unit terms with both working models
/// held fixed.
pub fn value_aiptw(
    data: &Dataset,
    regime: &Regime,
    propensity: &FittedPropensity,
    outcome: &OutcomeFit,
    boot: Bootstrap,
) -> Result<ValueEstimate> {
    single_stage(data)?;
    let mut terms = Vec::with_capacity(data.len());
    let mut weights = Vec::with_capacity(data.len());
    for (i, tr) in data.trajectories.iter().enumerate() {
        let d = regime.rule(0).decide(&summary_for(regime, tr, 0, i)?);
        if d > 1 {
            return Err(Error::NotBinaryAction(d));
        }
        let p1 = propensity.prob_one(tr, 0, i)?;
        let pi_d = if d == 1 { p1 } else { 1.0 - p1 };
        let mu_d = outcome.predict(tr, d, i)?;
        let hit = if tr.stages[0].action.0 == d { 1.0 } else { 0.0 };
        let y = if hit > 0.0 { tr.stages[0].reward.ok_or(Error::MissingReward { traj: i, stage: 0 })? } else { 0.0 };
        terms.push(hit * y / pi_d - (hit - pi_d) / pi_d * mu_d);
        weights.push(hit / pi_d);
    }
    Ok(mean_estimate(&terms, effective_sample_fraction(&weights), boot))
}

/// Outcome-model plug-in `P_N[mu(d(H), H)]`.
pub fn plug_in_value(data: &Dataset, regime: &Regime, outcome: &OutcomeFit, boot: Bootstrap) -> Result<ValueEstimate> {
    single_stage(data)?;
    let terms = data
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            let d = regime.rule(0).decide(&summary_for(regime, tr, 0, i)?);
            outcome.predict(tr, d, i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_estimate(&terms, 1.0, boot))
}

/// `w_t = 1 / prod_{tau <= t} pi_tau(A_tau | H_tau)` from the recorded
/// behavior probabilities.
pub fn msm_weights(traj: &Trajectory) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(traj.len());
    let mut w = 1.0;
    for (t, s) in traj.stages.iter().enumerate() {
        let p = s.behavior_prob.ok_or(Error::MissingBehaviorProb { traj: 0, stage: t })?;
        if !(p > 0.0) {
            return Err(Error::PositivityViolation { traj: 0, stage: t });
        }
        w /= p;
        out.push(w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ActionId, StageRecord, StateVector, Terminal};
    use crate::features::FeatureKind;
    use crate::regime::StageRule;
    use crate::rng::RngSpec;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;

    fn constant_regime(action: usize) -> Regime {
        // Scores (0, theta) for a = 0, 1 with intercept-only features.
        let theta = if action == 1 { vec![0.0, 1.0] } else { vec![0.0, -1.0] };
        Regime::new(vec![StageRule::Deterministic {
            theta,
            map: FeatureMap::new(FeatureKind::Linear, vec![], vec![], true, 2),
            threshold: 0.0,
        }])
    }

    fn single(rows: &[(f64, usize, f64, f64)]) -> Dataset {
        let trajs = rows
            .iter()
            .map(|&(x, a, y, p)| {
                Trajectory::new(vec![StageRecord::new(StateVector(vec![x]), ActionId(a), Some(y), Some(p))], Terminal::Unobserved).unwrap()
            })
            .collect();
        Dataset::new(trajs, Horizon::Finite(0), vec![2]).unwrap()
    }

    #[test]
    fn constant_weights_give_sample_mean() {
        let data = single(&[(0.0, 1, 2.0, 0.5), (1.0, 1, 4.0, 0.5), (2.0, 1, 9.0, 0.5)]);
        let v = value_iptw(&data, &constant_regime(1), &BehaviorProbs::Recorded, 1.0, Bootstrap::default()).unwrap();
        assert_eq!(v.point, 5.0);
        assert_eq!(v.effective_sample_fraction, 1.0);
        assert!(!v.low_ess_warning);
    }

    #[test]
    fn unmatched_regime_errors() {
        let data = single(&[(0.0, 1, 2.0, 0.5), (1.0, 1, 4.0, 0.5)]);
        let err = value_iptw(&data, &constant_regime(0), &BehaviorProbs::Recorded, 1.0, Bootstrap::default());
        assert_eq!(err.unwrap_err(), Error::NoMatchedTrajectories);
    }

    #[test]
    fn zero_supplied_probability_on_matched_path() {
        let data = single(&[(0.0, 1, 2.0, 0.5), (1.0, 1, 4.0, 0.5)]);
        let probs = BehaviorProbs::Supplied(vec![vec![0.5], vec![0.0]]);
        let err = value_iptw(&data, &constant_regime(1), &probs, 1.0, Bootstrap::default()).unwrap_err();
        assert_eq!(err, Error::PositivityViolation { traj: 1, stage: 0 });
    }

    #[test]
    fn iptw_ratio_oracle() {
        let rows = [(0.0, 1, 2.0, 0.25), (0.0, 0, 7.0, 0.75), (1.0, 1, 4.0, 0.5), (2.0, 1, 1.0, 0.8)];
        let data = single(&rows);
        let v = value_iptw(&data, &constant_regime(1), &BehaviorProbs::Recorded, 1.0, Bootstrap::default()).unwrap();
        let (num, den) = rows.iter().filter(|r| r.1 == 1).fold((0.0, 0.0), |(n, d), r| (n + r.2 / r.3, d + 1.0 / r.3));
        assert!((v.point - num / den).abs() < 1e-12);
        let w = [4.0, 0.0, 2.0, 1.25];
        let ess = w.iter().sum::<f64>().powi(2) / (4.0 * w.iter().map(|x| x * x).sum::<f64>());
        assert!((v.effective_sample_fraction - ess).abs() < 1e-12);
    }

    #[test]
    fn aiptw_reduces_to_iptw_with_zero_outcome_model() {
        let mut rng = RngSpec::new(1, 0).stream();
        let rows: Vec<_> =
            (0..300).map(|_| (rng.random_range(-1.0..1.0), usize::from(rng.random::<bool>()), rng.random_range(0.0..3.0), 0.5)).collect();
        let data = single(&rows);
        let map = FeatureMap::interaction(vec![0], vec![0]);
        let zero = OutcomeFit { map: map.clone(), theta: vec![0.0; map.output_dim()] };
        let regime = constant_regime(1);
        let a = value_aiptw(&data, &regime, &FittedPropensity::Constant { p: 0.5 }, &zero, Bootstrap::default()).unwrap();
        let mean = rows.iter().filter(|r| r.1 == 1).map(|r| r.2 / 0.5).sum::<f64>() / 300.0;
        assert!((a.point - mean).abs() < 1e-12);
    }

    #[test]
    fn msm_weight_examples() {
        let recs = (0..3).map(|_| StageRecord::new(StateVector(vec![0.0]), ActionId(0), Some(0.0), Some(0.5))).collect();
        let tr = Trajectory::new(recs, Terminal::Unobserved).unwrap();
        assert_eq!(msm_weights(&tr).unwrap()[2], 8.0);
        let one = Trajectory::new(vec![StageRecord::new(StateVector(vec![0.0]), ActionId(0), Some(0.0), Some(1.0))], Terminal::Unobserved)
            .unwrap();
        assert_eq!(msm_weights(&one).unwrap(), vec![1.0]);
    }

    proptest! {
        #[test]
        fn msm_telescopes(probs in prop::collection::vec(0.01f64..=1.0, 1..12)) {
            let recs = probs
                .iter()
                .map(|&p| StageRecord::new(StateVector(vec![0.0]), ActionId(0), Some(0.0), Some(p)))
                .collect();
            let tr = Trajectory::new(recs, Terminal::Unobserved).unwrap();
            let w = msm_weights(&tr).unwrap();
            prop_assert!((w[0] - 1.0 / probs[0]).abs() <= 1e-12 * w[0]);
            for t in 1..w.len() {
                prop_assert!(w[t] >= w[t - 1]);
                prop_assert!((w[t] - w[t - 1] / probs[t]).abs() <= 1e-12 * w[t]);
            }
        }
    }
}
