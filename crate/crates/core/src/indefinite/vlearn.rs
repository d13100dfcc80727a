//! V-learning: off-policy evaluation and search over a parametric policy
//! class for indefinite-horizon data.
//!
//! For a candidate policy `pi` and `V(x; theta) = theta . phi(x)`,
//! `Lambda(theta) = P_N sum_t rho_t (Y_t + gamma V(X_{t+1}) - V(X_t)) phi(X_t)`
//! with `rho_t = pi(A_t | X_t) / mu_t(A_t)` and `phi(c) = 0`. `Lambda` is
//! linear in `theta`, so minimizing `||Lambda||^2 + lambda ||theta||^2` is
//! the linear system `(G^T G + lambda I) theta = G^T g`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::markov_steps;
use super::nelder_mead::{nelder_mead, SimplexOptions};
use crate::domain::Dataset;
use crate::error::{invalid, Error, Result};
use crate::features::{FeatureKind, FeatureMap};
use crate::linalg::spd_solve;
use crate::regime::{Regime, StageRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VLearningSpec {
    /// `phi(x)` is the main summary of this map.
    pub value_map: FeatureMap,
    /// `OneHotActionCross` map without main columns; its tailoring summary
    /// feeds a softmax with action 0 as reference.
    pub policy_map: FeatureMap,
    pub gamma: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Per-coordinate grid for the policy search.
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    /// Polish the best grid point with Nelder-Mead.
    #[serde(default)]
    pub refine: bool,
    /// Policy parameters are clamped to `[-bound, bound]`.
    #[serde(default = "default_bound")]
    pub bound: f64,
}

fn default_lambda() -> f64 {
    0.01
}

fn default_grid() -> Vec<f64> {
    vec![-10.0, 0.0, 10.0]
}

fn default_bound() -> f64 {
    10.0
}

/// Largest number of grid points searched.
const MAX_GRID: usize = 1 << 20;

impl VLearningSpec {
    pub fn new(value_map: FeatureMap, policy_map: FeatureMap, gamma: f64) -> Self {
        Self { value_map, policy_map, gamma, lambda: default_lambda(), grid: default_grid(), refine: false, bound: default_bound() }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::DivergentReturn);
        }
        if self.policy_map.kind != FeatureKind::OneHotActionCross || self.policy_map.main_dim() != 0 {
            return Err(invalid("policy map must be OneHotActionCross without main columns"));
        }
        if !(self.lambda > 0.0) {
            return Err(invalid("V-learning penalty must be positive"));
        }
        Ok(())
    }

    /// Free policy parameters: one tailoring block per non-reference action.
    pub fn policy_dim(&self) -> usize {
        self.policy_map.n_actions.saturating_sub(1) * self.policy_map.tailoring_dim()
    }

    /// Softmax rule for free parameters `p` (clamped to the bound).
    pub fn policy_rule(&self, p: &[f64]) -> StageRule {
        let q = self.policy_map.tailoring_dim();
        let mut theta = vec![0.0; q];
        theta.extend(p.iter().map(|v| v.clamp(-self.bound, self.bound)));
        StageRule::Softmax { theta, map: self.policy_map.clone(), temperature: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VEvaluation {
    pub theta: Vec<f64>,
    /// `P_N V(X_0; theta)`; paths starting absorbed count as 0.
    pub value: f64,
    /// Importance ratio of every used transition, in data order.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VLearningFit {
    pub policy: Vec<f64>,
    pub evaluation: VEvaluation,
    pub candidates: usize,
}

/// Estimates `V^pi` for a stationary rule `pi` over Markov states.
pub fn vlearning_evaluate(data: &Dataset, spec: &VLearningSpec, policy: &StageRule) -> Result<VEvaluation> {
    spec.validate()?;
    let phi = |x| -> Result<Vec<f64>> { Ok(spec.value_map.summarize_state(x)?.main) };
    let steps = markov_steps(data)?;
    let dim = spec.value_map.main_dim();
    let n = data.len() as f64;
    let mut gmat = DMatrix::<f64>::zeros(dim, dim);
    let mut gvec = DVector::<f64>::zeros(dim);
    let mut ratios = Vec::with_capacity(steps.len());
    for s in &steps {
        let mu = s.behavior_prob.ok_or(Error::MissingBehaviorProb { traj: s.traj, stage: s.stage })?;
        let summary = policy.map().summarize_state(s.state)?;
        let rho = policy.probabilities(&summary)[s.action] / mu;
        ratios.push(rho);
        if rho == 0.0 {
            continue;
        }
        let f = DVector::from_vec(phi(s.state)?);
        let mut diff = f.clone();
        if let Some(x) = s.next {
            diff.axpy(-spec.gamma, &DVector::from_vec(phi(x)?), 1.0);
        }
        gmat.ger(rho / n, &f, &diff, 1.0);
        gvec.axpy(rho * s.reward / n, &f, 1.0);
    }
    let mut normal = gmat.tr_mul(&gmat);
    for i in 0..dim {
        normal[(i, i)] += spec.lambda;
    }
    let theta = spd_solve(&normal, &gmat.tr_mul(&gvec)).map_err(|_| Error::SingularW)?;
    let mut total = 0.0;
    for tr in &data.trajectories {
        if let Some(first) = tr.stages.first() {
            total += theta.dot(&DVector::from_vec(phi(&first.state)?));
        }
    }
    Ok(VEvaluation { theta: theta.as_slice().to_vec(), value: total / n, ratios })
}

/// Searches the softmax policy class for the largest estimated value.
pub fn vlearning_fit(data: &Dataset, spec: &VLearningSpec) -> Result<(VLearningFit, Regime)> {
    spec.validate()?;
    let dim = spec.policy_dim();
    let g = spec.grid.len().max(1);
    let total = (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(g).filter(|&v| v <= MAX_GRID));
    let total = total.ok_or(invalid("policy grid too large; shrink the grid or the policy map"))?;
    let grid = if spec.grid.is_empty() { vec![0.0] } else { spec.grid.clone() };
    let mut best: Option<(Vec<f64>, VEvaluation)> = None;
    for idx in 0..total {
        let mut rest = idx;
        let p: Vec<f64> = (0..dim)
            .map(|_| {
                let v = grid[rest % g];
                rest /= g;
                v
            })
            .collect();
        let eval = vlearning_evaluate(data, spec, &spec.policy_rule(&p))?;
        if best.as_ref().is_none_or(|(_, b)| eval.value > b.value) {
            best = Some((p, eval));
        }
    }
    let (mut p, mut eval) = best.expect("grid has at least one point");
    if spec.refine && dim > 0 {
        let m = nelder_mead(
            |x| vlearning_evaluate(data, spec, &spec.policy_rule(x)).map_or(f64::INFINITY, |e| -e.value),
            &p,
            &SimplexOptions { tol: 1e-8, max_evals: 2000, step: 1.0 },
        );
        if -m.value > eval.value {
            p = m.x.iter().map(|v| v.clamp(-spec.bound, spec.bound)).collect();
            eval = vlearning_evaluate(data, spec, &spec.policy_rule(&p))?;
        }
    }
    let regime = Regime::new(vec![spec.policy_rule(&p)]);
    Ok((VLearningFit { policy: p, evaluation: eval, candidates: total }, regime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::MdpSpec;
    use crate::rng::RngSpec;

    fn spec(m: &MdpSpec) -> VLearningSpec {
        let value_map = FeatureMap::new(FeatureKind::Linear, (0..m.n_states).collect(), vec![], false, m.n_actions);
        let policy_map = FeatureMap::new(FeatureKind::OneHotActionCross, vec![], (0..m.n_states).collect(), false, m.n_actions);
        VLearningSpec::new(value_map, policy_map, m.gamma)
    }

    #[test]
    fn behavior_policy_has_unit_ratios_and_matches_exact_value() {
        let mut m = MdpSpec::three_state_example();
        m.reward_noise = 0.5;
        let data = m.rollout(&m.uniform_policy(), 4000, 1000, &mut RngSpec::new(0, 0).stream()).unwrap();
        // The default penalty shrinks values by several percent on this chain.
        let s = VLearningSpec { lambda: 1e-4, ..spec(&m) };
        let eval = vlearning_evaluate(&data, &s, &s.policy_rule(&[0.0, 0.0, 0.0])).unwrap();
        assert!(eval.ratios.iter().all(|&r| (r - 1.0).abs() < 1e-12));
        let exact = m.evaluate(&m.uniform_policy()).unwrap();
        for x in 0..3 {
            assert!((eval.theta[x] - exact[x]).abs() < 0.1, "state {x}: {} vs {}", eval.theta[x], exact[x]);
        }
    }

    #[test]
    fn search_finds_optimal_policy() {
        let mut m = MdpSpec::three_state_example();
        m.reward_noise = 0.5;
        let data = m.rollout(&m.uniform_policy(), 2000, 1000, &mut RngSpec::new(1, 0).stream()).unwrap();
        let (fit, regime) = vlearning_fit(&data, &spec(&m)).unwrap();
        let policy: Vec<usize> = (0..3).map(|x| regime.decide_state(0, &m.encode(x)).unwrap()).collect();
        assert_eq!(policy, m.optimal_policy());
        assert_eq!(fit.candidates, 27);
    }

    #[test]
    fn missing_behavior_prob_rejected() {
        let m = MdpSpec::three_state_example();
        let mut data = m.rollout(&m.uniform_policy(), 10, 1000, &mut RngSpec::new(2, 0).stream()).unwrap();
        let i = data.trajectories.iter().position(|t| !t.is_empty()).unwrap();
        data.trajectories[i].stages[0].behavior_prob = None;
        let s = spec(&m);
        assert_eq!(vlearning_evaluate(&data, &s, &s.policy_rule(&[0.0; 3])).unwrap_err(), Error::MissingBehaviorProb { traj: i, stage: 0 });
    }
}
