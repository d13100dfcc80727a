//! Greedy gradient Q-learning for indefinite-horizon data.
//!
//! With `Q(x, a; theta) = theta . psi(x, a)` and `psi(c, .) = 0`, the
//! estimating function is
//! `D(theta) = P_N sum_t (Y_t + gamma max_a' Q(X_{t+1}, a') - Q(X_t, A_t)) psi(X_t, A_t)`
//! and `theta` minimizes `D^T W^{-1} D` with `W = P_N sum_t psi psi^T`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{nelder_mead, Minimum, SimplexOptions};
use super::{markov_transitions, Transition};
use crate::domain::{Dataset, StateVector};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{spd_factor, Factor};
use crate::regime::{first_max, Regime, StageRule};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgqOptions {
    /// Number of starts; the first is `theta = 0`, the rest `N(0, start_scale^2)`.
    pub starts: usize,
    pub start_scale: f64,
    pub simplex: SimplexOptions,
    /// Minima within this objective distance of the best are reported.
    pub near_tol: f64,
}

impl Default for GgqOptions {
    fn default() -> Self {
        Self { starts: 10, start_scale: 1.0, simplex: SimplexOptions::default(), near_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgqFit {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub map: FeatureMap,
    pub gamma: f64,
    /// Result of every start, in start order.
    pub minima: Vec<Minimum>,
    /// Distinct parameters whose objective is within `near_tol` of the best.
    pub near_minima: Vec<Vec<f64>>,
    pub non_unique: bool,
    pub converged: bool,
}

impl GgqFit {
    pub fn q_value(&self, x: &StateVector, a: usize) -> Result<f64> {
        let s = self.map.summarize_state(x)?;
        Ok(self.map.score(&self.theta, &s, a))
    }

    pub fn greedy(&self, x: &StateVector) -> Result<usize> {
        let s = self.map.summarize_state(x)?;
        Ok(first_max(&(0..self.map.n_actions).map(|a| self.map.score(&self.theta, &s, a)).collect::<Vec<_>>()))
    }

    pub fn regime(&self) -> Regime {
        Regime::new(vec![StageRule::Deterministic { theta: self.theta.clone(), map: self.map.clone(), threshold: 0.0 }])
    }
}

/// Precomputed pieces of `D(theta)`.
pub struct GgqObjective {
    transitions: Vec<Transition>,
    n: f64,
    gamma: f64,
    w: Factor,
    dim: usize,
}

impl GgqObjective {
    pub fn new(data: &Dataset, map: &FeatureMap, gamma: f64) -> Result<Self> {
        let transitions = markov_transitions(data, map)?;
        let dim = map.output_dim();
        let n = data.len() as f64;
        let mut w = DMatrix::<f64>::zeros(dim, dim);
        for tr in &transitions {
            let p = DVector::from_column_slice(&tr.psi);
            w.ger(1.0 / n, &p, &p, 1.0);
        }
        let w = spd_factor(&w).map_err(|_| Error::SingularW)?;
        Ok(Self { transitions, n, gamma, w, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn estimating_function(&self, theta: &[f64]) -> DVector<f64> {
        let mut d = DVector::<f64>::zeros(self.dim);
        for tr in &self.transitions {
            let q = dot(theta, &tr.psi);
            let next = tr.next.iter().map(|p| dot(theta, p)).fold(f64::NEG_INFINITY, f64::max);
            let next = if tr.next.is_empty() { 0.0 } else { next };
            let td = tr.reward + self.gamma * next - q;
            d.iter_mut().zip(&tr.psi).for_each(|(di, pi)| *di += td * pi);
        }
        d / self.n
    }

    /// `D^T W^{-1} D`.
    pub fn value(&self, theta: &[f64]) -> f64 {
        crate::linalg::inv_quad(&self.w, &self.estimating_function(theta))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn ggq_fit(data: &Dataset, map: &FeatureMap, gamma: f64, opts: &GgqOptions, rng: &mut Stream) -> Result<(GgqFit, Regime)> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::DivergentReturn);
    }
    let obj = GgqObjective::new(data, map, gamma)?;
    let dim = obj.dim();
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|i| if i == 0 { vec![0.0; dim] } else { (0..dim).map(|_| opts.start_scale * rng.sample::<f64, _>(StandardNormal)).collect() })
        .collect();
    let minima: Vec<Minimum> = starts.iter().map(|s| nelder_mead(|t| obj.value(t), s, &opts.simplex)).collect();
    let best = minima.iter().min_by(|a, b| a.value.total_cmp(&b.value)).expect("at least one start");
    let scale = 1.0 + best.x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut near_minima: Vec<Vec<f64>> = vec![best.x.clone()];
    for m in &minima {
        if m.value <= best.value + opts.near_tol
            && near_minima.iter().all(|x| x.iter().zip(&m.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 1e-3 * scale)
        {
            near_minima.push(m.x.clone());
        }
    }
    let fit = GgqFit {
        theta: best.x.clone(),
        objective: best.value,
        map: map.clone(),
        gamma,
        converged: best.converged,
        non_unique: near_minima.len() > 1,
        near_minima,
        minima: minima.clone(),
    };
    let regime = fit.regime();
    Ok((fit, regime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::MdpSpec;
    use crate::features::FeatureKind;
    use crate::rng::RngSpec;

    fn saturated(n_states: usize, n_actions: usize) -> FeatureMap {
        FeatureMap::new(FeatureKind::OneHotActionCross, vec![], (0..n_states).collect(), false, n_actions)
    }

    #[test]
    fn recovers_optimal_policy_on_chain() {
        let mut m = MdpSpec::three_state_example();
        m.reward_noise = 0.5;
        let data = m.rollout(&m.uniform_policy(), 400, 1000, &mut RngSpec::new(0, 0).stream()).unwrap();
        let (fit, regime) = ggq_fit(&data, &saturated(3, 2), m.gamma, &GgqOptions::default(), &mut RngSpec::new(0, 1).stream()).unwrap();
        assert!(fit.objective < 1e-8, "{}", fit.objective);
        let policy: Vec<usize> = (0..3).map(|x| regime.decide_state(0, &m.encode(x)).unwrap()).collect();
        assert_eq!(policy, m.optimal_policy());
        let q = m.optimal_q(1e-12);
        for x in 0..3 {
            for a in 0..2 {
                assert!((fit.q_value(&m.encode(x), a).unwrap() - q[x][a]).abs() < 0.3);
            }
        }
    }

    #[test]
    fn estimating_function_vanishes_at_true_q_without_noise() {
        let m = MdpSpec::three_state_example();
        let data = m.rollout(&m.uniform_policy(), 200, 1000, &mut RngSpec::new(1, 0).stream()).unwrap();
        let obj = GgqObjective::new(&data, &saturated(3, 2), m.gamma).unwrap();
        let q = m.optimal_q(1e-14);
        let theta: Vec<f64> = (0..2).flat_map(|a| (0..3).map(move |x| (x, a))).map(|(x, a)| q[x][a]).collect();
        assert!(obj.estimating_function(&theta).amax() < 1e-10);
        assert!(obj.value(&theta) < 1e-18);
    }

    #[test]
    fn unvisited_pair_gives_singular_w() {
        let m = MdpSpec::three_state_example();
        let data = m.rollout(&m.deterministic_policy(&[0, 1, 1]), 50, 1000, &mut RngSpec::new(2, 0).stream()).unwrap();
        let err = ggq_fit(&data, &saturated(3, 2), m.gamma, &GgqOptions::default(), &mut RngSpec::new(0, 0).stream()).unwrap_err();
        assert_eq!(err, Error::SingularW);
    }
}
