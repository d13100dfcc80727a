//! Outcome weighted learning (single stage) and its backward multi-stage form.
//!
//! Rules are linear, `f(H) = w . h1`, with actions coded `A = -1` for index 0
//! and `A = +1` for index 1; the fitted regime picks action 1 when `f > 0`.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::domain::{ActionId, Dataset, Horizon};
use crate::error::{invalid, Error, Result};
use crate::features::{history_summary_indexed, FeatureKind, FeatureMap};
use crate::regime::{Regime, StageRule};

/// Rules with `||w||` at or below this are flagged degenerate.
pub const DEGENERATE_NORM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OwlOptions {
    pub lambda: f64,
    pub max_iters: usize,
    /// Multiplier `c` of the step `c R / (G sqrt(k))`.
    pub step_scale: f64,
}

impl Default for OwlOptions {
    fn default() -> Self {
        Self { lambda: 1e-3, max_iters: 2000, step_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwlFit {
    pub w: Vec<f64>,
    pub map: FeatureMap,
    /// Objective at the returned iterate.
    pub objective: f64,
    pub degenerate: bool,
}

impl OwlFit {
    pub fn rule(&self) -> StageRule {
        let mut theta = vec![0.0; self.map.main_dim()];
        theta.extend_from_slice(&self.w);
        StageRule::Deterministic { theta, map: self.map.clone(), threshold: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowlFit {
    pub stages: Vec<OwlFit>,
    /// `weights[t][i]`: classification weight of trajectory `i` at stage `t`.
    pub weights: Vec<Vec<f64>>,
}

/// `(1/N) sum_i v_i max(1 - a_i w.x_i, 0) + lambda ||w||^2`.
fn objective(w: &[f64], xs: &[Vec<f64>], signs: &[f64], weights: &[f64], lambda: f64) -> f64 {
    let n = xs.len() as f64;
    let loss: f64 = xs.iter().zip(signs).zip(weights).filter(|(_, &v)| v > 0.0).map(|((x, a), v)| v * (1.0 - a * dot(w, x)).max(0.0)).sum();
    loss / n + lambda * dot(w, w)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected subgradient descent from `w = 0`, returning the best iterate.
///
/// The minimizer lies in the ball `||w|| <= sqrt(F(0) / lambda)`, which is the
/// projection set.
fn hinge_solve(xs: &[Vec<f64>], signs: &[f64], weights: &[f64], opts: &OwlOptions) -> (Vec<f64>, f64) {
    let d = xs.first().map_or(0, Vec::len);
    let n = xs.len() as f64;
    let mut w = vec![0.0; d];
    let f0 = objective(&w, xs, signs, weights, opts.lambda);
    let radius = libm::sqrt(f0 / opts.lambda);
    let g_bound = xs.iter().zip(weights).map(|(x, v)| v * libm::sqrt(dot(x, x))).sum::<f64>() / n + 2.0 * opts.lambda * radius;
    let (mut best, mut best_obj) = (w.clone(), f0);
    if g_bound == 0.0 || radius == 0.0 {
        return (best, best_obj);
    }
    let mut grad = vec![0.0; d];
    for k in 1..=opts.max_iters {
        grad.iter_mut().zip(&w).for_each(|(g, wi)| *g = 2.0 * opts.lambda * wi);
        for ((x, a), v) in xs.iter().zip(signs).zip(weights) {
            if *v > 0.0 && a * dot(&w, x) < 1.0 {
                let scale = v * a / n;
                grad.iter_mut().zip(x).for_each(|(g, xi)| *g -= scale * xi);
            }
        }
        let step = opts.step_scale * radius / (g_bound * libm::sqrt(k as f64));
        w.iter_mut().zip(&grad).for_each(|(wi, g)| *wi -= step * g);
        let norm = libm::sqrt(dot(&w, &w));
        if norm > radius {
            w.iter_mut().for_each(|wi| *wi *= radius / norm);
        }
        let obj = objective(&w, xs, signs, weights, opts.lambda);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&w);
        }
    }
    (best, best_obj)
}

fn check_map(map: &FeatureMap) -> Result<()> {
    if map.n_actions != 2 || map.kind != FeatureKind::LinearWithActionInteraction {
        return Err(invalid("OWL rules need a binary linear-with-interaction map"));
    }
    Ok(())
}

/// Single-stage OWL with weights `Y / pi(A | H)`.
pub fn owl_fit(data: &Dataset, map: &FeatureMap, opts: &OwlOptions) -> Result<(OwlFit, Regime)> {
    if data.horizon != Horizon::Finite(0) {
        return Err(invalid("owl_fit requires single-stage data; use bowl_fit"));
    }
    let (fit, regime) = bowl_fit(data, core::slice::from_ref(map), &[opts.lambda], opts)?;
    Ok((fit.stages.into_iter().next().expect("one stage"), regime))
}

/// Backward OWL. Stage `t` weights are
/// `Y prod_{tau > t} 1{A_tau = d_tau(H_tau)} / prod_{tau >= t} pi_tau`, with
/// `Y` the total (undiscounted) return.
pub fn bowl_fit(data: &Dataset, maps: &[FeatureMap], lambdas: &[f64], opts: &OwlOptions) -> Result<(BowlFit, Regime)> {
    let Horizon::Finite(last) = data.horizon else {
        return Err(invalid("bowl_fit needs a finite-horizon dataset"));
    };
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if maps.is_empty() || lambdas.is_empty() {
        return Err(invalid("bowl_fit needs at least one feature map and penalty"));
    }
    for m in maps {
        check_map(m)?;
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(invalid(alloc::format!("OWL penalty must be positive, got {l}")));
    }
    let n = data.len();
    let mut totals = Vec::with_capacity(n);
    for (i, tr) in data.trajectories.iter().enumerate() {
        let y: f64 = tr.complete_rewards(i)?.iter().sum();
        if y < 0.0 {
            return Err(Error::NegativeReward(y));
        }
        for (t, s) in tr.stages.iter().enumerate() {
            if s.action.0 > 1 {
                return Err(Error::NotBinaryAction(s.action.0));
            }
            if s.behavior_prob.is_none() {
                return Err(Error::MissingBehaviorProb { traj: i, stage: t });
            }
        }
        totals.push(y);
    }

    // concordant[i]: prod over later stages of 1{A = d}; denom[i]: prod of pi.
    let mut concordant = vec![true; n];
    let mut denom = vec![1.0; n];
    let mut stages = Vec::with_capacity(last + 1);
    let mut all_weights = Vec::with_capacity(last + 1);
    for t in (0..=last).rev() {
        let map = &maps[t.min(maps.len() - 1)];
        let stage_opts = OwlOptions { lambda: lambdas[t.min(lambdas.len() - 1)], ..*opts };
        let mut xs = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (i, tr) in data.trajectories.iter().enumerate() {
            let rec = &tr.stages[t];
            denom[i] *= rec.behavior_prob.expect("checked above");
            xs.push(history_summary_indexed(tr, t, map, i)?.tailoring);
            signs.push(rec.action.signed_code());
            weights.push(if concordant[i] { totals[i] / denom[i] } else { 0.0 });
        }
        if weights.iter().all(|&v| v == 0.0) {
            return Err(Error::EmptyStageSample(t));
        }
        let (w, obj) = hinge_solve(&xs, &signs, &weights, &stage_opts);
        let degenerate = libm::sqrt(dot(&w, &w)) <= DEGENERATE_NORM;
        let fit = OwlFit { w, map: map.clone(), objective: obj, degenerate };
        for (i, x) in xs.iter().enumerate() {
            let d = ActionId(usize::from(dot(&fit.w, x) > 0.0));
            concordant[i] &= d == data.trajectories[i].stages[t].action;
        }
        stages.push(fit);
        all_weights.push(weights);
    }
    stages.reverse();
    all_weights.reverse();
    let regime = Regime::new(stages.iter().map(OwlFit::rule).collect());
    Ok((BowlFit { stages, weights: all_weights }, regime))
}

/// Minimizer of the weighted 0-1 loss over threshold rules
/// `1{s x > c}` on a grid, with `s in {+1, -1}`; exposed for oracle checks.
pub fn zero_one_threshold(xs: &[f64], actions: &[usize], weights: &[f64], grid: &[f64]) -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, 1.0, 0.0);
    for &s in &[1.0, -1.0] {
        for &c in grid {
            let loss: f64 = xs.iter().zip(actions).zip(weights).filter(|((x, &a), _)| usize::from(s * **x > c) != a).map(|(_, v)| v).sum();
            if loss < best.0 {
                best = (loss, s, c);
            }
        }
    }
    best
}
