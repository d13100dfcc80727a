//! Contrast-based A-learning by G-estimation, binary actions `{0, 1}`.
//!
//! The stage-`t` contrast is `C_t(h, a; psi) = a psi . h1` against the
//! reference action 0, and `lambda_t = dC/dpsi` at `a = 1`, i.e. `h1`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Horizon};
use crate::error::{invalid, Error, Result};
use crate::features::{history_summary_indexed, FeatureKind, FeatureMap};
use crate::offline::propensity::{FittedPropensity, PropensityModel};
use crate::regime::{Regime, StageRule};
use crate::regression::ridge_fit;

/// Linear working model `theta(H) = beta . (1, H[columns])` for the
/// treatment-free outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjunctModel {
    pub columns: Vec<usize>,
    #[serde(default)]
    pub degree: u32,
}

impl AdjunctModel {
    pub fn new(columns: Vec<usize>) -> Self {
        Self { columns, degree: 1 }
    }

    /// Adds powers up to `degree` of every column.
    pub fn polynomial(columns: Vec<usize>, degree: u32) -> Self {
        Self { columns, degree }
    }

    fn map(&self) -> FeatureMap {
        FeatureMap::new(FeatureKind::Polynomial { degree: self.degree.max(1) }, self.columns.clone(), vec![], true, 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GEstimationSpec {
    /// Binary `LinearWithActionInteraction` map; its tailoring summary is `h1`.
    /// One entry per stage, or a single entry reused at every stage.
    pub contrast_maps: Vec<FeatureMap>,
    pub propensity: Vec<PropensityModel>,
    pub adjunct: Vec<AdjunctModel>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastStage {
    pub psi: Vec<f64>,
    pub map: FeatureMap,
    pub propensity: FittedPropensity,
    pub adjunct_coef: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastModel {
    pub stages: Vec<ContrastStage>,
}

impl ContrastModel {
    /// `d_t(h) = 1{psi_t . h1 > 0}`.
    pub fn regime(&self) -> Regime {
        Regime::new(
            self.stages
                .iter()
                .map(|s| {
                    let mut theta = vec![0.0; s.map.main_dim()];
                    theta.extend_from_slice(&s.psi);
                    StageRule::Deterministic { theta, map: s.map.clone(), threshold: 0.0 }
                })
                .collect(),
        )
    }
}

fn pick<T>(items: &[T], t: usize) -> &T {
    &items[t.min(items.len() - 1)]
}

/// Backward G-estimation. Earlier stages use the pseudo-outcome
/// `Y_{t+1} + gamma [Ytilde_{t+1} + (d_{t+1} - A_{t+1}) psi_{t+1} . h1_{t+1}]`.
pub fn g_estimation_fit(data: &Dataset, spec: &GEstimationSpec) -> Result<(ContrastModel, Regime)> {
    let Horizon::Finite(last) = data.horizon else {
        return Err(invalid("g_estimation_fit needs a finite-horizon dataset"));
    };
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if spec.contrast_maps.is_empty() || spec.propensity.is_empty() || spec.adjunct.is_empty() {
        return Err(invalid("G-estimation needs at least one contrast map, propensity and adjunct model"));
    }
    for m in &spec.contrast_maps {
        if m.n_actions != 2 || m.kind != FeatureKind::LinearWithActionInteraction {
            return Err(invalid("contrast maps must be binary linear-with-interaction maps"));
        }
    }
    let n = data.len();
    let rewards: Vec<Vec<f64>> = data.trajectories.iter().enumerate().map(|(i, tr)| tr.complete_rewards(i)).collect::<Result<_>>()?;
    for tr in &data.trajectories {
        if let Some(s) = tr.stages.iter().find(|s| s.action.0 > 1) {
            return Err(Error::NotBinaryAction(s.action.0));
        }
    }

    let mut future = vec![0.0; n];
    let mut stages = Vec::with_capacity(last + 1);
    for t in (0..=last).rev() {
        let map = pick(&spec.contrast_maps, t);
        let adj_map = pick(&spec.adjunct, t).map();
        let propensity = pick(&spec.propensity, t).fit(data, t)?;
        let q = map.tailoring_dim();
        let g = adj_map.main_dim();

        let mut h1 = Vec::with_capacity(n);
        let mut gx = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut pi = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for (i, tr) in data.trajectories.iter().enumerate() {
            h1.push(history_summary_indexed(tr, t, map, i)?.tailoring);
            gx.push(history_summary_indexed(tr, t, &adj_map, i)?.main);
            a.push(tr.stages[t].action.0 as f64);
            pi.push(propensity.prob_one(tr, t, i)?);
            y.push(rewards[i][t] + future[i]);
        }

        // Adjunct: joint least squares of Ytilde on (g(H), A h1).
        let design = DMatrix::from_fn(n, g + q, |i, j| if j < g { gx[i][j] } else { a[i] * h1[i][j - g] });
        let coef = ridge_fit(&design, &DVector::from_column_slice(&y), 0.0)?;
        let adjunct_coef: Vec<f64> = coef.as_slice()[..g].to_vec();

        // sum_i h1 (A - pi) [Y - theta(H) - A h1 . psi] = 0.
        let mut lhs = DMatrix::<f64>::zeros(q, q);
        let mut rhs = DVector::<f64>::zeros(q);
        for i in 0..n {
            let resid = a[i] - pi[i];
            let theta_h: f64 = gx[i].iter().zip(&adjunct_coef).map(|(x, b)| x * b).sum();
            for r in 0..q {
                rhs[r] += h1[i][r] * resid * (y[i] - theta_h);
                for c in 0..q {
                    lhs[(r, c)] += h1[i][r] * resid * a[i] * h1[i][c];
                }
            }
        }
        let psi = solve_square(lhs, &rhs)?;

        for i in 0..n {
            let blip: f64 = h1[i].iter().zip(psi.iter()).map(|(h, p)| h * p).sum();
            let d = if blip > 0.0 { 1.0 } else { 0.0 };
            future[i] = spec.gamma * (y[i] + (d - a[i]) * blip);
        }
        stages.push(ContrastStage { psi: psi.as_slice().to_vec(), map: map.clone(), propensity, adjunct_coef });
    }
    stages.reverse();
    let model = ContrastModel { stages };
    let regime = model.regime();
    Ok((model, regime))
}

/// LU solve with a relative pivot check.
fn solve_square(m: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = m.amax();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::SingularSystem);
    }
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..u.nrows()).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-12 * scale {
        return Err(Error::SingularSystem);
    }
    lu.solve(b).ok_or(Error::SingularSystem)
}
