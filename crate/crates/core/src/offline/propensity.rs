//! Working models for `P(A_t = 1 | H_t)`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Trajectory};
use crate::error::{Error, Result};
use crate::features::{history_summary_indexed, FeatureKind, FeatureMap};
use crate::linalg::spd_solve;

/// Small ridge keeping Newton steps defined under near-separation.
const LOGISTIC_RIDGE: f64 = 1e-6;
const LOGISTIC_MAX_ITERS: usize = 100;

pub fn expit(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PropensityModel {
    /// Use the recorded behavior probabilities.
    Known,
    /// Marginal treatment rate, ignoring history.
    Constant,
    /// `expit(gamma . (1, H_t[columns]))`.
    Logistic { columns: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coef: Vec<f64>,
    pub columns: Vec<usize>,
}

impl LogisticFit {
    fn map(&self) -> FeatureMap {
        FeatureMap::new(FeatureKind::Linear, self.columns.clone(), vec![], true, 2)
    }

    pub fn prob_one(&self, traj: &Trajectory, t: usize, traj_index: usize) -> Result<f64> {
        let s = history_summary_indexed(traj, t, &self.map(), traj_index)?;
        Ok(expit(s.main.iter().zip(&self.coef).map(|(x, b)| x * b).sum()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedPropensity {
    Known,
    Constant { p: f64 },
    Logistic(LogisticFit),
}

impl FittedPropensity {
    /// `P(A_t = 1 | H_t)`, required to lie strictly inside (0, 1).
    pub fn prob_one(&self, traj: &Trajectory, t: usize, traj_index: usize) -> Result<f64> {
        let p = match self {
            FittedPropensity::Known => {
                let rec = &traj.stages[t];
                let p = rec.behavior_prob.ok_or(Error::MissingBehaviorProb { traj: traj_index, stage: t })?;
                match rec.action.0 {
                    0 => 1.0 - p,
                    1 => p,
                    a => return Err(Error::NotBinaryAction(a)),
                }
            }
            FittedPropensity::Constant { p } => *p,
            FittedPropensity::Logistic(fit) => fit.prob_one(traj, t, traj_index)?,
        };
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::PropensityOutOfRange(p));
        }
        Ok(p)
    }

    /// Probability of the action actually taken at stage `t`.
    pub fn prob_taken(&self, traj: &Trajectory, t: usize, traj_index: usize) -> Result<f64> {
        let p1 = self.prob_one(traj, t, traj_index)?;
        Ok(if traj.stages[t].action.0 == 1 { p1 } else { 1.0 - p1 })
    }
}

impl PropensityModel {
    /// Fits the model on stage `t` of every trajectory long enough to reach it.
    pub fn fit(&self, data: &Dataset, t: usize) -> Result<FittedPropensity> {
        match self {
            PropensityModel::Known => Ok(FittedPropensity::Known),
            PropensityModel::Constant => {
                let (mut ones, mut n) = (0usize, 0usize);
                for traj in data.trajectories.iter().filter(|tr| tr.len() > t) {
                    match traj.stages[t].action.0 {
                        0 => {}
                        1 => ones += 1,
                        a => return Err(Error::NotBinaryAction(a)),
                    }
                    n += 1;
                }
                if n == 0 {
                    return Err(Error::EmptyInput);
                }
                Ok(FittedPropensity::Constant { p: ones as f64 / n as f64 })
            }
            PropensityModel::Logistic { columns } => {
                let map = FeatureMap::new(FeatureKind::Linear, columns.clone(), vec![], true, 2);
                let mut rows = Vec::new();
                let mut y = Vec::new();
                for (i, traj) in data.trajectories.iter().enumerate().filter(|(_, tr)| tr.len() > t) {
                    let a = traj.stages[t].action.0;
                    if a > 1 {
                        return Err(Error::NotBinaryAction(a));
                    }
                    rows.push(history_summary_indexed(traj, t, &map, i)?.main);
                    y.push(a as f64);
                }
                if rows.is_empty() {
                    return Err(Error::EmptyInput);
                }
                let x = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
                let coef = logistic_fit(&x, &DVector::from_vec(y))?;
                Ok(FittedPropensity::Logistic(LogisticFit { coef: coef.as_slice().to_vec(), columns: columns.clone() }))
            }
        }
    }
}

/// Newton-Raphson maximum likelihood for a logistic regression.
pub fn logistic_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, d) = x.shape();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let mut beta = DVector::zeros(d);
    for _ in 0..LOGISTIC_MAX_ITERS {
        let eta = x * &beta;
        let p = eta.map(expit);
        let grad = x.tr_mul(&(y - &p)) - &beta * LOGISTIC_RIDGE;
        let mut xw = x.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= p[i] * (1.0 - p[i]);
        }
        let mut hess = xw.tr_mul(x);
        for j in 0..d {
            hess[(j, j)] += LOGISTIC_RIDGE;
        }
        let step = spd_solve(&hess, &grad)?;
        beta += &step;
        if step.amax() < 1e-10 {
            break;
        }
    }
    Ok(beta)
}
