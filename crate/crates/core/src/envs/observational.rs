//! Single-decision observational study with a confounded binary treatment.
//!
//! `x ~ N(0, 1)`, `P(A = 1 | x) = expit(alpha0 + alpha1 x)`,
//! `Y = beta0 + beta1 x + beta2 x^2 + A (psi0 + psi1 x) + sigma e`.
//! The quadratic term is what a linear outcome model gets wrong; a constant
//! propensity gets the confounding wrong.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{ActionId, Dataset, Horizon, StageRecord, StateVector, Terminal, Trajectory};
use crate::error::{invalid, Result};
use crate::features::{FeatureKind, FeatureMap};
use crate::offline::{expit, AdjunctModel, PropensityModel};
use crate::regime::{Regime, StageRule};
use crate::rng::Stream;

use super::expected_positive_part;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationalSpec {
    pub alpha: [f64; 2],
    pub beta: [f64; 3],
    pub psi: [f64; 2],
    pub sigma: f64,
}

impl Default for ObservationalSpec {
    fn default() -> Self {
        Self { alpha: [0.0, 1.0], beta: [1.0, 1.0, 1.0], psi: [0.5, 0.5], sigma: 1.0 }
    }
}

/// Which nuisance model is wrong in a double-robustness cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Misspecification {
    None,
    Outcome,
    Propensity,
    Both,
}

impl Misspecification {
    pub fn outcome_wrong(self) -> bool {
        matches!(self, Self::Outcome | Self::Both)
    }

    pub fn propensity_wrong(self) -> bool {
        matches!(self, Self::Propensity | Self::Both)
    }
}

impl ObservationalSpec {
    pub fn propensity(&self, x: f64) -> f64 {
        expit(self.alpha[0] + self.alpha[1] * x)
    }

    pub fn blip(&self, x: f64) -> f64 {
        self.psi[0] + self.psi[1] * x
    }

    pub fn simulate(&self, n: usize, rng: &mut Stream) -> Result<Dataset> {
        if !(self.sigma >= 0.0) {
            return Err(invalid("sigma must be >= 0"));
        }
        let trajs = (0..n)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let p = self.propensity(x);
                let u: f64 = rng.random();
                let a = usize::from(u < p);
                let e: f64 = rng.sample(StandardNormal);
                let y = self.beta[0] + self.beta[1] * x + self.beta[2] * x * x + a as f64 * self.blip(x) + self.sigma * e;
                let pa = if a == 1 { p } else { 1.0 - p };
                Trajectory::new(vec![StageRecord::new(StateVector(vec![x]), ActionId(a), Some(y), Some(pa))], Terminal::Unobserved)
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(trajs, Horizon::Finite(0), vec![2])
    }

    /// Value of the optimal rule `1{psi0 + psi1 x > 0}`.
    pub fn optimal_value(&self) -> f64 {
        self.beta[0] + self.beta[2] + expected_positive_part(self.psi[0], self.psi[1].abs())
    }

    pub fn oracle_regime(&self) -> Regime {
        Regime::new(vec![StageRule::Deterministic {
            theta: vec![0.0, 0.0, self.psi[0], self.psi[1]],
            map: FeatureMap::interaction(vec![0], vec![0]),
            threshold: 0.0,
        }])
    }

    /// Outcome feature map for a cell: `(1, x, x^2, a, a x, a x^2)` when
    /// correct, `(1, a)` when wrong.
    pub fn outcome_map(&self, cell: Misspecification) -> FeatureMap {
        if cell.outcome_wrong() {
            FeatureMap::new(FeatureKind::Linear, vec![], vec![], true, 2)
        } else {
            FeatureMap::new(FeatureKind::Polynomial { degree: 2 }, vec![0], vec![0], true, 2)
        }
    }

    /// Treatment-free adjunct for G-estimation: quadratic when correct,
    /// intercept-only when wrong.
    pub fn adjunct(&self, cell: Misspecification) -> AdjunctModel {
        if cell.outcome_wrong() {
            AdjunctModel::new(vec![])
        } else {
            AdjunctModel::polynomial(vec![0], 2)
        }
    }

    pub fn propensity_model(&self, cell: Misspecification) -> PropensityModel {
        if cell.propensity_wrong() {
            PropensityModel::Constant
        } else {
            PropensityModel::Logistic { columns: vec![0] }
        }
    }

    /// Blip map `(1, x)` for G-estimation.
    pub fn contrast_map(&self) -> FeatureMap {
        FeatureMap::interaction(vec![], vec![0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;

    #[test]
    fn propensity_depends_on_covariate() {
        let spec = ObservationalSpec::default();
        let data = spec.simulate(20_000, &mut RngSpec::new(0, 0).stream()).unwrap();
        let (mut hi, mut nhi, mut lo, mut nlo) = (0.0, 0.0, 0.0, 0.0);
        for tr in &data.trajectories {
            let s = &tr.stages[0];
            if s.state.0[0] > 0.0 {
                hi += s.action.0 as f64;
                nhi += 1.0;
            } else {
                lo += s.action.0 as f64;
                nlo += 1.0;
            }
        }
        assert!(hi / nhi > 0.6 && lo / nlo < 0.4);
    }

    #[test]
    fn maps_have_expected_dimensions() {
        let spec = ObservationalSpec::default();
        assert_eq!(spec.outcome_map(Misspecification::Outcome).output_dim(), 2);
        assert_eq!(spec.outcome_map(Misspecification::None).output_dim(), 6);
    }
}
