//! Double-robustness study on the observational design.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::envs::{Misspecification, ObservationalSpec};
use crate::error::{Error, Result};
use crate::offline::{g_estimation_fit, plug_in_value, value_aiptw, Bootstrap, GEstimationSpec, OutcomeFit};
use crate::rng::RngSpec;

/// Estimates from one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrReplicate {
    pub aiptw: f64,
    pub aiptw_se: f64,
    pub plug_in: f64,
    /// G-estimated blip coefficients `(psi0, psi1)`.
    pub gest: Vec<f64>,
}

/// Simulates `n` units with `rng.child(0)` and fits every estimator under
/// the working models of `cell`. Values target the oracle rule.
pub fn dr_replicate(
    spec: &ObservationalSpec,
    cell: Misspecification,
    n: usize,
    rng: RngSpec,
    boot_resamples: usize,
) -> Result<DrReplicate> {
    let data = spec.simulate(n, &mut rng.child(0).stream())?;
    let regime = spec.oracle_regime();
    let boot = Bootstrap::new(boot_resamples, rng.child(1))?;
    let propensity = spec.propensity_model(cell).fit(&data, 0)?;
    let outcome = OutcomeFit::fit(&data, &spec.outcome_map(cell), 0.0)?;
    let aiptw = value_aiptw(&data, &regime, &propensity, &outcome, boot)?;
    let plug_in = plug_in_value(&data, &regime, &outcome, boot)?;
    let gspec = GEstimationSpec {
        contrast_maps: vec![spec.contrast_map()],
        propensity: vec![spec.propensity_model(cell)],
        adjunct: vec![spec.adjunct(cell)],
        gamma: 1.0,
    };
    let (model, _) = g_estimation_fit(&data, &gspec)?;
    Ok(DrReplicate { aiptw: aiptw.point, aiptw_se: aiptw.std_error, plug_in: plug_in.point, gest: model.stages[0].psi.clone() })
}

/// Absolute bias of each estimator, averaged over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrSummary {
    pub replicates: usize,
    pub aiptw_bias: f64,
    pub plug_in_bias: f64,
    /// Largest absolute bias over the blip coefficients.
    pub gest_bias: f64,
}

impl DrSummary {
    pub fn new(spec: &ObservationalSpec, reps: &[DrReplicate]) -> Result<Self> {
        if reps.is_empty() {
            return Err(Error::EmptyInput);
        }
        let k = reps.len() as f64;
        let truth = spec.optimal_value();
        let mean = |f: &dyn Fn(&DrReplicate) -> f64| reps.iter().map(f).sum::<f64>() / k;
        let gest_bias = (0..2).map(|j| (mean(&|r| r.gest[j]) - spec.psi[j]).abs()).fold(0.0, f64::max);
        Ok(Self {
            replicates: reps.len(),
            aiptw_bias: (mean(&|r| r.aiptw) - truth).abs(),
            plug_in_bias: (mean(&|r| r.plug_in) - truth).abs(),
            gest_bias,
        })
    }
}
