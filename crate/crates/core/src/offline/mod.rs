//! Finite-horizon regime estimation and off-policy value estimation.

use alloc::vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::RngSpec;

pub mod gest;
pub mod owl;
pub mod propensity;
pub mod qlearn;
pub mod value;

pub use gest::{g_estimation_fit, AdjunctModel, ContrastModel, GEstimationSpec};
pub use owl::{bowl_fit, owl_fit, BowlFit, OwlFit, OwlOptions};
pub use propensity::{expit, FittedPropensity, LogisticFit, PropensityModel};
pub use qlearn::{q_learning_fit, soft_threshold_regime, tabular_q_update, QLoss, QModel, TabularQ};
pub use value::{msm_weights, plug_in_value, value_aiptw, value_iptw, BehaviorProbs, OutcomeFit};

/// Smallest accepted number of bootstrap resamples.
pub const MIN_BOOTSTRAP: usize = 200;

/// Below this effective sample fraction an estimate carries a warning.
pub const LOW_ESS_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub rng: RngSpec,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self { resamples: MIN_BOOTSTRAP, rng: RngSpec::new(0, 0) }
    }
}

impl Bootstrap {
    pub fn new(resamples: usize, rng: RngSpec) -> Result<Self> {
        if resamples < MIN_BOOTSTRAP {
            return Err(invalid(alloc::format!("at least {MIN_BOOTSTRAP} bootstrap resamples required")));
        }
        Ok(Self { resamples, rng })
    }

    /// Standard deviation of `stat` over multinomial resamples of `n` units.
    ///
    /// `stat` receives per-unit multiplicities and may return `None` when the
    /// statistic is undefined on a resample; such resamples are skipped.
    pub(crate) fn std_error(&self, n: usize, mut stat: impl FnMut(&[u32]) -> Option<f64>) -> f64 {
        let mut rng = self.rng.stream();
        let mut counts = vec![0u32; n];
        let (mut k, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for _ in 0..self.resamples {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            if let Some(v) = stat(&counts) {
                // Welford update.
                k += 1;
                let delta = v - mean;
                mean += delta / k as f64;
                m2 += delta * (v - mean);
            }
        }
        if k < 2 {
            0.0
        } else {
            libm::sqrt(m2 / (k - 1) as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub point: f64,
    pub std_error: f64,
    /// `(sum w)^2 / (N sum w^2)`; 1 for unweighted estimators.
    pub effective_sample_fraction: f64,
    /// Set when the effective sample fraction falls below [`LOW_ESS_FRACTION`].
    pub low_ess_warning: bool,
    pub bootstrap: Bootstrap,
}

impl ValueEstimate {
    pub(crate) fn new(point: f64, std_error: f64, ess: f64, bootstrap: Bootstrap) -> Self {
        Self { point, std_error, effective_sample_fraction: ess, low_ess_warning: ess < LOW_ESS_FRACTION, bootstrap }
    }
}

/// `(sum w)^2 / (N sum w^2)`.
pub fn effective_sample_fraction(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / (weights.len() as f64 * s2)
    }
}
