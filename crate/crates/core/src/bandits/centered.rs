//! Baseline-robust estimators that center features by the selection
//! distribution, plus an agent that logs the distribution it samples from.
//!
//! With `fbar = f(x, A) - sum_a pi(a) f(x, a)`:
//!
//! * `Bose`: `mu = (lambda I + sum fbar fbar^T)^{-1} sum fbar Y`.
//! * `Kim`: `mu = (lambda I + sum [fbar fbar^T + Cov_pi(f)])^{-1} sum 2 fbar Y`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{linear_scores, Agent, ArmFeatures, Decision};
use crate::error::{invalid, Error, Result};
use crate::regime::{masked_max, sample_index};
use crate::regression::SuffStats;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteredVariant {
    Bose,
    Kim,
}

/// One logged round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub arms: ArmFeatures,
    pub arm: usize,
    /// Selection distribution used on this round.
    pub probs: Option<Vec<f64>>,
    pub reward: Option<f64>,
}

fn centered_update(stats: &mut SuffStats, variant: CenteredVariant, arms: &ArmFeatures, arm: usize, probs: &[f64], y: f64) -> Result<()> {
    let dim = stats.dim();
    let mut mean = DVector::<f64>::zeros(dim);
    for (f, &p) in arms.features.iter().zip(probs) {
        mean.axpy(p, &DVector::from_column_slice(f), 1.0);
    }
    let fbar = DVector::from_column_slice(&arms.features[arm]) - &mean;
    match variant {
        CenteredVariant::Bose => stats.update(fbar.as_slice(), y),
        CenteredVariant::Kim => {
            let mut g = &fbar * fbar.transpose();
            for (f, &p) in arms.features.iter().zip(probs) {
                if p > 0.0 {
                    let dev = DVector::from_column_slice(f) - &mean;
                    g.ger(p, &dev, &dev, 1.0);
                }
            }
            stats.add_gram(&g)?;
            stats.add_moment(&(fbar * (2.0 * y)))
        }
    }
}

fn check_probs(probs: &[f64], arms: usize) -> Result<()> {
    if probs.len() != arms {
        return Err(Error::DimensionMismatch { expected: arms, got: probs.len() });
    }
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(invalid("selection distribution must be a probability vector"));
    }
    Ok(())
}

/// Centered estimate from a log. Rounds with a missing reward are skipped.
pub fn centered_estimate(log: &[LogEntry], variant: CenteredVariant, lambda: f64) -> Result<Vec<f64>> {
    let dim = log.first().and_then(|e| e.arms.features.first()).map(Vec::len).ok_or(Error::EmptyInput)?;
    let mut stats = SuffStats::new(dim, lambda)?;
    for (i, e) in log.iter().enumerate() {
        let probs = e.probs.as_ref().ok_or(Error::MissingSelectionDistribution(i))?;
        check_probs(probs, e.arms.arms())?;
        if let Some(y) = e.reward {
            centered_update(&mut stats, variant, &e.arms, e.arm, probs, y)?;
        }
    }
    Ok(stats.mean().as_slice().to_vec())
}

/// Plain ridge regression of rewards on the played arm's features.
pub fn uncentered_estimate(log: &[LogEntry], lambda: f64) -> Result<Vec<f64>> {
    let dim = log.first().and_then(|e| e.arms.features.first()).map(Vec::len).ok_or(Error::EmptyInput)?;
    let mut stats = SuffStats::new(dim, lambda)?;
    for e in log {
        if let Some(y) = e.reward {
            stats.update(&e.arms.features[e.arm], y)?;
        }
    }
    Ok(stats.mean().as_slice().to_vec())
}

/// Samples from the Thompson argmax distribution (estimated from `draws`
/// posterior samples) mixed with `epsilon` uniform exploration, and learns
/// with a centered estimator.
#[derive(Debug, Clone)]
pub struct CenteredAgent {
    stats: SuffStats,
    variant: CenteredVariant,
    nu: f64,
    epsilon: f64,
    draws: usize,
}

impl CenteredAgent {
    pub fn new(dim: usize, variant: CenteredVariant, nu: f64, lambda: f64, epsilon: f64, draws: usize) -> Result<Self> {
        if !(nu >= 0.0) || !(epsilon > 0.0 && epsilon <= 1.0) || draws == 0 {
            return Err(invalid("centered agent needs nu >= 0, epsilon in (0, 1] and draws > 0"));
        }
        Ok(Self { stats: SuffStats::new(dim, lambda)?, variant, nu, epsilon, draws })
    }

    pub fn selection_distribution(&self, arms: &ArmFeatures, rng: &mut Stream) -> Vec<f64> {
        let k = arms.arms();
        let mut counts = vec![0.0; k];
        for _ in 0..self.draws {
            let mu = self.stats.sample(self.nu, rng);
            let a = masked_max(&linear_scores(arms, mu.as_slice()), &arms.available).expect("checked availability");
            counts[a] += 1.0;
        }
        let n_avail = arms.available_arms().count() as f64;
        (0..k)
            .map(|a| if arms.available[a] { (1.0 - self.epsilon) * counts[a] / self.draws as f64 + self.epsilon / n_avail } else { 0.0 })
            .collect()
    }
}

impl Agent for CenteredAgent {
    fn name(&self) -> &'static str {
        match self.variant {
            CenteredVariant::Bose => "bose",
            CenteredVariant::Kim => "kim",
        }
    }

    fn step(&self, arms: &ArmFeatures, rng: &mut Stream) -> Result<Decision> {
        arms.check(self.stats.dim())?;
        let probs = self.selection_distribution(arms, rng);
        let arm = sample_index(&probs, rng);
        Ok(Decision { arm, probs: Some(probs), ..Decision::default() })
    }

    fn absorb(&mut self, arms: &ArmFeatures, d: &Decision, reward: Option<f64>, _rng: &mut Stream) -> Result<()> {
        let probs = d.probs.as_ref().ok_or(Error::MissingSelectionDistribution(self.stats.count()))?;
        let Some(y) = reward else { return Ok(()) };
        centered_update(&mut self.stats, self.variant, arms, d.arm, probs, y)
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        Some(self.stats.mean().as_slice().to_vec())
    }
}

/// `Cov_pi(f)` as a dense matrix; exposed for tests.
pub fn selection_covariance(arms: &ArmFeatures, probs: &[f64]) -> DMatrix<f64> {
    let dim = arms.features[0].len();
    let mut mean = DVector::<f64>::zeros(dim);
    for (f, &p) in arms.features.iter().zip(probs) {
        mean.axpy(p, &DVector::from_column_slice(f), 1.0);
    }
    let mut g = DMatrix::zeros(dim, dim);
    for (f, &p) in arms.features.iter().zip(probs) {
        let dev = DVector::from_column_slice(f) - &mean;
        g.ger(p, &dev, &dev, 1.0);
    }
    g
}
