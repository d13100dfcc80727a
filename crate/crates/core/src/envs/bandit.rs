//! Linear contextual bandit environments.
//!
//! Each round draws a Gaussian feature vector per arm and rewards
//! `Y = g_t + 1{a is not control} f(x, a) . theta + noise e`. The baseline
//! `g_t` never depends on the current action; it may depend on time, a
//! bounded random walk, the round's features and the previous action.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bandits::ArmFeatures;
use crate::error::{invalid, Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    /// `amplitude * sin(2 pi t / period)`.
    pub amplitude: f64,
    pub period: f64,
    /// Random-walk increment scale; the walk is clamped to `[-drift_bound, drift_bound]`.
    pub drift_step: f64,
    pub drift_bound: f64,
    /// Coefficient on the sum of every non-control arm's first feature.
    pub context_coef: f64,
    /// Added when the previous round sent a non-control arm.
    pub history_coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HabituationSpec {
    /// Days-since-sent saturates here; the feature is `min(days, cap) / cap`.
    pub cap: usize,
    /// Reward coefficient on that feature.
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditEnvSpec {
    pub arms: usize,
    /// Gaussian features per arm, excluding the habituation feature.
    pub dim: usize,
    /// Reward coefficients on the Gaussian features.
    pub theta: Vec<f64>,
    pub noise: f64,
    #[serde(default)]
    pub baseline: BaselineSpec,
    /// Arm 0 is a control arm with all-zero features.
    #[serde(default)]
    pub control_arm: bool,
    #[serde(default)]
    pub habituation: Option<HabituationSpec>,
    #[serde(default)]
    pub missing_prob: f64,
    /// Probability each non-control arm is available; at least one arm
    /// always is.
    #[serde(default = "one")]
    pub availability: f64,
}

fn one() -> f64 {
    1.0
}

impl BanditEnvSpec {
    /// Stationary `K = arms`, `d = dim` problem with a fixed unit-norm
    /// parameter and noise 0.5.
    pub fn stationary(arms: usize, dim: usize) -> Self {
        let norm = libm::sqrt(dim as f64);
        Self {
            arms,
            dim,
            theta: vec![1.0 / norm; dim],
            noise: 0.5,
            baseline: BaselineSpec::default(),
            control_arm: false,
            habituation: None,
            missing_prob: 0.0,
            availability: 1.0,
        }
    }

    /// Baseline that drifts, oscillates and tracks the features of every arm.
    pub fn adversarial(arms: usize, dim: usize) -> Self {
        Self {
            baseline: BaselineSpec {
                amplitude: 1.0,
                period: 500.0,
                drift_step: 0.05,
                drift_bound: 1.0,
                context_coef: 1.0,
                history_coef: 0.5,
            },
            ..Self::stationary(arms, dim)
        }
    }

    /// Binary send/no-send problem with a control arm.
    pub fn send_or_not(dim: usize) -> Self {
        Self { control_arm: true, ..Self::stationary(2, dim) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms < 2 || self.dim == 0 {
            return Err(invalid("bandit needs at least two arms and one feature"));
        }
        if self.theta.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: self.theta.len() });
        }
        if !(self.noise >= 0.0) || !(0.0..1.0).contains(&self.missing_prob) || !(self.availability > 0.0 && self.availability <= 1.0) {
            return Err(invalid("noise >= 0, missing_prob in [0, 1) and availability in (0, 1] required"));
        }
        if self.baseline.amplitude != 0.0 && !(self.baseline.period > 0.0) {
            return Err(invalid("sinusoidal baseline needs a positive period"));
        }
        if let Some(h) = &self.habituation {
            if h.cap == 0 {
                return Err(invalid("habituation cap must be positive"));
            }
        }
        Ok(())
    }

    /// Dimension of the feature vectors agents see.
    pub fn feature_dim(&self) -> usize {
        self.dim + usize::from(self.habituation.is_some())
    }

    /// Length of the shared context: the Gaussian features of every
    /// non-control arm.
    pub fn context_dim(&self) -> usize {
        (self.arms - usize::from(self.control_arm)) * self.dim
    }

    /// Full reward parameter over agent-visible features.
    pub fn full_theta(&self) -> Vec<f64> {
        let mut t = self.theta.clone();
        if let Some(h) = &self.habituation {
            t.push(h.effect);
        }
        t
    }

    fn is_control(&self, a: usize) -> bool {
        self.control_arm && a == 0
    }
}

/// One round's observation plus the quantities only the simulator knows.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub t: usize,
    pub arms: ArmFeatures,
    /// Conditional mean reward of every arm.
    pub means: Vec<f64>,
    pub baseline: f64,
}

impl Round {
    /// Best mean among available arms.
    pub fn best_mean(&self) -> f64 {
        self.means.iter().zip(&self.arms.available).filter(|(_, &ok)| ok).map(|(m, _)| *m).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub reward: Option<f64>,
    pub mean: f64,
    pub regret: f64,
}

#[derive(Debug, Clone)]
pub struct BanditEnv {
    spec: BanditEnvSpec,
    theta: Vec<f64>,
    t: usize,
    days: Vec<usize>,
    drift: f64,
    last_sent: bool,
}

impl BanditEnv {
    pub fn new(spec: BanditEnvSpec) -> Result<Self> {
        spec.validate()?;
        let cap = spec.habituation.as_ref().map_or(0, |h| h.cap);
        Ok(Self { theta: spec.full_theta(), days: vec![cap; spec.arms], spec, t: 0, drift: 0.0, last_sent: false })
    }

    pub fn spec(&self) -> &BanditEnvSpec {
        &self.spec
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// Days since `arm` was last sent, saturated at the habituation cap.
    pub fn days_since_sent(&self, arm: usize) -> usize {
        self.days[arm]
    }

    /// Conditional mean of `arm` given its features and the baseline.
    pub fn mean_reward(&self, f: &[f64], arm: usize, baseline: f64) -> f64 {
        if self.spec.is_control(arm) {
            baseline
        } else {
            baseline + f.iter().zip(&self.theta).map(|(a, b)| a * b).sum::<f64>()
        }
    }

    pub fn observe(&mut self, rng: &mut Stream) -> Round {
        let spec = &self.spec;
        let mut features = Vec::with_capacity(spec.arms);
        for a in 0..spec.arms {
            if spec.is_control(a) {
                features.push(vec![0.0; spec.feature_dim()]);
                continue;
            }
            let mut f: Vec<f64> = (0..spec.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            if let Some(h) = &spec.habituation {
                f.push(self.days[a].min(h.cap) as f64 / h.cap as f64);
            }
            features.push(f);
        }
        let mut available: Vec<bool> =
            (0..spec.arms).map(|a| spec.is_control(a) || spec.availability >= 1.0 || rng.random::<f64>() < spec.availability).collect();
        if !available.iter().any(|&v| v) {
            available[0] = true;
        }
        let b = &spec.baseline;
        let mut g = self.drift;
        if b.amplitude != 0.0 {
            g += b.amplitude * libm::sin(2.0 * PI * self.t as f64 / b.period);
        }
        if b.context_coef != 0.0 {
            g += b.context_coef * (0..spec.arms).filter(|&a| !spec.is_control(a)).map(|a| features[a][0]).sum::<f64>();
        }
        if self.last_sent {
            g += b.history_coef;
        }
        let means = (0..spec.arms).map(|a| self.mean_reward(&features[a], a, g)).collect();
        let context = (0..spec.arms).filter(|&a| !spec.is_control(a)).flat_map(|a| features[a][..spec.dim].iter().copied()).collect();
        Round { t: self.t, arms: ArmFeatures { context, features, available }, means, baseline: g }
    }

    /// Plays `arm` in `round` and advances time.
    pub fn respond(&mut self, round: &Round, arm: usize, rng: &mut Stream) -> Result<Feedback> {
        if arm >= self.spec.arms {
            return Err(Error::IndexOutOfRange { index: arm, bound: self.spec.arms });
        }
        if !round.arms.available[arm] {
            return Err(Error::NoAvailableArm);
        }
        let mean = round.means[arm];
        let e: f64 = rng.sample(StandardNormal);
        let missing = self.spec.missing_prob > 0.0 && rng.random::<f64>() < self.spec.missing_prob;
        let reward = (!missing).then_some(mean + self.spec.noise * e);
        let cap = self.spec.habituation.as_ref().map_or(0, |h| h.cap);
        for (a, d) in self.days.iter_mut().enumerate() {
            *d = if a == arm { 0 } else { (*d + 1).min(cap) };
        }
        let b = &self.spec.baseline;
        if b.drift_step > 0.0 {
            let step: f64 = rng.sample(StandardNormal);
            self.drift = (self.drift + b.drift_step * step).clamp(-b.drift_bound, b.drift_bound);
        }
        self.last_sent = !self.spec.is_control(arm);
        self.t += 1;
        Ok(Feedback { reward, mean, regret: round.best_mean() - mean })
    }
}

/// Bernoulli arms whose success probabilities switch once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingBernoulli {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub switch_at: usize,
}

impl Default for SwitchingBernoulli {
    fn default() -> Self {
        Self { before: vec![0.6, 0.4], after: vec![0.1, 0.9], switch_at: 5000 }
    }
}

impl SwitchingBernoulli {
    pub fn probs(&self, t: usize) -> &[f64] {
        if t < self.switch_at {
            &self.before
        } else {
            &self.after
        }
    }

    pub fn pull(&self, t: usize, arm: usize, rng: &mut Stream) -> f64 {
        if rng.random::<f64>() < self.probs(t)[arm] {
            1.0
        } else {
            0.0
        }
    }

    /// Context-free round for `K` arms.
    pub fn round(&self) -> ArmFeatures {
        let k = self.before.len();
        ArmFeatures {
            context: vec![],
            features: (0..k)
                .map(|a| {
                    let mut e = vec![0.0; k];
                    e[a] = 1.0;
                    e
                })
                .collect(),
            available: vec![true; k],
        }
    }
}
