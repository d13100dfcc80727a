//! Simulators with known ground truth.

pub mod bandit;
pub mod locf;
pub mod mdp;
pub mod observational;
pub mod separable;
pub mod smart;

pub use bandit::{BanditEnv, BanditEnvSpec, BaselineSpec, Feedback, HabituationSpec, Round, SwitchingBernoulli};
pub use locf::{locf, Imputation};
pub use mdp::{MdpPolicy, MdpSpec, DEFAULT_STEP_CAP};
pub use observational::{Misspecification, ObservationalSpec};
pub use separable::SeparableSpec;
pub use smart::{ResponseModel, SmartSpec};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI)
}

/// `E[max(0, m + s Z)]` for `Z ~ N(0, 1)` and `s >= 0`.
pub fn expected_positive_part(m: f64, s: f64) -> f64 {
    if s == 0.0 {
        return m.max(0.0);
    }
    m * normal_cdf(m / s) + s * normal_pdf(m / s)
}
