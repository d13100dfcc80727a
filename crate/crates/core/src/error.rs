use alloc::string::String;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by estimators, agents and simulators.
///
/// Variant names are stable: the CLI surfaces them verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    #[error("gamma = 1 requested on an indefinite stream")]
    DivergentReturn,

    #[error("stage {stage} out of range for trajectory of length {len}")]
    StageOutOfRange { stage: usize, len: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("singular design matrix")]
    SingularDesign,

    #[error("weights must be strictly positive, got {0}")]
    NonPositiveWeight(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("missing reward at trajectory {traj}, stage {stage}")]
    MissingReward { traj: usize, stage: usize },

    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("singular estimating-equation system")]
    SingularSystem,

    #[error("propensity {0} outside (0, 1)")]
    PropensityOutOfRange(f64),

    #[error("no trajectory is concordant with the regime")]
    NoMatchedTrajectories,

    #[error("positivity violated at trajectory {traj}, stage {stage}")]
    PositivityViolation { traj: usize, stage: usize },

    #[error("outcome weighted learning requires non-negative rewards, got {0}")]
    NegativeReward(f64),

    #[error("binary action set required, got action index {0}")]
    NotBinaryAction(usize),

    #[error("stage {0} has no concordant trajectory with positive weight")]
    EmptyStageSample(usize),

    #[error("weighting matrix W is singular")]
    SingularW,

    #[error("no available arm")]
    NoAvailableArm,

    #[error("clip bounds must satisfy 0 < pi_min <= pi_max < 1, got ({0}, {1})")]
    ClipBoundsInvalid(f64, f64),

    #[error("selection distribution missing from log entry {0}")]
    MissingSelectionDistribution(usize),

    #[error("actor-critic agent supports actions {{0, 1}} only, got {0}")]
    NonBinaryAction(usize),

    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("behavior probability not recorded at trajectory {traj}, stage {stage}")]
    MissingBehaviorProb { traj: usize, stage: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Stable variant name, used by the CLI when reporting failures.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonFiniteInput(_) => "NonFiniteInput",
            Error::DivergentReturn => "DivergentReturn",
            Error::StageOutOfRange { .. } => "StageOutOfRange",
            Error::EmptyInput => "EmptyInput",
            Error::SingularDesign => "SingularDesign",
            Error::NonPositiveWeight(_) => "NonPositiveWeight",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::MissingReward { .. } => "MissingReward",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::SingularSystem => "SingularSystem",
            Error::PropensityOutOfRange(_) => "PropensityOutOfRange",
            Error::NoMatchedTrajectories => "NoMatchedTrajectories",
            Error::PositivityViolation { .. } => "PositivityViolation",
            Error::NegativeReward(_) => "NegativeReward",
            Error::NotBinaryAction(_) => "NotBinaryAction",
            Error::EmptyStageSample(_) => "EmptyStageSample",
            Error::SingularW => "SingularW",
            Error::NoAvailableArm => "NoAvailableArm",
            Error::ClipBoundsInvalid(..) => "ClipBoundsInvalid",
            Error::MissingSelectionDistribution(_) => "MissingSelectionDistribution",
            Error::NonBinaryAction(_) => "NonBinaryAction",
            Error::RewardOutOfRange(_) => "RewardOutOfRange",
            Error::MissingBehaviorProb { .. } => "MissingBehaviorProb",
            Error::InvalidParameter(_) => "InvalidParameter",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
