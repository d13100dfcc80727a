//! Experiment configuration: a TOML document with `env`, `method`, `eval`,
//! `data` and `output` sections. Unknown keys are rejected everywhere.

use std::ops::Range;
use std::path::{Path, PathBuf};

use adaptint_core::bandits::AgentSpec;
use adaptint_core::envs::{BanditEnvSpec, MdpSpec, Misspecification, ObservationalSpec, SeparableSpec, SmartSpec, DEFAULT_STEP_CAP};
use adaptint_core::features::{FeatureKind, FeatureMap};
use adaptint_core::offline::{AdjunctModel, PropensityModel, QLoss, MIN_BOOTSTRAP};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Smart(SmartSpec),
    Observational(ObservationalSpec),
    Separable(SeparableSpec),
    Mdp(MdpEnv),
    Bandit(BanditEnvSpec),
}

impl EnvConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            EnvConfig::Smart(_) => "smart",
            EnvConfig::Observational(_) => "observational",
            EnvConfig::Separable(_) => "separable",
            EnvConfig::Mdp(_) => "mdp",
            EnvConfig::Bandit(_) => "bandit",
        }
    }
}

/// Indefinite-horizon chain; omit `spec` for the three-state example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpEnv {
    #[serde(default = "MdpSpec::three_state_example")]
    pub spec: MdpSpec,
    #[serde(default = "default_step_cap")]
    pub step_cap: usize,
}

fn default_step_cap() -> usize {
    DEFAULT_STEP_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    QLearning {
        /// Per-stage maps; the environment's standard maps when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        maps: Option<Vec<FeatureMap>>,
        #[serde(default = "ols")]
        loss: QLoss,
        /// Soft-threshold applied to the fitted contrasts.
        #[serde(default)]
        threshold: f64,
    },
    GEstimation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        maps: Option<Vec<FeatureMap>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        propensity: Option<Vec<PropensityModel>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        adjunct: Option<Vec<AdjunctModel>>,
    },
    Bowl {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        maps: Option<Vec<FeatureMap>>,
        #[serde(default = "owl_lambda")]
        lambda: f64,
        #[serde(default = "owl_iters")]
        max_iters: usize,
        #[serde(default = "one")]
        step_scale: f64,
    },
    TabularQ {
        #[serde(default = "half")]
        alpha: f64,
        #[serde(default = "sweeps")]
        sweeps: usize,
    },
    Ggq {
        #[serde(default = "ggq_starts")]
        starts: usize,
        #[serde(default = "one")]
        start_scale: f64,
    },
    VLearning {
        #[serde(default = "vl_lambda")]
        lambda: f64,
        #[serde(default = "vl_grid")]
        grid: Vec<f64>,
        #[serde(default)]
        refine: bool,
    },
    /// Online agents compared by `regret`; the first one also drives `simulate`.
    Bandit { agents: Vec<AgentSpec> },
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::QLearning { .. } => "q_learning",
            MethodConfig::GEstimation { .. } => "g_estimation",
            MethodConfig::Bowl { .. } => "bowl",
            MethodConfig::TabularQ { .. } => "tabular_q",
            MethodConfig::Ggq { .. } => "ggq",
            MethodConfig::VLearning { .. } => "v_learning",
            MethodConfig::Bandit { .. } => "bandit",
        }
    }
}

fn ols() -> QLoss {
    QLoss::Ols
}
fn owl_lambda() -> f64 {
    1e-3
}
fn owl_iters() -> usize {
    2000
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn sweeps() -> usize {
    2000
}
fn ggq_starts() -> usize {
    10
}
fn vl_lambda() -> f64 {
    0.01
}
fn vl_grid() -> Vec<f64> {
    vec![-10.0, 0.0, 10.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Sample size: trajectories, paths or units per replication.
    pub n: usize,
    /// Bandit rounds per seed.
    pub horizon: usize,
    /// Seeds for bandit runs.
    pub seeds: usize,
    /// Write every `record_every`-th round of the regret curves.
    pub record_every: usize,
    pub replications: usize,
    /// Monte-Carlo rollouts for regime values.
    pub rollouts: usize,
    pub bootstrap: usize,
    /// Discount; the environment's own when omitted (1 for finite designs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub cells: Vec<Misspecification>,
    /// Agreement with the oracle regime a fit must reach to be flagged as recovered.
    pub agreement_min: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            horizon: 1000,
            seeds: 20,
            record_every: 1,
            replications: 200,
            rollouts: 100_000,
            bootstrap: MIN_BOOTSTRAP,
            gamma: None,
            cells: vec![Misspecification::None, Misspecification::Outcome, Misspecification::Propensity, Misspecification::Both],
            agreement_min: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset CSV read by `fit` and `evaluate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Regime JSON scored by `evaluate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// A parsed config together with its source text, for line-anchored errors.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: String,
    source: String,
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Tagged tables report their whole span; for an unknown field, narrow it
/// to the line that sets the field.
fn error_line(source: &str, span: Range<usize>, message: &str) -> usize {
    let start = line_of(source, span.start);
    let field = message.strip_prefix("unknown field `").and_then(|m| m.split('`').next());
    let Some(field) = field else { return start };
    let end = source.len().min(span.end);
    source[span.start..end].lines().position(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == field)).map_or(start, |k| start + k)
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&source, &path.display().to_string())
    }

    pub fn parse(source: &str, path: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(source).map_err(|e| CliError::ConfigInvalid {
            path: path.to_owned(),
            line: e.span().map_or(1, |s| error_line(source, s, e.message())),
            message: e.message().trim().to_owned(),
        })?;
        Ok(Self { config, path: path.to_owned(), source: source.to_owned() })
    }

    /// Line of `key` inside `[section]`, else the section header, else 1.
    pub fn line(&self, section: &str, key: &str) -> usize {
        let mut current = String::new();
        let mut header = None;
        for (i, raw) in self.source.lines().enumerate() {
            let line = raw.trim();
            if line.starts_with('[') {
                current = line.trim_matches(|c| c == '[' || c == ']').trim().to_owned();
                if current == section && header.is_none() {
                    header = Some(i + 1);
                }
                continue;
            }
            if current == section {
                if let Some((k, _)) = line.split_once('=') {
                    if k.trim() == key {
                        return i + 1;
                    }
                }
            }
        }
        header.unwrap_or(1)
    }

    pub fn invalid(&self, section: &str, key: &str, message: impl Into<String>) -> CliError {
        CliError::ConfigInvalid { path: self.path.clone(), line: self.line(section, key), message: message.into() }
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let e = &self.config.eval;
        if e.bootstrap < MIN_BOOTSTRAP {
            return Err(self.invalid("eval", "bootstrap", format!("bootstrap must be at least {MIN_BOOTSTRAP}")));
        }
        if e.record_every == 0 {
            return Err(self.invalid("eval", "record_every", "record_every must be positive"));
        }
        if !(0.0..=1.0).contains(&e.agreement_min) {
            return Err(self.invalid("eval", "agreement_min", "agreement_min must lie in [0, 1]"));
        }
        if let Some(g) = e.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(self.invalid("eval", "gamma", "gamma must lie in [0, 1]"));
            }
        }
        if let EnvConfig::Mdp(m) = &self.config.env {
            if m.step_cap == 0 {
                return Err(self.invalid("env", "step_cap", "step_cap must be positive"));
            }
            m.spec.validate().map_err(|err| self.invalid("env.spec", "", err.to_string()))?;
        }
        if let EnvConfig::Bandit(b) = &self.config.env {
            b.validate().map_err(|err| self.invalid("env", "", err.to_string()))?;
        }
        if let Some(MethodConfig::Bandit { agents }) = &self.config.method {
            if agents.is_empty() {
                return Err(self.invalid("method", "agents", "at least one agent required"));
            }
        }
        Ok(())
    }

    /// The config with every default filled in, as TOML.
    pub fn resolved(&self) -> String {
        toml::to_string(&self.config).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the resolved config and seed.
    pub fn hash(&self, seed: u64) -> String {
        let mut h = Sha256::new();
        h.update(self.resolved().as_bytes());
        h.update(format!("seed = {seed}\n").as_bytes());
        hex::encode(h.finalize())[..16].to_owned()
    }

    pub fn require_positive(&self, section: &str, key: &str, value: usize) -> Result<()> {
        if value == 0 {
            return Err(self.invalid(section, key, format!("{key} must be positive")));
        }
        Ok(())
    }
}

/// Tabular map for an `n_states`-state chain: one block per action over the
/// one-hot state.
pub fn saturated_map(n_states: usize, n_actions: usize) -> FeatureMap {
    FeatureMap::new(FeatureKind::OneHotActionCross, vec![], (0..n_states).collect(), false, n_actions)
}
