//! Subcommand implementations. Each writes its artifacts plus the resolved
//! config into the output directory and returns the written paths.

use std::path::PathBuf;

use adaptint_core::bandits::AgentSpec;
use adaptint_core::domain::{Dataset, Horizon};
use adaptint_core::envs::{smart, MdpSpec, Misspecification, SeparableSpec};
use adaptint_core::eval::{
    dr_replicate, regime_agreement, run_bandit, smart_regime_value, DrReplicate, DrSummary, Player, RegretSummary, RunOptions,
};
use adaptint_core::features::FeatureMap;
use adaptint_core::indefinite::{ggq_fit, markov_steps, vlearning_fit, GgqOptions, VLearningSpec};
use adaptint_core::offline::{
    bowl_fit, g_estimation_fit, q_learning_fit, soft_threshold_regime, tabular_q_update, value_aiptw, value_iptw, AdjunctModel,
    BehaviorProbs, Bootstrap, GEstimationSpec, OutcomeFit, OwlOptions, PropensityModel, TabularQ, ValueEstimate,
};
use adaptint_core::{Regime, RngSpec, StageRule};
use serde::Serialize;

use crate::config::{saturated_map, EnvConfig, LoadedConfig, MethodConfig};
use crate::error::{CliError, Result};
use crate::harness::fan_out;
use crate::io::{dataset_csv, json_bytes, log_csv, read_dataset, read_regime, write_file, Provenance, RegimeFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Fit,
    Evaluate,
    Regret,
    Dr,
}

/// RNG streams under the run seed, one per purpose.
const SIMULATE: u64 = 0;
const FIT: u64 = 1;
const EVALUATE: u64 = 2;
const REGRET: u64 = 3;
const DR: u64 = 4;

pub struct Run {
    pub config: LoadedConfig,
    pub seed: u64,
    pub out: PathBuf,
    hash: String,
}

impl Run {
    /// Folds `--data` / `--regime` overrides into the config, validates it
    /// and fixes the config hash.
    pub fn new(mut config: LoadedConfig, seed: u64, out: Option<PathBuf>, data: Option<PathBuf>, regime: Option<PathBuf>) -> Result<Self> {
        if data.is_some() {
            config.config.data.path = data;
        }
        if regime.is_some() {
            config.config.data.regime = regime;
        }
        config.validate()?;
        let out = out
            .or_else(|| config.config.output.dir.clone())
            .ok_or_else(|| config.invalid("output", "dir", "no output directory: set [output] dir or pass --out"))?;
        let hash = config.hash(seed);
        Ok(Self { config, seed, out, hash })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn file(&self, stem: &str, ext: &str) -> PathBuf {
        self.out.join(format!("{stem}-{}.{ext}", self.hash))
    }

    fn write(&self, written: &mut Vec<PathBuf>, stem: &str, ext: &str, bytes: &[u8]) -> Result<()> {
        let path = self.file(stem, ext);
        write_file(&path, bytes)?;
        written.push(path);
        Ok(())
    }

    fn root(&self, stream: u64) -> RngSpec {
        RngSpec::new(self.seed, stream)
    }

    fn gamma(&self) -> f64 {
        self.config.config.eval.gamma.unwrap_or(match &self.config.config.env {
            EnvConfig::Mdp(m) => m.spec.gamma,
            _ => 1.0,
        })
    }

    pub fn execute(&self, sub: Subcommand) -> Result<Vec<PathBuf>> {
        self.check(sub)?;
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        let mut written = Vec::new();
        let resolved = format!(
            "# config_hash: {}\n# seed: {}\n# adaptint: {}\n{}",
            self.hash,
            self.seed,
            env!("CARGO_PKG_VERSION"),
            self.config.resolved()
        );
        self.write(&mut written, "config", "toml", resolved.as_bytes())?;
        match sub {
            Subcommand::Simulate => self.simulate(&mut written)?,
            Subcommand::Fit => self.fit(&mut written)?,
            Subcommand::Evaluate => self.evaluate(&mut written)?,
            Subcommand::Regret => self.regret(&mut written)?,
            Subcommand::Dr => self.dr(&mut written)?,
        }
        Ok(written)
    }

    /// Subcommand-specific validation, reported against config lines.
    fn check(&self, sub: Subcommand) -> Result<()> {
        let c = &self.config;
        let cfg = &c.config;
        let is_bandit = matches!(cfg.env, EnvConfig::Bandit(_));
        let needs_sample = match sub {
            Subcommand::Simulate => !is_bandit,
            Subcommand::Fit | Subcommand::Evaluate => cfg.data.path.is_none(),
            Subcommand::Dr => true,
            Subcommand::Regret => false,
        };
        if needs_sample {
            c.require_positive("eval", "n", cfg.eval.n)?;
        }
        match sub {
            Subcommand::Simulate if is_bandit => c.require_positive("eval", "horizon", cfg.eval.horizon)?,
            Subcommand::Fit => {
                if is_bandit {
                    return Err(c.invalid("env", "kind", "fit needs an offline environment"));
                }
                match &cfg.method {
                    None => return Err(c.invalid("method", "name", "fit needs a [method] section")),
                    Some(MethodConfig::Bandit { .. }) => return Err(c.invalid("method", "name", "bandit agents are run by `regret`")),
                    Some(m) => self.check_method(m)?,
                }
            }
            Subcommand::Evaluate => {
                if is_bandit {
                    return Err(c.invalid("env", "kind", "evaluate needs an offline environment"));
                }
                if let Some(m) = &cfg.method {
                    if cfg.data.regime.is_none() {
                        if matches!(m, MethodConfig::Bandit { .. }) {
                            return Err(c.invalid("method", "name", "bandit agents are run by `regret`"));
                        }
                        self.check_method(m)?;
                    }
                }
            }
            Subcommand::Regret => {
                if !is_bandit {
                    return Err(c.invalid("env", "kind", "regret needs a bandit environment"));
                }
                if !matches!(cfg.method, Some(MethodConfig::Bandit { .. })) {
                    return Err(c.invalid("method", "name", "regret needs `name = \"bandit\"` with [[method.agents]]"));
                }
                c.require_positive("eval", "horizon", cfg.eval.horizon)?;
                c.require_positive("eval", "seeds", cfg.eval.seeds)?;
            }
            Subcommand::Dr => {
                if !matches!(cfg.env, EnvConfig::Observational(_)) {
                    return Err(c.invalid("env", "kind", "dr needs the observational environment"));
                }
                c.require_positive("eval", "replications", cfg.eval.replications)?;
                if cfg.eval.cells.is_empty() {
                    return Err(c.invalid("eval", "cells", "at least one misspecification cell required"));
                }
            }
            Subcommand::Simulate => {}
        }
        Ok(())
    }

    fn check_method(&self, m: &MethodConfig) -> Result<()> {
        let env = &self.config.config.env;
        let indefinite = matches!(m, MethodConfig::TabularQ { .. } | MethodConfig::Ggq { .. } | MethodConfig::VLearning { .. });
        if indefinite != matches!(env, EnvConfig::Mdp(_)) {
            return Err(self.config.invalid(
                "method",
                "name",
                format!("method {} does not apply to the {} environment", m.name(), env.kind()),
            ));
        }
        Ok(())
    }

    fn load_or_simulate(&self) -> Result<Dataset> {
        match &self.config.config.data.path {
            Some(p) => read_dataset(p),
            None => self.simulate_dataset(),
        }
    }

    fn simulate_dataset(&self) -> Result<Dataset> {
        let n = self.config.config.eval.n;
        let mut rng = self.root(SIMULATE).stream();
        Ok(match &self.config.config.env {
            EnvConfig::Smart(s) => s.simulate(n, &mut rng)?,
            EnvConfig::Observational(s) => s.simulate(n, &mut rng)?,
            EnvConfig::Separable(s) => s.simulate(n, &mut rng)?,
            EnvConfig::Mdp(m) => m.spec.rollout(&m.spec.uniform_policy(), n, m.step_cap, &mut rng)?,
            EnvConfig::Bandit(_) => unreachable!("bandit datasets are interaction logs"),
        })
    }

    fn simulate(&self, written: &mut Vec<PathBuf>) -> Result<()> {
        if let EnvConfig::Bandit(env) = &self.config.config.env {
            let agent = match &self.config.config.method {
                Some(MethodConfig::Bandit { agents }) => agents[0].clone(),
                _ => AgentSpec::Uniform,
            };
            let run = run_bandit(
                &Player::Agent(agent.clone()),
                env,
                self.config.config.eval.horizon,
                self.root(SIMULATE),
                RunOptions { keep_log: true },
            )?;
            let bytes = log_csv(&run.log, &self.hash, &[("agent", agent_label(&agent))]);
            return self.write(written, "log", "csv", &bytes);
        }
        let data = self.simulate_dataset()?;
        self.write(written, "dataset", "csv", &dataset_csv(&data, &self.hash))
    }

    fn oracle(&self) -> Option<Regime> {
        let gamma = self.gamma();
        match &self.config.config.env {
            EnvConfig::Smart(s) => Some(s.oracle_regime(gamma)),
            EnvConfig::Observational(s) => Some(s.oracle_regime()),
            EnvConfig::Separable(s) => Some(s.oracle_regime()),
            EnvConfig::Mdp(m) => Some(mdp_regime(&m.spec, &m.spec.optimal_q(1e-12))),
            EnvConfig::Bandit(_) => None,
        }
    }

    /// Per-stage agreement with the oracle on the data's histories. For the
    /// MDP it is one number: the share of states where the actions match.
    fn agreement(&self, regime: &Regime, data: &Dataset) -> Result<Option<Vec<f64>>> {
        if let EnvConfig::Mdp(m) = &self.config.config.env {
            let optimal = m.spec.optimal_policy();
            let hits = mdp_actions(&m.spec, regime)?.iter().zip(&optimal).filter(|(a, b)| a == b).count();
            return Ok(Some(vec![hits as f64 / m.spec.n_states as f64]));
        }
        Ok(match self.oracle() {
            Some(o) => Some(regime_agreement(regime, &o, data)?),
            None => None,
        })
    }

    /// Fits the configured method; returns the regime and a JSON summary.
    fn fit_method(&self, data: &Dataset) -> Result<(Regime, serde_json::Value)> {
        let method = self.config.config.method.as_ref().expect("checked");
        let env = &self.config.config.env;
        let gamma = self.gamma();
        Ok(match method {
            MethodConfig::QLearning { maps, loss, threshold } => {
                let maps = maps.clone().unwrap_or_else(|| default_maps(env));
                let (model, regime) = q_learning_fit(data, &maps, gamma, loss)?;
                let regime = if *threshold > 0.0 { soft_threshold_regime(&model, *threshold)? } else { regime };
                (regime, to_json(&model))
            }
            MethodConfig::GEstimation { maps, propensity, adjunct } => {
                let (dm, dp, da) = default_gest(env);
                let spec = GEstimationSpec {
                    contrast_maps: maps.clone().unwrap_or(dm),
                    propensity: propensity.clone().unwrap_or(dp),
                    adjunct: adjunct.clone().unwrap_or(da),
                    gamma,
                };
                let (model, regime) = g_estimation_fit(data, &spec)?;
                (regime, to_json(&model))
            }
            MethodConfig::Bowl { maps, lambda, max_iters, step_scale } => {
                let maps = maps.clone().unwrap_or_else(|| default_maps(env));
                let opts = OwlOptions { lambda: *lambda, max_iters: *max_iters, step_scale: *step_scale };
                let (fit, regime) = bowl_fit(data, &maps, &[*lambda], &opts)?;
                (regime, to_json(&fit.stages))
            }
            MethodConfig::TabularQ { alpha, sweeps } => {
                let m = mdp_spec(env);
                let table = tabular_q(data, m, *alpha, *sweeps, gamma)?;
                let q: Vec<Vec<f64>> = table.values.chunks(m.n_actions).map(<[f64]>::to_vec).collect();
                (mdp_regime(m, &q), to_json(&table))
            }
            MethodConfig::Ggq { starts, start_scale } => {
                let m = mdp_spec(env);
                let opts = GgqOptions { starts: *starts, start_scale: *start_scale, ..GgqOptions::default() };
                let mut rng = self.root(FIT).stream();
                let (fit, regime) = ggq_fit(data, &saturated_map(m.n_states, m.n_actions), gamma, &opts, &mut rng)?;
                (regime, to_json(&fit))
            }
            MethodConfig::VLearning { lambda, grid, refine } => {
                let m = mdp_spec(env);
                let value_map = FeatureMap::new(adaptint_core::FeatureKind::Linear, (0..m.n_states).collect(), vec![], false, m.n_actions);
                let mut spec = VLearningSpec::new(value_map, saturated_map(m.n_states, m.n_actions), gamma);
                spec.lambda = *lambda;
                spec.grid = grid.clone();
                spec.refine = *refine;
                let (fit, regime) = vlearning_fit(data, &spec)?;
                let summary = serde_json::json!({
                    "policy": fit.policy,
                    "theta": fit.evaluation.theta,
                    "value": fit.evaluation.value,
                    "candidates": fit.candidates,
                });
                (regime, summary)
            }
            MethodConfig::Bandit { .. } => unreachable!("rejected by check"),
        })
    }

    fn provenance(&self) -> Provenance {
        let method = self.config.config.method.as_ref().expect("checked");
        Provenance {
            seed: self.seed,
            method: method.name().to_owned(),
            hyperparams: serde_json::to_value(method).expect("method serializes"),
            config_hash: self.hash.clone(),
        }
    }

    fn fit(&self, written: &mut Vec<PathBuf>) -> Result<()> {
        let data = self.load_or_simulate()?;
        let (regime, model) = self.fit_method(&data)?;
        let agreement = self.agreement(&regime, &data)?;
        let min_agreement = agreement.as_ref().map(|a| a.iter().copied().fold(f64::INFINITY, f64::min));
        let eval = &self.config.config.eval;
        let report = FitReport {
            config_hash: &self.hash,
            seed: self.seed,
            env: self.config.config.env.kind(),
            method: self.config.config.method.as_ref().map_or("", MethodConfig::name),
            trajectories: data.len(),
            stage_agreement: agreement.clone(),
            min_agreement,
            agreement_min: eval.agreement_min,
            recovered: min_agreement.map(|m| m >= eval.agreement_min),
            model,
        };
        let file = RegimeFile { stages: regime.stages, provenance: self.provenance() };
        self.write(written, "regime", "json", &json_bytes(&file))?;
        self.write(written, "fit", "json", &json_bytes(&report))
    }

    fn evaluate(&self, written: &mut Vec<PathBuf>) -> Result<()> {
        let cfg = &self.config.config;
        let data = self.load_or_simulate()?;
        let (regime, source) = match (&cfg.data.regime, &cfg.method) {
            (Some(p), _) => (read_regime(p)?.regime(), "file"),
            (None, Some(_)) => (self.fit_method(&data)?.0, "fit"),
            (None, None) => (self.oracle().expect("offline env"), "oracle"),
        };
        let gamma = self.gamma();
        let boot = |k: u64| Bootstrap::new(cfg.eval.bootstrap, self.root(EVALUATE).child(k));
        let mut report = ValueReport {
            config_hash: &self.hash,
            seed: self.seed,
            env: cfg.env.kind(),
            regime_source: source,
            trajectories: data.len(),
            gamma,
            iptw: None,
            aiptw: None,
            monte_carlo: None,
            exact: None,
            oracle_value: None,
            stage_agreement: self.agreement(&regime, &data)?,
        };
        if data.horizon != Horizon::Indefinite {
            report.iptw = Some(value_iptw(&data, &regime, &BehaviorProbs::Recorded, gamma, boot(0)?)?);
        }
        match &cfg.env {
            EnvConfig::Smart(s) => {
                let mut rng = self.root(EVALUATE).child(1000).stream();
                check_rollouts(&self.config, cfg.eval.rollouts)?;
                let (value, std_error) = smart_regime_value(s, &regime, gamma, cfg.eval.rollouts, &mut rng)?;
                report.monte_carlo = Some(McValue { value, std_error, rollouts: cfg.eval.rollouts });
                report.oracle_value = Some(s.optimal_value(gamma));
            }
            EnvConfig::Observational(s) => {
                let cell = Misspecification::None;
                let propensity = s.propensity_model(cell).fit(&data, 0)?;
                let outcome = OutcomeFit::fit(&data, &s.outcome_map(cell), 0.0)?;
                report.aiptw = Some(value_aiptw(&data, &regime, &propensity, &outcome, boot(1)?)?);
                report.oracle_value = Some(s.optimal_value());
            }
            EnvConfig::Mdp(m) => {
                let actions = mdp_actions(&m.spec, &regime)?;
                report.exact = Some(m.spec.policy_value(&m.spec.deterministic_policy(&actions))?);
                report.oracle_value = Some(m.spec.policy_value(&m.spec.deterministic_policy(&m.spec.optimal_policy()))?);
            }
            EnvConfig::Separable(_) | EnvConfig::Bandit(_) => {}
        }
        self.write(written, "value", "json", &json_bytes(&report))
    }

    fn regret(&self, written: &mut Vec<PathBuf>) -> Result<()> {
        let cfg = &self.config.config;
        let (EnvConfig::Bandit(env), Some(MethodConfig::Bandit { agents })) = (&cfg.env, &cfg.method) else { unreachable!("checked") };
        let (horizon, seeds, every) = (cfg.eval.horizon, cfg.eval.seeds, cfg.eval.record_every);
        let recorded: Vec<usize> = (1..=horizon).filter(|t| t % every == 0 || *t == horizon).collect();
        let root = self.root(REGRET);
        let jobs = agents.len() * seeds;
        let runs = fan_out(jobs, |k| {
            let (j, s) = (k / seeds, k % seeds);
            let run = run_bandit(&Player::Agent(agents[j].clone()), env, horizon, root.child(s as u64), RunOptions::default())?;
            let probs: Vec<f64> = run.send_probs.iter().filter_map(|p| *p).collect();
            Ok((run.cumulative_regret, probs))
        })?;

        let mut curve = csv::Writer::from_writer(Vec::new());
        let mut per_seed = csv::Writer::from_writer(Vec::new());
        curve.write_record(["agent", "t", "mean", "std_error"]).expect("in-memory write");
        per_seed.write_record(["agent", "seed", "t", "cumulative_regret"]).expect("in-memory write");
        let mut summaries = Vec::new();
        for (j, agent) in agents.iter().enumerate() {
            let label = agent_label_indexed(j, agent);
            let mine = &runs[j * seeds..(j + 1) * seeds];
            let thinned: Vec<Vec<f64>> = mine.iter().map(|(c, _)| recorded.iter().map(|&t| c[t - 1]).collect()).collect();
            for (s, c) in thinned.iter().enumerate() {
                for (&t, v) in recorded.iter().zip(c) {
                    per_seed.write_record([label.clone(), s.to_string(), t.to_string(), v.to_string()]).expect("in-memory write");
                }
            }
            let summary = RegretSummary::from_curves(thinned.iter().map(Vec::as_slice))?;
            for (i, &t) in recorded.iter().enumerate() {
                curve
                    .write_record([label.clone(), t.to_string(), summary.mean[i].to_string(), summary.std_error[i].to_string()])
                    .expect("in-memory write");
            }
            let full = RegretSummary::from_curves(mine.iter().map(|(c, _)| c.as_slice()))?;
            let probs: Vec<f64> = mine.iter().flat_map(|(_, p)| p.iter().copied()).collect();
            summaries.push(AgentSummary {
                label,
                agent: agent.clone(),
                final_mean: full.at(horizon),
                final_std_error: full.std_error[horizon - 1],
                growth_ratio: (horizon >= 2).then(|| full.at(horizon) / full.at(horizon / 2)),
                send_prob_range: (!probs.is_empty()).then(|| {
                    (probs.iter().copied().fold(f64::INFINITY, f64::min), probs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                }),
            });
        }
        let meta = |body: Vec<u8>| [format!("# config_hash: {}\n", self.hash).into_bytes(), body].concat();
        self.write(written, "regret", "csv", &meta(curve.into_inner().expect("in-memory write")))?;
        self.write(written, "regret-seeds", "csv", &meta(per_seed.into_inner().expect("in-memory write")))?;
        let report = RegretReport { config_hash: &self.hash, seed: self.seed, horizon, seeds, record_every: every, agents: summaries };
        self.write(written, "regret", "json", &json_bytes(&report))
    }

    fn dr(&self, written: &mut Vec<PathBuf>) -> Result<()> {
        let cfg = &self.config.config;
        let EnvConfig::Observational(spec) = &cfg.env else { unreachable!("checked") };
        let (reps, n, b) = (cfg.eval.replications, cfg.eval.n, cfg.eval.bootstrap);
        let cells = &cfg.eval.cells;
        let results = fan_out(cells.len() * reps, |k| {
            let (c, r) = (k / reps, k % reps);
            Ok(dr_replicate(spec, cells[c], n, self.root(DR).child(c as u64).child(r as u64), b)?)
        })?;
        let mut table = csv::Writer::from_writer(Vec::new());
        let mut raw = csv::Writer::from_writer(Vec::new());
        table.write_record(["cell", "estimator", "mean_estimate", "truth", "mean_bias"]).expect("in-memory write");
        raw.write_record(["cell", "replicate", "aiptw", "aiptw_se", "plug_in", "psi0", "psi1"]).expect("in-memory write");
        let mut summaries = Vec::new();
        for (c, cell) in cells.iter().enumerate() {
            let name = cell_name(*cell);
            let mine = &results[c * reps..(c + 1) * reps];
            for (r, x) in mine.iter().enumerate() {
                raw.write_record([
                    name.to_owned(),
                    r.to_string(),
                    x.aiptw.to_string(),
                    x.aiptw_se.to_string(),
                    x.plug_in.to_string(),
                    x.gest[0].to_string(),
                    x.gest[1].to_string(),
                ])
                .expect("in-memory write");
            }
            let k = reps as f64;
            let mean = |f: &dyn Fn(&DrReplicate) -> f64| mine.iter().map(f).sum::<f64>() / k;
            let truth = spec.optimal_value();
            for (est, m, t) in [
                ("aiptw", mean(&|x| x.aiptw), truth),
                ("plug_in", mean(&|x| x.plug_in), truth),
                ("g_estimation_psi0", mean(&|x| x.gest[0]), spec.psi[0]),
                ("g_estimation_psi1", mean(&|x| x.gest[1]), spec.psi[1]),
            ] {
                table
                    .write_record([name.to_owned(), est.to_owned(), m.to_string(), t.to_string(), (m - t).abs().to_string()])
                    .expect("in-memory write");
            }
            summaries.push(CellSummary { cell: *cell, summary: DrSummary::new(spec, mine)? });
        }
        let meta = |body: Vec<u8>| [format!("# config_hash: {}\n", self.hash).into_bytes(), body].concat();
        self.write(written, "dr", "csv", &meta(table.into_inner().expect("in-memory write")))?;
        self.write(written, "dr-replicates", "csv", &meta(raw.into_inner().expect("in-memory write")))?;
        let report = DrReport { config_hash: &self.hash, seed: self.seed, n, replications: reps, cells: summaries };
        self.write(written, "dr", "json", &json_bytes(&report))
    }
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("model serializes")
}

fn check_rollouts(config: &LoadedConfig, rollouts: usize) -> Result<()> {
    if rollouts < 2 {
        return Err(config.invalid("eval", "rollouts", "rollouts must be at least 2"));
    }
    Ok(())
}

fn cell_name(cell: Misspecification) -> &'static str {
    match cell {
        Misspecification::None => "none",
        Misspecification::Outcome => "outcome",
        Misspecification::Propensity => "propensity",
        Misspecification::Both => "both",
    }
}

fn agent_label(agent: &AgentSpec) -> String {
    serde_json::to_value(agent).ok().and_then(|v| v.get("agent").and_then(|a| a.as_str().map(str::to_owned))).unwrap_or_default()
}

fn agent_label_indexed(j: usize, agent: &AgentSpec) -> String {
    format!("{j}:{}", agent_label(agent))
}

fn mdp_spec(env: &EnvConfig) -> &MdpSpec {
    match env {
        EnvConfig::Mdp(m) => &m.spec,
        _ => unreachable!("checked"),
    }
}

fn mdp_actions(m: &MdpSpec, regime: &Regime) -> Result<Vec<usize>> {
    Ok((0..m.n_states).map(|x| regime.decide_state(0, &m.encode(x))).collect::<adaptint_core::Result<_>>()?)
}

/// Greedy regime over one-hot states from `q[x][a]`.
fn mdp_regime(m: &MdpSpec, q: &[Vec<f64>]) -> Regime {
    let theta = (0..m.n_actions).flat_map(|a| q.iter().map(move |row| row[a])).collect();
    Regime::new(vec![StageRule::Deterministic { theta, map: saturated_map(m.n_states, m.n_actions), threshold: 0.0 }])
}

/// Repeated sweeps of tabular Q-learning over the logged transitions until
/// no entry moves by more than 1e-12.
fn tabular_q(data: &Dataset, m: &MdpSpec, alpha: f64, sweeps: usize, gamma: f64) -> Result<TabularQ> {
    let steps = markov_steps(data)?
        .iter()
        .map(|s| Ok((m.decode(s.state)?, s.action, s.reward, s.next.map(|x| m.decode(x)).transpose()?)))
        .collect::<adaptint_core::Result<Vec<_>>>()?;
    let mut table = TabularQ::new(m.n_states, m.n_actions);
    for _ in 0..sweeps {
        let before = table.values.clone();
        for &(x, a, y, next) in &steps {
            tabular_q_update(&mut table, x, a, y, next, alpha, gamma)?;
        }
        if before.iter().zip(&table.values).all(|(a, b)| (a - b).abs() <= 1e-12) {
            break;
        }
    }
    Ok(table)
}

fn default_maps(env: &EnvConfig) -> Vec<FeatureMap> {
    match env {
        EnvConfig::Smart(_) => smart::standard_maps(),
        EnvConfig::Separable(_) => SeparableSpec::maps(),
        EnvConfig::Observational(s) => vec![s.outcome_map(Misspecification::None)],
        EnvConfig::Mdp(_) | EnvConfig::Bandit(_) => unreachable!("checked"),
    }
}

fn default_gest(env: &EnvConfig) -> (Vec<FeatureMap>, Vec<PropensityModel>, Vec<AdjunctModel>) {
    match env {
        EnvConfig::Smart(_) => {
            (smart::standard_maps(), vec![PropensityModel::Constant], vec![AdjunctModel::new(vec![0]), AdjunctModel::new(vec![0, 2, 5, 4])])
        }
        EnvConfig::Separable(_) => (SeparableSpec::maps(), vec![PropensityModel::Constant], vec![AdjunctModel::new(vec![0])]),
        EnvConfig::Observational(s) => {
            let cell = Misspecification::None;
            (vec![s.contrast_map()], vec![s.propensity_model(cell)], vec![s.adjunct(cell)])
        }
        EnvConfig::Mdp(_) | EnvConfig::Bandit(_) => unreachable!("checked"),
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    config_hash: &'a str,
    seed: u64,
    env: &'a str,
    method: &'a str,
    trajectories: usize,
    stage_agreement: Option<Vec<f64>>,
    min_agreement: Option<f64>,
    agreement_min: f64,
    recovered: Option<bool>,
    model: serde_json::Value,
}

#[derive(Serialize)]
struct McValue {
    value: f64,
    std_error: f64,
    rollouts: usize,
}

#[derive(Serialize)]
struct ValueReport<'a> {
    config_hash: &'a str,
    seed: u64,
    env: &'a str,
    regime_source: &'a str,
    trajectories: usize,
    gamma: f64,
    iptw: Option<ValueEstimate>,
    aiptw: Option<ValueEstimate>,
    monte_carlo: Option<McValue>,
    /// Exact value of the regime's policy, when the environment allows it.
    exact: Option<f64>,
    oracle_value: Option<f64>,
    stage_agreement: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct AgentSummary {
    label: String,
    agent: AgentSpec,
    final_mean: f64,
    final_std_error: f64,
    /// `Reg(T) / Reg(T / 2)`.
    growth_ratio: Option<f64>,
    send_prob_range: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct RegretReport<'a> {
    config_hash: &'a str,
    seed: u64,
    horizon: usize,
    seeds: usize,
    record_every: usize,
    agents: Vec<AgentSummary>,
}

#[derive(Serialize)]
struct CellSummary {
    cell: Misspecification,
    #[serde(flatten)]
    summary: DrSummary,
}

#[derive(Serialize)]
struct DrReport<'a> {
    config_hash: &'a str,
    seed: u64,
    n: usize,
    replications: usize,
    cells: Vec<CellSummary>,
}
