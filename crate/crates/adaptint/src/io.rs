//! File formats: dataset CSV, interaction-log CSV, regime JSON.
//!
//! Every CSV starts with `# key: value` comment lines; the first is always
//! `# config_hash: ...`. A dataset row with an empty `action` is a terminal
//! row: the censored path's last state, or an all-empty state for absorption.

use std::fs;
use std::path::Path;

use adaptint_core::bandits::{ArmFeatures, LogEntry};
use adaptint_core::domain::{ActionId, Dataset, Horizon, StageRecord, StateVector, Terminal, Trajectory};
use adaptint_core::{Regime, StageRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// `# key: value` lines followed by the CSV body.
fn with_meta(meta: &[(&str, String)], body: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::new();
    for (k, v) in meta {
        out.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
    }
    out.extend(body);
    out
}

fn split_meta(text: &str) -> (Vec<(String, String)>, &str) {
    let mut meta = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let (head, tail) = line.split_once('\n').unwrap_or((line, ""));
        if let Some((k, v)) = head.split_once(':') {
            meta.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        rest = tail;
    }
    (meta, rest)
}

fn meta_value<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn horizon_text(h: Horizon) -> String {
    match h {
        Horizon::Finite(t) => format!("finite {t}"),
        Horizon::Indefinite => "indefinite".to_owned(),
    }
}

/// Serializes a dataset; `config_hash` goes in the first comment line.
pub fn dataset_csv(data: &Dataset, config_hash: &str) -> Vec<u8> {
    let width = data
        .trajectories
        .iter()
        .flat_map(|t| {
            t.stages.iter().map(|s| s.state.0.len()).chain(match &t.terminal {
                Terminal::State(s) => Some(s.0.len()),
                _ => None,
            })
        })
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["traj_id".to_owned(), "t".to_owned()];
    header.extend((0..width).map(|j| format!("state_{j}")));
    header.extend(["action", "reward", "behavior_prob", "available"].map(String::from));
    w.write_record(&header).expect("in-memory write");
    let state_cells =
        |s: &StateVector| -> Vec<String> { (0..width).map(|j| s.0.get(j).map(|v| v.to_string()).unwrap_or_default()).collect() };
    for (i, tr) in data.trajectories.iter().enumerate() {
        for (t, s) in tr.stages.iter().enumerate() {
            let mut row = vec![i.to_string(), t.to_string()];
            row.extend(state_cells(&s.state));
            row.extend([s.action.0.to_string(), opt(s.reward), opt(s.behavior_prob), u8::from(s.available).to_string()]);
            w.write_record(&row).expect("in-memory write");
        }
        let terminal = match &tr.terminal {
            Terminal::Unobserved => None,
            Terminal::Absorbing => Some(StateVector(vec![])),
            Terminal::State(s) => Some(s.clone()),
        };
        if let Some(s) = terminal {
            let mut row = vec![i.to_string(), tr.len().to_string()];
            row.extend(state_cells(&s));
            row.extend([String::new(), String::new(), String::new(), String::new()]);
            w.write_record(&row).expect("in-memory write");
        }
    }
    let counts = data.action_counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
    with_meta(
        &[("config_hash", config_hash.to_owned()), ("horizon", horizon_text(data.horizon)), ("action_counts", counts)],
        w.into_inner().expect("in-memory write"),
    )
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = read_text(path)?;
    parse_dataset(&text).map_err(|m| CliError::format("dataset", path, m))
}

fn parse_num<T: std::str::FromStr>(cell: &str, what: &str, row: usize) -> std::result::Result<T, String> {
    cell.trim().parse().map_err(|_| format!("row {row}: cannot parse {what} {cell:?}"))
}

fn parse_opt(cell: &str, what: &str, row: usize) -> std::result::Result<Option<f64>, String> {
    if cell.trim().is_empty() {
        Ok(None)
    } else {
        parse_num(cell, what, row).map(Some)
    }
}

struct Columns {
    traj: usize,
    t: usize,
    state: Vec<usize>,
    action: usize,
    reward: usize,
    prob: usize,
    available: usize,
}

impl Columns {
    fn new(header: &csv::StringRecord) -> std::result::Result<Self, String> {
        let find = |name: &str| header.iter().position(|h| h == name).ok_or(format!("missing column {name}"));
        let mut state = Vec::new();
        while let Some(p) = header.iter().position(|h| h == format!("state_{}", state.len())) {
            state.push(p);
        }
        Ok(Self {
            traj: find("traj_id")?,
            t: find("t")?,
            state,
            action: find("action")?,
            reward: find("reward")?,
            prob: find("behavior_prob")?,
            available: find("available")?,
        })
    }
}

pub fn parse_dataset(text: &str) -> std::result::Result<Dataset, String> {
    let (meta, body) = split_meta(text);
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let cols = Columns::new(&reader.headers().map_err(|e| e.to_string())?.clone())?;
    let mut trajs: Vec<Trajectory> = Vec::new();
    let mut current: Vec<StageRecord> = Vec::new();
    let mut terminal: Option<Terminal> = None;
    let mut current_id: Option<usize> = None;
    let mut saw_terminal = false;
    let finish = |stages: &mut Vec<StageRecord>, term: Option<Terminal>, out: &mut Vec<Trajectory>| {
        Trajectory::new(std::mem::take(stages), term.unwrap_or_default()).map(|t| out.push(t)).map_err(|e| e.to_string())
    };
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| e.to_string())?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let id: usize = parse_num(cell(cols.traj), "traj_id", row)?;
        let t: usize = parse_num(cell(cols.t), "t", row)?;
        if current_id != Some(id) {
            if let Some(prev) = current_id {
                if id != prev + 1 {
                    return Err(format!("row {row}: traj_id {id} follows {prev}"));
                }
                finish(&mut current, terminal.take(), &mut trajs)?;
            } else if id != 0 {
                return Err(format!("row {row}: first traj_id must be 0"));
            }
            current_id = Some(id);
        }
        if terminal.is_some() || t != current.len() {
            return Err(format!("row {row}: stage {t} out of order in trajectory {id}"));
        }
        let mut state = Vec::new();
        let mut ended = false;
        for &c in &cols.state {
            match parse_opt(cell(c), "state", row)? {
                Some(v) if ended => return Err(format!("row {row}: gap in state columns ({v})")),
                Some(v) => state.push(v),
                None => ended = true,
            }
        }
        if cell(cols.action).trim().is_empty() {
            saw_terminal = true;
            terminal = Some(if state.is_empty() { Terminal::Absorbing } else { Terminal::State(StateVector(state)) });
            continue;
        }
        let action: usize = parse_num(cell(cols.action), "action", row)?;
        let available = match cell(cols.available).trim() {
            "" | "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(format!("row {row}: cannot parse available {other:?}")),
        };
        let mut s = StageRecord::new(
            StateVector(state),
            ActionId(action),
            parse_opt(cell(cols.reward), "reward", row)?,
            parse_opt(cell(cols.prob), "behavior_prob", row)?,
        );
        s.available = available;
        current.push(s);
    }
    if current_id.is_some() {
        finish(&mut current, terminal.take(), &mut trajs)?;
    }
    let horizon = match meta_value(&meta, "horizon") {
        Some("indefinite") => Horizon::Indefinite,
        Some(h) => Horizon::Finite(h.strip_prefix("finite").and_then(|v| v.trim().parse().ok()).ok_or(format!("bad horizon {h:?}"))?),
        None if saw_terminal => Horizon::Indefinite,
        None => Horizon::Finite(trajs.iter().map(|t| t.len()).max().unwrap_or(1).saturating_sub(1)),
    };
    let counts = match meta_value(&meta, "action_counts") {
        Some(v) => v
            .split_whitespace()
            .map(|c| c.parse().map_err(|_| format!("bad action count {c:?}")))
            .collect::<std::result::Result<Vec<usize>, _>>()?,
        None => {
            let stages = if horizon == Horizon::Indefinite { 1 } else { trajs.iter().map(|t| t.len()).max().unwrap_or(0) };
            (0..stages)
                .map(|t| {
                    trajs
                        .iter()
                        .flat_map(|tr| tr.stages.iter().enumerate())
                        .filter(|(s, _)| horizon == Horizon::Indefinite || *s == t)
                        .map(|(_, r)| r.action.0 + 1)
                        .max()
                        .unwrap_or(2)
                        .max(2)
                })
                .collect()
        }
    };
    Dataset::new(trajs, horizon, counts).map_err(|e| e.to_string())
}

/// One row per round: shared context, per-arm features, availability, the
/// chosen arm, its selection probability, the full distribution and reward.
pub fn log_csv(log: &[LogEntry], config_hash: &str, extra_meta: &[(&str, String)]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "context", "features", "available", "arm", "selection_prob", "probs", "reward"]).expect("in-memory write");
    for (t, e) in log.iter().enumerate() {
        w.write_record([
            t.to_string(),
            json(&e.arms.context),
            json(&e.arms.features),
            json(&e.arms.available),
            e.arm.to_string(),
            e.probs.as_ref().and_then(|p| p.get(e.arm)).map(|p| p.to_string()).unwrap_or_default(),
            e.probs.as_ref().map(json).unwrap_or_default(),
            opt(e.reward),
        ])
        .expect("in-memory write");
    }
    let mut meta = vec![("config_hash", config_hash.to_owned())];
    meta.extend(extra_meta.iter().cloned());
    with_meta(&meta, w.into_inner().expect("in-memory write"))
}

fn json<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("log cell serializes")
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>> {
    let text = read_text(path)?;
    parse_log(&text).map_err(|m| CliError::format("interaction log", path, m))
}

pub fn parse_log(text: &str) -> std::result::Result<Vec<LogEntry>, String> {
    let (_, body) = split_meta(text);
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| e.to_string())?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let json = |i: usize, what: &str| -> std::result::Result<serde_json::Value, String> {
            serde_json::from_str(cell(i)).map_err(|e| format!("row {row}: {what}: {e}"))
        };
        let arms = ArmFeatures {
            context: serde_json::from_value(json(1, "context")?).map_err(|e| e.to_string())?,
            features: serde_json::from_value(json(2, "features")?).map_err(|e| e.to_string())?,
            available: serde_json::from_value(json(3, "available")?).map_err(|e| e.to_string())?,
        };
        let probs = if cell(6).is_empty() { None } else { Some(serde_json::from_value(json(6, "probs")?).map_err(|e| e.to_string())?) };
        out.push(LogEntry { arms, arm: parse_num(cell(4), "arm", row)?, probs, reward: parse_opt(cell(7), "reward", row)? });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub method: String,
    pub hyperparams: serde_json::Value,
    pub config_hash: String,
}

/// Regime JSON: `{stages: [...], provenance: {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeFile {
    pub stages: Vec<StageRule>,
    pub provenance: Provenance,
}

impl RegimeFile {
    pub fn regime(&self) -> Regime {
        Regime::new(self.stages.clone())
    }
}

pub fn read_regime(path: &Path) -> Result<RegimeFile> {
    let text = read_text(path)?;
    let file: RegimeFile = serde_json::from_str(&text).map_err(|e| CliError::format("regime", path, e))?;
    if file.stages.is_empty() {
        return Err(CliError::format("regime", path, "no stages"));
    }
    Ok(file)
}
