//! CSV and JSON output. Floats are written in Rust's shortest round-trip form,
//! so identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use polo_core::agent::{AgentKind, PoloConfig, RunLog};
use serde::Serialize;

use crate::error::CliError;

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    write_text(path, &text)
}

/// `t,coverage`, one row per step.
pub fn coverage_csv(log: &RunLog) -> String {
    let mut out = String::from("t,coverage\n");
    for (i, c) in log.coverage.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, c).unwrap();
    }
    out
}

/// `t,x0..,a0..,reward,value,best_return`; `best_return` is empty for agents
/// that do not plan.
pub fn steps_csv(log: &RunLog) -> String {
    let (sd, ad) = log
        .steps
        .first()
        .map_or((0, 0), |s| (s.state.len(), s.action.len()));
    let mut out = String::from("t");
    for i in 0..sd {
        write!(out, ",x{i}").unwrap();
    }
    for i in 0..ad {
        write!(out, ",a{i}").unwrap();
    }
    out.push_str(",reward,value,best_return\n");
    for s in &log.steps {
        write!(out, "{}", s.t).unwrap();
        for x in s.state.iter().chain(&s.action) {
            write!(out, ",{x}").unwrap();
        }
        write!(out, ",{},{},", s.reward, s.value).unwrap();
        if let Some(b) = s.best_return {
            write!(out, "{b}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// `t,k,loss,mean_target`, one row per member per update phase.
pub fn updates_csv(log: &RunLog) -> String {
    let mut out = String::from("t,k,loss,mean_target\n");
    for u in &log.updates {
        writeln!(out, "{},{},{},{}", u.t, u.member, u.loss, u.mean_target).unwrap();
    }
    out
}

#[derive(Debug, Serialize)]
pub struct RunSummary<'a> {
    pub agent: AgentKind,
    pub seed: u64,
    pub steps: usize,
    pub total_reward: f64,
    pub final_coverage: Option<f64>,
    pub update_rounds: usize,
    pub config: &'a PoloConfig,
}

/// Writes `steps.csv`, `updates.csv` and `summary.json` under `dir`.
pub fn write_run(dir: &Path, agent: AgentKind, cfg: &PoloConfig, log: &RunLog) -> Result<(), CliError> {
    write_text(&dir.join("steps.csv"), &steps_csv(log))?;
    write_text(&dir.join("updates.csv"), &updates_csv(log))?;
    write_json(
        &dir.join("summary.json"),
        &RunSummary {
            agent,
            seed: cfg.seed,
            steps: log.steps.len(),
            total_reward: log.total_reward(),
            final_coverage: log.final_coverage(),
            update_rounds: log.update_rounds,
            config: cfg,
        },
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonRow {
    pub horizon: usize,
    pub agent: AgentKind,
    pub seed: u64,
    pub mean_reward: f64,
}

pub fn horizon_csv(rows: &[HorizonRow]) -> String {
    let mut out = String::from("horizon,agent,seed,mean_reward\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.horizon, r.agent.name(), r.seed, r.mean_reward).unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct NStepRow {
    pub n: usize,
    pub seed: u64,
    pub value_rmse: f64,
    pub mean_reward: f64,
}

pub fn nstep_csv(rows: &[NStepRow]) -> String {
    let mut out = String::from("n,seed,value_rmse,mean_reward\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.n, r.seed, r.value_rmse, r.mean_reward).unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardRow {
    pub agent: AgentKind,
    pub seed: u64,
    pub total_reward: f64,
    /// First step with positive reward.
    pub first_reward_t: Option<usize>,
}

pub fn reward_csv(rows: &[RewardRow]) -> String {
    let mut out = String::from("agent,seed,total_reward,first_reward_t\n");
    for r in rows {
        write!(out, "{},{},{},", r.agent.name(), r.seed, r.total_reward).unwrap();
        if let Some(t) = r.first_reward_t {
            write!(out, "{t}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a two-column numeric CSV with a header, e.g. a coverage file.
pub fn read_pairs(text: &str) -> Option<Vec<(f64, f64)>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (a, b) = l.split_once(',')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })
        .collect()
}
