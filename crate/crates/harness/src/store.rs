use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use forage_core::engine::MotionLimits;
use forage_core::{Distribution, PolicyKind, TrialResult};

use crate::grid::{GridSpec, GridTrial};
use crate::HarnessError;

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const INDEX_FILE: &str = "index.txt";
pub const SPEC_FILE: &str = "spec.json";
pub const LOG_DIR: &str = "logs";

/// Header of one finished trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub key: String,
    pub cell: String,
    pub team_size: usize,
    pub arena: u32,
    pub distribution: Distribution,
    pub policy: PolicyKind,
    pub trial: usize,
    pub layout_seed: u64,
    pub behavior_seed: u64,
    pub duration_secs: f64,
    pub deposits: usize,
    pub initial_resources: usize,
    pub llm_calls: usize,
    pub llm_fallbacks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_mean_secs: Option<f64>,
    pub center_zone_radius: f64,
    pub limits: MotionLimits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_file: Option<String>,
}

impl TrialRow {
    pub fn new(trial: &GridTrial, result: &TrialResult, log_file: Option<String>) -> Self {
        let n = result.latency_samples.len();
        Self {
            key: trial.key.to_string(),
            cell: trial.key.cell.to_string(),
            team_size: trial.key.cell.team_size,
            arena: trial.key.cell.arena,
            distribution: trial.key.cell.distribution,
            policy: trial.key.policy,
            trial: trial.key.trial,
            layout_seed: trial.layout_seed,
            behavior_seed: trial.config.seed,
            duration_secs: trial.config.duration_secs,
            deposits: result.deposits,
            initial_resources: result.initial_resources,
            llm_calls: result.llm_calls,
            llm_fallbacks: result.llm_fallbacks,
            latency_mean_secs: (n > 0).then(|| result.latency_samples.iter().sum::<f64>() / n as f64),
            center_zone_radius: trial.config.arena.center_zone_radius,
            limits: trial.config.limits,
            log_file,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRow {
    pub key: String,
    pub error: String,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Rows of a store, sorted by key.
pub fn load_rows(dir: &Path) -> Result<Vec<TrialRow>, HarnessError> {
    let mut rows: Vec<TrialRow> = read_jsonl(&dir.join(TRIALS_FILE))?;
    rows.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(rows)
}

pub fn load_failures(dir: &Path) -> Result<Vec<FailureRow>, HarnessError> {
    read_jsonl(&dir.join(FAILURES_FILE))
}

/// Append-only results directory. Only the grid's writer thread touches it.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    trials: File,
    failures: File,
    index: File,
}

impl Store {
    /// Opens `dir`. Without `resume`, refuses to mix into existing results.
    pub fn open(dir: &Path, resume: bool) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir.join(LOG_DIR))?;
        if !resume && dir.join(INDEX_FILE).exists() {
            return Err(HarnessError::Spec(format!(
                "{} already holds results; resume or pick another directory",
                dir.display()
            )));
        }
        // failures are retried on resume, so the old list is dropped
        if resume {
            let _ = fs::remove_file(dir.join(FAILURES_FILE));
        }
        let append = |name: &str| OpenOptions::new().create(true).append(true).open(dir.join(name));
        Ok(Self {
            dir: dir.to_path_buf(),
            trials: append(TRIALS_FILE)?,
            failures: append(FAILURES_FILE)?,
            index: append(INDEX_FILE)?,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn completed_keys(&self) -> Result<BTreeSet<String>, HarnessError> {
        let path = self.dir.join(INDEX_FILE);
        let text = fs::read_to_string(path)?;
        Ok(text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
    }

    pub fn write_spec(&self, spec: &GridSpec) -> Result<(), HarnessError> {
        fs::write(self.dir.join(SPEC_FILE), serde_json::to_string_pretty(spec)?)?;
        Ok(())
    }

    /// Log, then row, then index entry; a crash in between only costs a rerun.
    pub fn write_success(&mut self, trial: &GridTrial, result: &TrialResult, keep_log: bool) -> Result<(), HarnessError> {
        let key = trial.key.to_string();
        let log_file = if keep_log {
            let rel = format!("{LOG_DIR}/{key}.jsonl");
            fs::write(self.dir.join(&rel), result.event_log_jsonl())?;
            Some(rel)
        } else {
            None
        };
        let row = TrialRow::new(trial, result, log_file);
        writeln!(self.trials, "{}", serde_json::to_string(&row)?)?;
        self.trials.flush()?;
        writeln!(self.index, "{key}")?;
        self.index.flush()?;
        Ok(())
    }

    pub fn write_failure(&mut self, trial: &GridTrial, error: &str) -> Result<(), HarnessError> {
        let row = FailureRow {
            key: trial.key.to_string(),
            error: error.to_string(),
        };
        writeln!(self.failures, "{}", serde_json::to_string(&row)?)?;
        self.failures.flush()?;
        Ok(())
    }
}
