use rayon::prelude::*;
use std::path::Path;
use std::sync::mpsc;
use std::sync::Arc;

use forage_core::policy::{BuiltinPolicies, PolicyProvider};
use forage_core::{run_trial_with, PolicyKind, TrialResult};
use forage_gateway::{Gateway, LlmPolicyProvider};

use crate::grid::{expand_grid, GridSpec, GridTrial};
use crate::store::Store;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub parallelism: usize,
    pub resume: bool,
    /// Stop after this many new trials (for interrupt testing).
    pub limit: Option<usize>,
    pub keep_logs: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            parallelism: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            resume: false,
            limit: None,
            keep_logs: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GridReport {
    pub total: usize,
    pub completed: usize,
    pub skipped: usize,
    /// (key, error)
    pub failures: Vec<(String, String)>,
    /// Outbound HTTP requests made by the grid's gateway.
    pub network_ops: u64,
}

impl GridReport {
    /// 0 on a clean run, 2 when any trial failed.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            2
        }
    }
}

/// Runs every pending trial of `spec` into the store at `out`.
pub fn run_grid(spec: &GridSpec, out: &Path, options: &RunOptions) -> Result<GridReport, HarnessError> {
    let trials = expand_grid(spec)?;
    let mut store = Store::open(out, options.resume)?;
    store.write_spec(spec)?;
    let done = store.completed_keys()?;
    let mut pending: Vec<&GridTrial> = trials
        .iter()
        .filter(|t| !done.contains(&t.key.to_string()))
        .collect();
    if let Some(limit) = options.limit {
        pending.truncate(limit);
    }
    let gateway = if spec.policies.contains(&PolicyKind::Llm) {
        Some(Arc::new(Gateway::new(spec.gateway.clone())?))
    } else {
        None
    };
    let llm_provider = gateway.clone().map(LlmPolicyProvider::new);
    let provider: &dyn PolicyProvider = match &llm_provider {
        Some(p) => p,
        None => &BuiltinPolicies,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Spec(format!("cannot start worker pool: {e}")))?;

    let mut report = GridReport {
        total: trials.len(),
        skipped: trials.iter().filter(|t| done.contains(&t.key.to_string())).count(),
        ..GridReport::default()
    };
    let keep_logs = options.keep_logs;
    let (tx, rx) = mpsc::channel::<(&GridTrial, Result<TrialResult, forage_core::Error>)>();
    let write_result = std::thread::scope(|s| {
        let writer = s.spawn(|| -> Result<(usize, Vec<(String, String)>), HarnessError> {
            let mut completed = 0;
            let mut failures = Vec::new();
            for (trial, result) in rx {
                match result {
                    Ok(r) => {
                        store.write_success(trial, &r, keep_logs)?;
                        completed += 1;
                    }
                    Err(e) => {
                        store.write_failure(trial, &e.to_string())?;
                        failures.push((trial.key.to_string(), e.to_string()));
                    }
                }
            }
            Ok((completed, failures))
        });
        pool.install(|| {
            pending.par_iter().for_each_with(tx, |tx, trial| {
                let result = run_trial_with(trial.config.clone(), provider);
                let _ = tx.send((*trial, result));
            });
        });
        writer.join().expect("writer thread")
    });
    let (completed, failures) = write_result?;
    report.completed = completed;
    report.failures = failures;
    report.network_ops = gateway.map_or(0, |g| g.network_ops());
    Ok(report)
}
