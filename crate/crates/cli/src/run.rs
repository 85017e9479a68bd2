use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::ExperimentConfig;
use crate::error::RunError;
use crate::record::{check_finite, suite_verdicts, RunRecord};
use crate::tasks;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; the rayon default when `None`.
    pub jobs: Option<usize>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Executes one validated configuration. Per-sample work runs on a pool of
/// `opts.jobs` threads; rows are reduced in sample order, so the thread count
/// does not change the results.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord, RunError> {
    cfg.validate()?;
    if opts.jobs == Some(0) {
        return Err(RunError::Usage("--jobs must be at least 1".into()));
    }
    let started_unix = now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Usage(format!("cannot start worker pool: {e}")))?;
    let out = pool.install(|| tasks::execute(cfg))?;
    check_finite(&out.rows)?;
    Ok(RunRecord {
        config_hash: cfg.hash(),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        started_unix,
        finished_unix: now(),
        task: cfg.task.name().into(),
        model: cfg.model.name(),
        seed: cfg.seed,
        suites: suite_verdicts(&out.rows),
        rows: out.rows,
        details: out.details,
        tables: out.tables,
        notes: out.notes,
    })
}
