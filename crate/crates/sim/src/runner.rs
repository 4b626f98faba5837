//! Drop-level experiment execution.
//!
//! Drops fan out over a rayon pool. Each drop gets its own seed derived from
//! the master seed and the drop index, so the records do not depend on how
//! many workers ran them.

use std::time::Instant;

use cellfree_otfs_core::channel_model::generate_drop;
use cellfree_otfs_core::conic::ConicBackend;
use cellfree_otfs_core::pipeline::{evaluate_large_scale, AllocationScheme, DropEvaluation};
use cellfree_otfs_core::power_control::SolveStatus;
use cellfree_otfs_core::rng::derive_seed;
use cellfree_otfs_core::SystemConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::spec::ExperimentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Converged,
    IterationCap,
    Infeasible,
    /// The drop could not be evaluated; see [`ResultRecord::error`].
    Error,
}

impl RecordStatus {
    pub fn name(self) -> &'static str {
        match self {
            RecordStatus::Converged => "converged",
            RecordStatus::IterationCap => "iteration_cap",
            RecordStatus::Infeasible => "infeasible",
            RecordStatus::Error => "error",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            RecordStatus::Converged,
            RecordStatus::IterationCap,
            RecordStatus::Infeasible,
            RecordStatus::Error,
        ]
        .into_iter()
        .find(|r| r.name() == s)
    }
}

impl From<SolveStatus> for RecordStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Converged => RecordStatus::Converged,
            SolveStatus::IterationCap => RecordStatus::IterationCap,
            SolveStatus::Infeasible => RecordStatus::Infeasible,
        }
    }
}

/// Outcome of one scheme on one drop. `se` always has one entry per user;
/// infeasible and failed drops report zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub drop: usize,
    pub seed: u64,
    pub scheme: AllocationScheme,
    pub se: Vec<f64>,
    pub min_se: f64,
    pub status: RecordStatus,
    pub bis_iters: usize,
    pub sca_iters: usize,
    /// Only filled when timing is requested, so that outputs stay reproducible.
    pub wall_ms: Option<f64>,
    pub error: Option<String>,
}

impl ResultRecord {
    fn from_evaluation(drop: usize, eval: DropEvaluation, wall_ms: Option<f64>) -> Self {
        ResultRecord {
            drop,
            seed: eval.seed,
            scheme: eval.scheme,
            min_se: eval.min_se,
            se: eval.se,
            status: eval.status.into(),
            bis_iters: eval.bisection_iterations,
            sca_iters: eval.sca_iterations,
            wall_ms,
            error: None,
        }
    }

    fn failed(drop: usize, seed: u64, scheme: AllocationScheme, num_users: usize, err: impl ToString) -> Self {
        ResultRecord {
            drop,
            seed,
            scheme,
            se: vec![0.0; num_users],
            min_se: 0.0,
            status: RecordStatus::Error,
            bis_iters: 0,
            sca_iters: 0,
            wall_ms: None,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon choose.
    pub workers: usize,
    pub timing: bool,
}

/// Runs every scheme of `spec` on `spec.n_drops` drops of `cfg`, sorted by
/// drop and then by scheme order in the experiment spec.
pub fn run_config(
    cfg: &SystemConfig,
    spec: &ExperimentSpec,
    opts: RunOptions,
    backend: &dyn ConicBackend,
) -> Result<Vec<ResultRecord>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let per_drop: Vec<Vec<ResultRecord>> = pool.install(|| {
        (0..spec.n_drops)
            .into_par_iter()
            .map(|d| {
                run_drop(
                    cfg,
                    d,
                    derive_seed(spec.seed, d as u64),
                    &spec.schemes,
                    opts.timing,
                    backend,
                )
            })
            .collect()
    });
    let mut records: Vec<ResultRecord> = per_drop.into_iter().flatten().collect();
    // Already in order; the stable sort makes the guarantee explicit.
    records.sort_by_key(|r| r.drop);
    Ok(records)
}

/// Runs the experiment spec's base configuration.
pub fn run_experiment(
    spec: &ExperimentSpec,
    opts: RunOptions,
    backend: &dyn ConicBackend,
) -> Result<Vec<ResultRecord>, HarnessError> {
    spec.validate()?;
    run_config(&spec.base, spec, opts, backend)
}

/// Runs every point of the user-count sweep, or the base configuration alone
/// when the experiment spec has no sweep.
pub fn run_sweep(
    spec: &ExperimentSpec,
    opts: RunOptions,
    backend: &dyn ConicBackend,
) -> Result<Vec<(usize, Vec<ResultRecord>)>, HarnessError> {
    spec.validate()?;
    let points = match &spec.sweep {
        Some(s) => s.num_users.clone(),
        None => vec![spec.base.num_users],
    };
    points
        .into_iter()
        .map(|k| Ok((k, run_config(&spec.config_for_users(k), spec, opts, backend)?)))
        .collect()
}

fn run_drop(
    cfg: &SystemConfig,
    drop: usize,
    seed: u64,
    schemes: &[AllocationScheme],
    timing: bool,
    backend: &dyn ConicBackend,
) -> Vec<ResultRecord> {
    let ls = match generate_drop(cfg, seed) {
        Ok(d) => d.large_scale,
        Err(e) => {
            return schemes
                .iter()
                .map(|&s| ResultRecord::failed(drop, seed, s, cfg.num_users, &e))
                .collect()
        }
    };
    schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            match evaluate_large_scale(&ls, cfg, seed, scheme, backend) {
                Ok(eval) => {
                    let wall = timing.then(|| start.elapsed().as_secs_f64() * 1e3);
                    ResultRecord::from_evaluation(drop, eval, wall)
                }
                Err(e) => ResultRecord::failed(drop, seed, scheme, cfg.num_users, e),
            }
        })
        .collect()
}
