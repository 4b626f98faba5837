//! Data behind the two result figures, as CSV tables ready for plotting.
//!
//! `fig1` compares the per-user SE distribution of every scheme under
//! correlated and uncorrelated shadowing. `fig2` tracks the 95%-likely SE as
//! the number of users grows, including the point where embedded pilots run
//! out of guard space. Both are qualitative reproductions at whatever scale
//! the experiment spec asks for; the defaults are desk scale (30 APs, 8 users, 50 drops).

use std::io::Write;

use cellfree_otfs_core::config::ShadowingModel;
use cellfree_otfs_core::conic::ConicBackend;
use cellfree_otfs_core::estimation::guard_budget_for;
use cellfree_otfs_core::pipeline::AllocationScheme;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::runner::{run_config, ResultRecord, RunOptions};
use crate::spec::ExperimentSpec;
use crate::stats::{cdf_stats, CdfStats};

/// User counts visited by `fig2` when the experiment spec has no sweep.
pub const DEFAULT_USER_SWEEP: [usize; 7] = [2, 4, 8, 12, 16, 18, 20];

fn shadowing_name(m: ShadowingModel) -> &'static str {
    match m {
        ShadowingModel::Correlated => "correlated",
        ShadowingModel::Uncorrelated => "uncorrelated",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Curve {
    pub shadowing: ShadowingModel,
    pub scheme: AllocationScheme,
    pub stats: CdfStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Data {
    pub curves: Vec<Fig1Curve>,
    pub records: Vec<(ShadowingModel, Vec<ResultRecord>)>,
}

impl Fig1Data {
    pub fn curve(&self, shadowing: ShadowingModel, scheme: AllocationScheme) -> Option<&Fig1Curve> {
        self.curves
            .iter()
            .find(|c| c.shadowing == shadowing && c.scheme == scheme)
    }
}

fn per_scheme_stats(records: &[ResultRecord], scheme: AllocationScheme) -> Result<CdfStats, HarnessError> {
    let subset: Vec<ResultRecord> = records.iter().filter(|r| r.scheme == scheme).cloned().collect();
    cdf_stats(&subset)
}

pub fn fig1(spec: &ExperimentSpec, opts: RunOptions, backend: &dyn ConicBackend) -> Result<Fig1Data, HarnessError> {
    spec.validate()?;
    let mut curves = Vec::new();
    let mut records = Vec::new();
    for model in [ShadowingModel::Correlated, ShadowingModel::Uncorrelated] {
        let mut cfg = spec.base.clone();
        cfg.shadowing.model = model;
        let recs = run_config(&cfg, spec, opts, backend)?;
        for &scheme in &spec.schemes {
            curves.push(Fig1Curve {
                shadowing: model,
                scheme,
                stats: per_scheme_stats(&recs, scheme)?,
            });
        }
        records.push((model, recs));
    }
    Ok(Fig1Data { curves, records })
}

/// Long-format CDF table: `shadowing, scheme, se_bits, cdf`.
pub fn write_fig1_cdf<W: Write>(data: &Fig1Data, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shadowing", "scheme", "se_bits", "cdf"])?;
    for c in &data.curves {
        for (v, p) in &c.stats.cdf {
            w.write_record([
                shadowing_name(c.shadowing),
                c.scheme.name(),
                &v.to_string(),
                &p.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn fig1_summary_rows(data: &Fig1Data) -> Vec<(String, &CdfStats)> {
    data.curves
        .iter()
        .map(|c| (format!("{}/{}", shadowing_name(c.shadowing), c.scheme.name()), &c.stats))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub num_users: usize,
    pub scheme: AllocationScheme,
    pub se_95: f64,
    pub mean_se: f64,
    /// Whether embedded pilots fit the guard budget at this user count.
    pub ep_feasible: bool,
    pub converged_drops: usize,
    pub infeasible_drops: usize,
    pub failed_drops: usize,
}

pub fn fig2(spec: &ExperimentSpec, opts: RunOptions, backend: &dyn ConicBackend) -> Result<Vec<Fig2Row>, HarnessError> {
    spec.validate()?;
    let points = match &spec.sweep {
        Some(s) => s.num_users.clone(),
        None => DEFAULT_USER_SWEEP.to_vec(),
    };
    let mut rows = Vec::new();
    for k in points {
        let cfg = spec.config_for_users(k);
        cfg.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let ep_feasible = guard_budget_for(&cfg).map(|g| k <= g.k_u_max).unwrap_or(false);
        let recs = run_config(&cfg, spec, opts, backend)?;
        for &scheme in &spec.schemes {
            let mine: Vec<&ResultRecord> = recs.iter().filter(|r| r.scheme == scheme).collect();
            let count = |s| mine.iter().filter(|r| r.status == s).count();
            use crate::runner::RecordStatus as S;
            let stats = per_scheme_stats(&recs, scheme);
            let (se_95, mean_se) = match &stats {
                Ok(s) => (s.likely_95(), s.mean),
                Err(HarnessError::EmptyInput) => (0.0, 0.0),
                Err(_) => return Err(stats.unwrap_err()),
            };
            rows.push(Fig2Row {
                num_users: k,
                scheme,
                se_95,
                mean_se,
                ep_feasible,
                converged_drops: count(S::Converged) + count(S::IterationCap),
                infeasible_drops: count(S::Infeasible),
                failed_drops: count(S::Error),
            });
        }
    }
    Ok(rows)
}

pub const FIG2_COLUMNS: [&str; 8] = [
    "num_users",
    "scheme",
    "se_95",
    "mean_se",
    "ep_feasible",
    "converged_drops",
    "infeasible_drops",
    "failed_drops",
];

pub fn write_fig2<W: Write>(rows: &[Fig2Row], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIG2_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.num_users.to_string(),
            r.scheme.name().to_string(),
            r.se_95.to_string(),
            r.mean_se.to_string(),
            r.ep_feasible.to_string(),
            r.converged_drops.to_string(),
            r.infeasible_drops.to_string(),
            r.failed_drops.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
