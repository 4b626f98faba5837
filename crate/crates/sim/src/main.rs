use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cellfree_otfs_core::conic::{ConicBackend, DenseIpm};
use cellfree_otfs_sim::figures::{fig1, fig1_summary_rows, fig2, write_fig1_cdf, write_fig2};
use cellfree_otfs_sim::output::{write_records_csv, write_records_json, write_summary_csv};
use cellfree_otfs_sim::spec::OutputFormat;
use cellfree_otfs_sim::validate::{self, SuiteReport};
use cellfree_otfs_sim::{
    cdf_stats, run_sweep, ClarabelBackend, ExperimentSpec, HarnessError, ResultRecord, RunOptions,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cfotfs", version, about = "Cell-free massive MIMO OTFS downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and write per-drop records.
    Run(Common),
    /// Per-user SE distributions under correlated and uncorrelated shadowing.
    Fig1(Common),
    /// 95%-likely SE against the number of users.
    Fig2(Common),
    /// Run the oracle and property suites; exits with 3 if any fails.
    Validate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Clarabel,
    Dense,
}

#[derive(Args)]
struct Common {
    /// JSON experiment spec; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the experiment spec).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of drops (overrides the experiment spec).
    #[arg(long)]
    drops: Option<usize>,
    /// Output directory (overrides the experiment spec; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record file format (overrides the experiment spec).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Record wall-clock time per drop (makes outputs non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Conic solver used by the power-control steps.
    #[arg(long, value_enum, default_value = "clarabel")]
    backend: Backend,
}

struct Job {
    spec: ExperimentSpec,
    out: PathBuf,
    opts: RunOptions,
    backend: Box<dyn ConicBackend>,
}

impl Common {
    fn job(&self) -> Result<Job, HarnessError> {
        let mut spec = match &self.config {
            Some(p) => ExperimentSpec::from_path(p)?,
            None => ExperimentSpec::default(),
        };
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(d) = self.drops {
            spec.n_drops = d;
        }
        if let Some(f) = self.format {
            spec.output.format = match f {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
        }
        spec.validate()?;
        let out = self
            .out
            .clone()
            .or_else(|| spec.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let backend: Box<dyn ConicBackend> = match self.backend {
            Backend::Clarabel => Box::new(ClarabelBackend::default()),
            Backend::Dense => Box::new(DenseIpm::default()),
        };
        Ok(Job {
            spec,
            out,
            opts: RunOptions {
                workers: self.parallel,
                timing: self.timing,
            },
            backend,
        })
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, HarnessError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_records(job: &Job, stem: &str, records: &[ResultRecord]) -> Result<(), HarnessError> {
    match job.spec.output.format {
        OutputFormat::Csv => write_records_csv(records, create(&job.out, &format!("{stem}.csv"))?),
        OutputFormat::Json => write_records_json(records, create(&job.out, &format!("{stem}.json"))?),
    }
}

fn cmd_run(job: Job) -> Result<(), HarnessError> {
    let points = run_sweep(&job.spec, job.opts, job.backend.as_ref())?;
    let single = job.spec.sweep.is_none();
    let mut summary = Vec::new();
    for (k, records) in &points {
        let stem = if single {
            "records".to_string()
        } else {
            format!("records_ku{k}")
        };
        write_records(&job, &stem, records)?;
        for &scheme in &job.spec.schemes {
            let mine: Vec<ResultRecord> = records.iter().filter(|r| r.scheme == scheme).cloned().collect();
            let label = if single {
                scheme.name().to_string()
            } else {
                format!("ku{k}/{}", scheme.name())
            };
            match cdf_stats(&mine) {
                Ok(s) => summary.push((label, s)),
                Err(HarnessError::EmptyInput) => eprintln!("{label}: every drop failed"),
                Err(e) => return Err(e),
            }
        }
        let failed = records.iter().filter(|r| r.error.is_some());
        for r in failed {
            eprintln!(
                "drop {} {}: {}",
                r.drop,
                r.scheme.name(),
                r.error.as_deref().unwrap_or("")
            );
        }
    }
    let rows: Vec<_> = summary.iter().map(|(l, s)| (l.clone(), s)).collect();
    write_summary_csv(&rows, create(&job.out, "summary.csv")?)?;
    write_summary_csv(&rows, io::stdout().lock())?;
    Ok(())
}

fn cmd_fig1(job: Job) -> Result<(), HarnessError> {
    let data = fig1(&job.spec, job.opts, job.backend.as_ref())?;
    write_fig1_cdf(&data, create(&job.out, "fig1_cdf.csv")?)?;
    for (model, records) in &data.records {
        let name = format!("{model:?}").to_lowercase();
        write_records(&job, &format!("fig1_records_{name}"), records)?;
    }
    let rows = fig1_summary_rows(&data);
    write_summary_csv(&rows, create(&job.out, "fig1_summary.csv")?)?;
    write_summary_csv(&rows, io::stdout().lock())?;
    Ok(())
}

fn cmd_fig2(job: Job) -> Result<(), HarnessError> {
    let rows = fig2(&job.spec, job.opts, job.backend.as_ref())?;
    write_fig2(&rows, create(&job.out, "fig2.csv")?)?;
    write_fig2(&rows, io::stdout().lock())?;
    Ok(())
}

/// Runs every suite at CLI scale; returns whether all passed.
fn cmd_validate(job: Job) -> Result<bool, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.opts.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let seed = job.spec.seed;
    let backend = job.backend.as_ref();
    let base = &job.spec.base;
    let reports: Vec<SuiteReport> = pool.install(|| {
        let ev = validate::desk_evidence(base, job.spec.n_drops, seed, backend);
        vec![
            validate::se_vs_monte_carlo(10, 20_000, seed),
            validate::estimation_consistency(base, 1000, 100, seed),
            validate::toy_optimizers(3, seed, backend),
            validate::structural_invariants(&ev),
            validate::qualitative_trends(&ev),
            validate::ep_cutoff(base, &validate::cutoff_sweep(base), 1, seed, backend),
            validate::otfs_identities(8, seed),
        ]
    });
    let mut out = io::stdout().lock();
    for r in &reports {
        writeln!(
            out,
            "{} {} ({} checks, {:.1}s): {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.checks,
            r.elapsed_s,
            r.detail
        )?;
    }
    serde_json::to_writer_pretty(create(&job.out, "validate.json")?, &reports)?;
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, which) = match &cli.command {
        Command::Run(c) => (c, 0),
        Command::Fig1(c) => (c, 1),
        Command::Fig2(c) => (c, 2),
        Command::Validate(c) => (c, 3),
    };
    let result = common.job().and_then(|job| match which {
        0 => cmd_run(job).map(|_| true),
        1 => cmd_fig1(job).map(|_| true),
        2 => cmd_fig2(job).map(|_| true),
        _ => cmd_validate(job),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
