//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::models::ModelId;
use crate::output::{emit_csv, emit_failures, emit_observations, emit_summary, read_csv};
use crate::plot::{emit_plot, select_models};
use crate::suite::{aggregate, build_problem, gap_rows, prepare_meta, run_campaign, run_suite, TimingLog};

#[derive(Parser, Debug)]
#[command(name = "smog", about = "Meta-learning multi-objective BO experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit meta models for the configured models and store them in the cache.
    FitMeta {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `meta_cache_dir` of the config.
        #[arg(long)]
        meta_cache: Option<PathBuf>,
    },
    /// One campaign of one model.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        meta_cache: Option<PathBuf>,
        /// Defaults to the first model of the config.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = 0)]
        repetition: usize,
    },
    /// Every configured model times every repetition.
    Suite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        meta_cache: Option<PathBuf>,
    },
    /// Render a results CSV as an SVG of gap curves.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Comma-separated subset of models.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
    },
}

fn cache_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| cfg.meta_cache_dir.clone())
}

fn write_outputs(dir: &Path, out: &crate::suite::SuiteOutput, log: &TimingLog, name: &str) -> Result<()> {
    emit_csv(&out.rows, &dir.join(format!("{name}.csv")))?;
    emit_summary(&out.summary, &dir.join(format!("{name}_summary.csv")))?;
    emit_failures(&out.records, &dir.join(format!("{name}_failures.csv")))?;
    emit_observations(&out.records, &dir.join(format!("{name}_observations.csv")))?;
    emit_plot(&out.summary, &dir.join(format!("{name}.svg")))?;
    log.write(&dir.join("timing.log"))
}

fn execute(command: Command, log: &mut TimingLog) -> Result<()> {
    match command {
        Command::FitMeta { config, meta_cache } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let dir = cache_dir(&cfg, meta_cache)
                .ok_or_else(|| HarnessError::Config("fit-meta needs --meta-cache or meta_cache_dir".into()))?;
            let mut models = cfg.model_ids()?;
            models.retain(|m| m.uses_metadata());
            if models.is_empty() {
                models = vec![ModelId::Smog];
            }
            prepare_meta(&cfg, &models, Some(&dir), log)?;
            Ok(())
        }
        Command::Run { config, meta_cache, model, repetition } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(m) = model {
                cfg.models = vec![m];
            }
            cfg.models.truncate(1);
            cfg.validate()?;
            let id = cfg.model_ids()?[0];
            let cache = cache_dir(&cfg, meta_cache);
            let meta = prepare_meta(&cfg, &[id], cache.as_deref(), log)?;
            let (bench, _) = build_problem(&cfg)?;
            let record = run_campaign(&cfg, id, &meta, bench.as_ref(), repetition)?;
            if !record.warnings.is_empty() {
                log.push(format!("run: {} iteration(s) fell back to random points", record.warnings.len()));
            }
            let rows = gap_rows(std::slice::from_ref(&record), &cfg.benchmark_id()?.to_string());
            let summary = aggregate(&rows);
            let out = crate::suite::SuiteOutput { records: vec![record], rows, summary };
            write_outputs(&cfg.output_dir, &out, log, "run")
        }
        Command::Suite { config, meta_cache } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let cache = cache_dir(&cfg, meta_cache);
            let out = run_suite(&cfg, cache.as_deref(), log)?;
            write_outputs(&cfg.output_dir, &out, log, "results")
        }
        Command::Plot { input, output, models } => {
            let rows = read_csv(&input)?;
            let mut summary = aggregate(&rows);
            if let Some(models) = models {
                summary = select_models(&summary, &models)?;
            }
            emit_plot(&summary, &output)
        }
    }
}

/// Caps the global worker pool from `SMOG_THREADS` (0 or unset = automatic).
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("SMOG_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| HarnessError::Config(format!("SMOG_THREADS={v:?} is not a count")))?;
    if n > 0 {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut log = TimingLog::echoing();
    match configure_threads().and_then(|_| execute(cli.command, &mut log)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
