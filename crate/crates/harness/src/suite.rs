//! Multi-seed, multi-model suites and the meta-model cache.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smog_core::benchmarks::{sample_meta_data, Benchmark};
use smog_core::mobo::hv_gap;
use smog_core::seeding::derive_seed;
use smog_core::smog::{load_meta_models, save_meta_models};

use crate::bo::{run_bo_loop, RunRecord};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::models::{build_model, fit_meta_models, MetaModels, ModelId};
use crate::output::{CsvRow, SummaryRow};

/// Stream purpose for repetition seeds, kept clear of the core purposes.
const REPETITION: u64 = 100;

pub fn repetition_seed(root: u64, rep: usize) -> u64 {
    derive_seed(root, &[REPETITION, rep as u64])
}

/// Human-readable progress and timings. Never part of the CSV output.
#[derive(Debug, Default, Clone)]
pub struct TimingLog {
    pub lines: Vec<String>,
    pub echo: bool,
}

impl TimingLog {
    pub fn echoing() -> Self {
        Self { lines: Vec::new(), echo: true }
    }

    pub fn push(&mut self, line: impl Into<String>) {
        let line = line.into();
        if self.echo {
            eprintln!("{line}");
        }
        self.lines.push(line);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut text = self.lines.join("\n");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// What a cached set of meta models was fitted from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheManifest {
    benchmark: String,
    seed: u64,
    meta_noise: f64,
    meta_restarts: usize,
}

impl CacheManifest {
    fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            benchmark: cfg.benchmark_id()?.to_string(),
            seed: cfg.seed,
            meta_noise: cfg.meta_noise,
            meta_restarts: cfg.meta_restarts,
        })
    }
}

fn objective_dir(dir: &Path, o: usize) -> PathBuf {
    dir.join(format!("objective-{o}"))
}

/// Benchmark instance and metadata for a config. The instance seed is the root seed.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<(Box<dyn Benchmark>, Vec<smog_core::MultiOutputDataset>)> {
    let id = cfg.benchmark_id()?;
    let bench = id.build(cfg.seed)?;
    let meta = sample_meta_data(bench.as_ref(), id.n_meta(), cfg.meta_noise, cfg.seed)?;
    Ok((bench, meta))
}

/// Meta models for `models`, loaded from `cache` when present and fitted
/// (and stored, if a cache directory is given) otherwise.
pub fn prepare_meta(
    cfg: &ExperimentConfig,
    models: &[ModelId],
    cache: Option<&Path>,
    log: &mut TimingLog,
) -> Result<MetaModels> {
    if !models.iter().any(|m| m.uses_metadata()) {
        return Ok(MetaModels::default());
    }
    let (bench, meta_data) = build_problem(cfg)?;
    let objectives = bench.objectives();
    let manifest = CacheManifest::for_config(cfg)?;
    let smog_cfg = cfg.smog_config();

    let mut out = MetaModels::default();
    let mut missing: Vec<ModelId> = models.iter().copied().filter(|m| m.uses_metadata()).collect();
    if let Some(dir) = cache {
        let mpath = dir.join("manifest.json");
        if mpath.exists() {
            let text = std::fs::read_to_string(&mpath)?;
            let found: CacheManifest = serde_json::from_str(&text)
                .map_err(|e| HarnessError::Config(format!("{}: bad manifest: {e}", mpath.display())))?;
            if found != manifest {
                return Err(HarnessError::Config(format!(
                    "meta cache {} was built for {found:?}, config needs {manifest:?}",
                    dir.display()
                )));
            }
            if missing.contains(&ModelId::Smog) && dir.join("meta").is_dir() {
                out.joint = load_meta_models(dir)?;
                missing.retain(|m| *m != ModelId::Smog);
                log.push(format!("meta: loaded {} joint models from {} (no fitting)", out.joint.len(), dir.display()));
            }
            if missing.contains(&ModelId::IndScaml) && (0..objectives).all(|o| objective_dir(dir, o).join("meta").is_dir()) {
                out.per_objective =
                    (0..objectives).map(|o| load_meta_models(&objective_dir(dir, o))).collect::<smog_core::Result<_>>()?;
                missing.retain(|m| *m != ModelId::IndScaml);
                log.push(format!("meta: loaded single-objective models for {objectives} objectives from {} (no fitting)", dir.display()));
            }
        }
    }
    if missing.is_empty() {
        return Ok(out);
    }

    let start = Instant::now();
    let (fitted, failures) = fit_meta_models(&missing, &meta_data, &smog_cfg, cfg.seed)?;
    log.push(format!(
        "meta: fitted {} for {} task(s) in {:.0} ms",
        missing.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", "),
        meta_data.len(),
        start.elapsed().as_secs_f64() * 1e3
    ));
    for f in &failures {
        log.push(format!("meta: task {} dropped: {}", f.index, f.error));
    }
    if missing.contains(&ModelId::Smog) {
        out.joint = fitted.joint;
    }
    if missing.contains(&ModelId::IndScaml) {
        out.per_objective = fitted.per_objective;
    }
    if let Some(dir) = cache {
        std::fs::create_dir_all(dir)?;
        if missing.contains(&ModelId::Smog) {
            save_meta_models(dir, &out.joint)?;
        }
        if missing.contains(&ModelId::IndScaml) {
            for (o, models) in out.per_objective.iter().enumerate() {
                save_meta_models(&objective_dir(dir, o), models)?;
            }
        }
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        log.push(format!("meta: cached in {}", dir.display()));
    }
    Ok(out)
}

/// Runs the campaign of `model` for repetition `rep`.
pub fn run_campaign(cfg: &ExperimentConfig, model: ModelId, meta: &MetaModels, bench: &dyn Benchmark, rep: usize) -> Result<RunRecord> {
    let seed = repetition_seed(cfg.seed, rep);
    let mut surrogate = build_model(model, meta, bench.dim(), bench.objectives(), &cfg.smog_config(), seed)?;
    run_bo_loop(cfg, surrogate.as_mut(), bench, seed)
}

/// CSV rows for `records`, with gaps against the best HV over all of them,
/// sorted by (model, seed, iteration).
pub fn gap_rows(records: &[RunRecord], benchmark: &str) -> Vec<CsvRow> {
    let best = records.iter().flat_map(|r| r.rows.iter().map(|x| x.hv)).fold(f64::NEG_INFINITY, f64::max);
    let mut rows: Vec<CsvRow> = records
        .iter()
        .flat_map(|rec| {
            rec.rows.iter().map(move |r| CsvRow {
                model: rec.model.to_string(),
                benchmark: benchmark.to_string(),
                seed: rec.seed,
                iteration: r.iteration,
                hv: r.hv,
                hv_gap: hv_gap(r.hv, best),
                elapsed_ms: r.elapsed_ms,
            })
        })
        .collect();
    rows.sort_by(|a, b| (&a.model, a.seed, a.iteration).cmp(&(&b.model, b.seed, b.iteration)));
    rows
}

/// Mean gap and `std / sqrt(reps)` per (model, iteration); the SE is 0 for one repetition.
pub fn aggregate(rows: &[CsvRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, usize)> = rows.iter().map(|r| (r.model.as_str(), r.iteration)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(model, iteration)| {
            let gaps: Vec<f64> =
                rows.iter().filter(|r| r.model == model && r.iteration == iteration).map(|r| r.hv_gap).collect();
            let n = gaps.len() as f64;
            let mean = gaps.iter().sum::<f64>() / n;
            let std_error = if gaps.len() > 1 {
                (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            };
            SummaryRow { model: model.to_string(), iteration, mean_gap: mean, std_error, repetitions: gaps.len() }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub records: Vec<RunRecord>,
    pub rows: Vec<CsvRow>,
    pub summary: Vec<SummaryRow>,
}

/// All models times all repetitions. Campaigns run concurrently; output
/// order depends only on (model, seed, iteration).
pub fn run_suite(cfg: &ExperimentConfig, cache: Option<&Path>, log: &mut TimingLog) -> Result<SuiteOutput> {
    cfg.validate()?;
    let models = cfg.model_ids()?;
    let meta = prepare_meta(cfg, &models, cache, log)?;
    let (bench, _) = build_problem(cfg)?;
    let jobs: Vec<(ModelId, usize)> = models.iter().flat_map(|&m| (0..cfg.repetitions).map(move |r| (m, r))).collect();
    let start = Instant::now();
    let records = jobs
        .par_iter()
        .map(|&(m, r)| run_campaign(cfg, m, &meta, bench.as_ref(), r))
        .collect::<Result<Vec<_>>>()?;
    log.push(format!("suite: {} campaigns in {:.0} ms", jobs.len(), start.elapsed().as_secs_f64() * 1e3));
    let fallbacks: usize = records.iter().map(|r| r.warnings.len()).sum();
    if fallbacks > 0 {
        log.push(format!("suite: {fallbacks} iteration(s) fell back to random points"));
    }
    let rows = gap_rows(&records, &cfg.benchmark_id()?.to_string());
    let summary = aggregate(&rows);
    Ok(SuiteOutput { records, rows, summary })
}
