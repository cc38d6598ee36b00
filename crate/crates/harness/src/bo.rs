//! The single-campaign BO loop.

use std::time::Instant;

use rand::Rng;
use smog_core::benchmarks::Benchmark;
use smog_core::mobo::{hypervolume, log_ehvi, optimize_acquisition_continuous, pareto_front, standardize, ParetoState};
use smog_core::seeding::{derive_seed, purpose, rng_for};
use smog_core::smog::TaskIndex;
use smog_core::MultiOutputDataset;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::models::{ModelId, Surrogate};

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Hypervolume of everything observed so far, against the benchmark's reference.
    pub hv: f64,
    pub elapsed_ms: f64,
    /// The point was drawn at random because the surrogate step failed.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub model: ModelId,
    pub benchmark: String,
    pub seed: u64,
    pub rows: Vec<IterationRow>,
    /// `(iteration, message)` for every fallback.
    pub warnings: Vec<(usize, String)>,
}

/// The point proposed by the surrogate at iteration `i`, or the reason it could not be.
fn propose(
    cfg: &ExperimentConfig,
    model: &mut dyn Surrogate,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    seed: u64,
    i: usize,
) -> std::result::Result<Vec<f64>, String> {
    let dim = xs[0].len();
    let (ys_std, _) = standardize(ys).map_err(|e| e.to_string())?;
    let mut acq = cfg.acquisition_config();
    let state = ParetoState::inferred(&ys_std, acq.reference_fraction).map_err(|e| e.to_string())?;
    let data = MultiOutputDataset::new(dim, ys[0].len(), xs.to_vec(), ys_std).map_err(|e| e.to_string())?;
    let step = derive_seed(seed, &[purpose::BO_ITERATION, i as u64]);
    model.fit(&data, derive_seed(step, &[0])).map_err(|e| format!("fit failed: {e}"))?;

    acq.base_seed = derive_seed(acq.base_seed, &[seed, i as u64]);
    let model: &dyn Surrogate = model;
    let af = |x: &[f64]| {
        model
            .predict(&[x.to_vec()])
            .and_then(|p| log_ehvi(&p, &state, &acq))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let bounds = vec![(0.0, 1.0); dim];
    let (x, value) =
        optimize_acquisition_continuous(&af, &bounds, &acq, derive_seed(step, &[1])).map_err(|e| e.to_string())?;
    if value == f64::NEG_INFINITY {
        return Err("acquisition had no finite value".into());
    }
    Ok(x)
}

/// Runs one campaign: a uniform random initial point followed by
/// `cfg.iterations` acquisition steps on the target task.
pub fn run_bo_loop(cfg: &ExperimentConfig, model: &mut dyn Surrogate, bench: &dyn Benchmark, seed: u64) -> Result<RunRecord> {
    let dim = bench.dim();
    let reference = bench.reference_point();
    let mut record = RunRecord {
        model: model.id(),
        benchmark: bench.name(),
        seed,
        rows: Vec::with_capacity(cfg.iterations + 1),
        warnings: Vec::new(),
    };
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<Vec<f64>> = Vec::new();

    for i in 0..=cfg.iterations {
        let start = Instant::now();
        let (x, fallback) = if i == 0 {
            let mut rng = rng_for(seed, &[purpose::BO_INITIAL]);
            ((0..dim).map(|_| rng.random::<f64>()).collect(), false)
        } else {
            match propose(cfg, model, &xs, &ys, seed, i) {
                Ok(x) => (x, false),
                Err(msg) => {
                    record.warnings.push((i, msg));
                    let mut rng = rng_for(seed, &[purpose::BO_ITERATION, i as u64, 2]);
                    ((0..dim).map(|_| rng.random::<f64>()).collect(), true)
                }
            }
        };
        let y = bench.evaluate(TaskIndex::Target, &x)?;
        xs.push(x.clone());
        ys.push(y.clone());
        let hv = hypervolume(&pareto_front(&ys), &reference)?;
        let elapsed_ms = if cfg.record_timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        record.rows.push(IterationRow { iteration: i, x, y, hv, elapsed_ms, fallback });
    }
    Ok(record)
}
