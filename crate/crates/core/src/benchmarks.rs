//! Analytic benchmark families: a three-source sinusoidal toy problem and the
//! multi-objective Hartmann6 generator.
//!
//! Raw evaluators (`sinusoidal_eval`, `hartmann_eval`) return values in the
//! natural minimization convention. The [`Benchmark`] trait negates them, so
//! everything downstream of it maximizes.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result, SmogError};
use crate::gp::MultiOutputDataset;
use crate::seeding::{purpose, rng_for};
use crate::smog::TaskIndex;

pub const SIN_DELTA: f64 = std::f64::consts::PI / 12.0;
pub const SIN_PHI: f64 = std::f64::consts::PI / 6.0;
/// Target weights per objective over the three sources.
pub const SIN_WEIGHTS: [[f64; 3]; 2] = [[0.5, 0.35, 0.15], [0.4, 0.4, 0.2]];
pub const SIN_DOMAIN: (f64, f64) = (0.0, 2.0 * std::f64::consts::PI);

pub const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];

pub const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Sampling intervals for the four α components.
pub const HARTMANN_ALPHA_RANGES: [(f64, f64); 4] = [(1.0, 1.02), (1.18, 1.2), (2.0, 3.0), (3.2, 3.4)];
pub const HARTMANN_EPSILON_MAX: f64 = 0.15;
pub const HARTMANN_DEFAULT_META: usize = 8;
pub const DEFAULT_META_POINTS: usize = 64;

/// Sinusoidal task value at raw `x` (not the unit-box coordinate).
///
/// Meta tasks are `Meta(0..3)`, objectives `0..2`.
pub fn sinusoidal_eval(task: TaskIndex, objective: usize, x: f64) -> Result<f64> {
    if objective > 1 {
        return invalid(format!("sinusoidal objective {objective} out of range"));
    }
    let shift = if objective == 1 { SIN_PHI } else { 0.0 };
    let source = |m: usize| (x + shift + (m as f64 - 1.0) * SIN_DELTA).sin();
    match task {
        TaskIndex::Meta(m) if m < 3 => Ok(source(m)),
        TaskIndex::Meta(m) => invalid(format!("sinusoidal task {m} out of range")),
        TaskIndex::Target => Ok((0..3).map(|m| SIN_WEIGHTS[objective][m] * source(m)).sum()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HartmannInstance {
    /// One α per meta task, then the target's α last.
    pub alpha: Vec<[f64; 4]>,
    pub epsilon: Vec<[f64; 6]>,
    pub seed: u64,
}

impl HartmannInstance {
    pub fn meta_tasks(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn objectives(&self) -> usize {
        self.epsilon.len()
    }

    fn alpha_for(&self, task: TaskIndex) -> Result<&[f64; 4]> {
        match task {
            TaskIndex::Meta(m) if m < self.meta_tasks() => Ok(&self.alpha[m]),
            TaskIndex::Meta(m) => invalid(format!("hartmann task {m} out of range")),
            TaskIndex::Target => Ok(&self.alpha[self.meta_tasks()]),
        }
    }
}

pub fn make_hartmann(meta_tasks: usize, objectives: usize, seed: u64) -> Result<HartmannInstance> {
    if meta_tasks == 0 || objectives == 0 {
        return invalid("hartmann needs M >= 1 and O >= 1");
    }
    let alpha = (0..=meta_tasks)
        .map(|m| {
            let mut rng = rng_for(seed, &[purpose::BENCHMARK_ALPHA, m as u64]);
            HARTMANN_ALPHA_RANGES.map(|(lo, hi)| rng.random_range(lo..=hi))
        })
        .collect();
    let epsilon = (0..objectives)
        .map(|o| {
            let mut rng = rng_for(seed, &[purpose::BENCHMARK_EPSILON, o as u64]);
            [(); 6].map(|_| rng.random_range(0.0..=HARTMANN_EPSILON_MAX))
        })
        .collect();
    Ok(HartmannInstance { alpha, epsilon, seed })
}

pub fn hartmann_eval(inst: &HartmannInstance, task: TaskIndex, objective: usize, x: &[f64]) -> Result<f64> {
    let alpha = inst.alpha_for(task)?;
    let eps = inst
        .epsilon
        .get(objective)
        .ok_or_else(|| SmogError::InvalidArgument(format!("hartmann objective {objective} out of range")))?;
    if x.len() != 6 {
        return invalid(format!("hartmann expects 6 inputs, got {}", x.len()));
    }
    let mut total = 0.0;
    for i in 0..4 {
        let mut inner = 0.0;
        for j in 0..6 {
            let d = x[j] - HARTMANN_P[i][j] - eps[j];
            inner += HARTMANN_A[i][j] * d * d;
        }
        total += alpha[i] * (-inner).exp();
    }
    Ok(-total)
}

/// A family of tasks on the unit box whose objectives are to be maximized.
pub trait Benchmark: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn objectives(&self) -> usize;
    fn meta_tasks(&self) -> usize;
    /// Objective vector at unit-box point `u`, maximization convention.
    fn evaluate(&self, task: TaskIndex, u: &[f64]) -> Result<Vec<f64>>;
    /// Fixed reference point used when reporting hypervolume.
    fn reference_point(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sinusoidal;

impl Benchmark for Sinusoidal {
    fn name(&self) -> String {
        "sinusoidal".into()
    }
    fn dim(&self) -> usize {
        1
    }
    fn objectives(&self) -> usize {
        2
    }
    fn meta_tasks(&self) -> usize {
        3
    }
    fn evaluate(&self, task: TaskIndex, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != 1 {
            return invalid("sinusoidal is one-dimensional");
        }
        let x = SIN_DOMAIN.0 + u[0] * (SIN_DOMAIN.1 - SIN_DOMAIN.0);
        (0..2).map(|o| sinusoidal_eval(task, o, x).map(|v| -v)).collect()
    }
    fn reference_point(&self) -> Vec<f64> {
        vec![-1.0; 2]
    }
}

#[derive(Debug, Clone)]
pub struct Hartmann6 {
    pub instance: HartmannInstance,
}

impl Benchmark for Hartmann6 {
    fn name(&self) -> String {
        format!("hartmann6:M={},O={}", self.instance.meta_tasks(), self.instance.objectives())
    }
    fn dim(&self) -> usize {
        6
    }
    fn objectives(&self) -> usize {
        self.instance.objectives()
    }
    fn meta_tasks(&self) -> usize {
        self.instance.meta_tasks()
    }
    fn evaluate(&self, task: TaskIndex, u: &[f64]) -> Result<Vec<f64>> {
        (0..self.objectives()).map(|o| hartmann_eval(&self.instance, task, o, u).map(|v| -v)).collect()
    }
    fn reference_point(&self) -> Vec<f64> {
        vec![0.0; self.objectives()]
    }
}

/// Parsed benchmark identity string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkId {
    Sinusoidal { n_meta: usize },
    Hartmann6 { meta_tasks: usize, objectives: usize, n_meta: usize },
}

impl BenchmarkId {
    pub fn n_meta(&self) -> usize {
        match *self {
            BenchmarkId::Sinusoidal { n_meta } | BenchmarkId::Hartmann6 { n_meta, .. } => n_meta,
        }
    }

    pub fn build(&self, seed: u64) -> Result<Box<dyn Benchmark>> {
        Ok(match *self {
            BenchmarkId::Sinusoidal { .. } => Box::new(Sinusoidal),
            BenchmarkId::Hartmann6 { meta_tasks, objectives, .. } => {
                Box::new(Hartmann6 { instance: make_hartmann(meta_tasks, objectives, seed)? })
            }
        })
    }
}

impl std::fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchmarkId::Sinusoidal { .. } => write!(f, "sinusoidal"),
            BenchmarkId::Hartmann6 { meta_tasks, objectives, n_meta } => {
                write!(f, "hartmann6:M={meta_tasks},O={objectives},n_meta={n_meta}")
            }
        }
    }
}

/// Accepts `sinusoidal` or `hartmann6[:M=..,O=..,n_meta=..]` (keys optional).
pub fn parse_benchmark(s: &str) -> Result<BenchmarkId> {
    let s = s.trim();
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    let mut m = HARTMANN_DEFAULT_META;
    let mut o = 2;
    let mut n = DEFAULT_META_POINTS;
    for kv in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| SmogError::Parse(format!("expected key=value in benchmark id, got {kv:?}")))?;
        let v: usize = v.trim().parse().map_err(|_| SmogError::Parse(format!("bad integer in {kv:?}")))?;
        match k.trim() {
            "M" => m = v,
            "O" => o = v,
            "n_meta" => n = v,
            other => return Err(SmogError::Parse(format!("unknown benchmark key {other:?}"))),
        }
    }
    if n == 0 {
        return Err(SmogError::Parse("n_meta must be positive".into()));
    }
    match name {
        "sinusoidal" if args.split(',').all(|p| p.trim().is_empty() || p.trim().starts_with("n_meta")) => {
            Ok(BenchmarkId::Sinusoidal { n_meta: n })
        }
        "sinusoidal" => Err(SmogError::Parse("sinusoidal only accepts n_meta".into())),
        "hartmann6" if m >= 1 && o >= 1 => Ok(BenchmarkId::Hartmann6 { meta_tasks: m, objectives: o, n_meta: n }),
        "hartmann6" => Err(SmogError::Parse("hartmann6 needs M >= 1 and O >= 1".into())),
        other => Err(SmogError::Parse(format!("unknown benchmark {other:?}"))),
    }
}

/// Uniform metadata for every meta task of `bench`, with optional Gaussian noise.
pub fn sample_meta_data(bench: &dyn Benchmark, n_per_task: usize, noise_std: f64, seed: u64) -> Result<Vec<MultiOutputDataset>> {
    if n_per_task == 0 {
        return invalid("n_per_task must be positive");
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return invalid("noise_std must be finite and non-negative");
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..bench.meta_tasks())
        .map(|m| {
            let mut rng = rng_for(seed, &[purpose::META_DATA, m as u64]);
            let mut noise_rng = rng_for(seed, &[purpose::META_DATA, m as u64, 1]);
            let mut xs = Vec::with_capacity(n_per_task);
            let mut ys = Vec::with_capacity(n_per_task);
            for _ in 0..n_per_task {
                let x: Vec<f64> = (0..bench.dim()).map(|_| rng.random::<f64>()).collect();
                let mut y = bench.evaluate(TaskIndex::Meta(m), &x)?;
                if noise_std > 0.0 {
                    y.iter_mut().for_each(|v| *v += noise_std * normal.sample(&mut noise_rng));
                }
                xs.push(x);
                ys.push(y);
            }
            MultiOutputDataset::new(bench.dim(), bench.objectives(), xs, ys)
        })
        .collect()
}
