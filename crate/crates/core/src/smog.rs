//! The SMOG model: independent meta-task GPs whose cached posteriors, scaled
//! by learned transfer weights, form the prior of the target-task GP.
//!
//! Everything here works in model units. Meta GPs standardize their own
//! outputs (when configured to), and the target GP standardizes the target
//! observations; the weights absorb the remaining scale differences.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::benchmarks::{make_hartmann, sample_meta_data, Benchmark, Hartmann6};
use crate::error::{invalid, Result, SmogError};
use crate::gp::params::{kernel_log_prior, noise_log_prior};
use crate::linalg::JITTER_LADDER;
use crate::gp::{
    fit, persist, FittedGP, GaussianConditioner, GpSpec, KernelSpec, MultiOutputDataset, NoiseKind, NoiseModel,
    PosteriorGaussian, PosteriorLayout, PriorSet, Standardization,
};
use crate::kernels::{AugmentedInput, CoregionalizationBlock, MultiOutputKernel};
use crate::optim::{ascend_multistart, AscentConfig};
use crate::seeding::{derive_seed, purpose, rng_for};

/// A task in the joint model: one of the meta tasks or the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskIndex {
    Meta(usize),
    Target,
}

/// Fitting options for meta and target GPs.
#[derive(Debug, Clone, PartialEq)]
pub struct SmogConfig {
    pub meta_restarts: usize,
    pub target_restarts: usize,
    pub meta_priors: PriorSet,
    pub residual_priors: PriorSet,
    pub standardize: bool,
    pub ascent: AscentConfig,
}

impl Default for SmogConfig {
    fn default() -> Self {
        Self {
            meta_restarts: 8,
            target_restarts: 16,
            meta_priors: PriorSet::standard(),
            residual_priors: PriorSet::residual(),
            standardize: true,
            ascent: AscentConfig::default(),
        }
    }
}

impl SmogConfig {
    pub fn meta_spec(&self, dim: usize, objectives: usize) -> GpSpec {
        GpSpec {
            kernel: KernelSpec::Separable { dim, objectives },
            noise: NoiseKind::Global,
            priors: self.meta_priors.clone(),
            standardize: self.standardize,
            ascent: self.ascent.clone(),
        }
    }
}

/// Meta posterior moments at a fixed query list, plus the whitened
/// cross-covariance `L⁻¹ K(X_m, Q)` needed to form cross terms later.
#[derive(Debug, Clone)]
pub struct MetaCache {
    key: u64,
    query: Vec<AugmentedInput>,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    whitened: Option<DMatrix<f64>>,
}

fn query_key(q: &[AugmentedInput]) -> u64 {
    let mut h = DefaultHasher::new();
    q.len().hash(&mut h);
    for a in q {
        a.objective.hash(&mut h);
        for v in &a.x {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

/// A fitted meta-task GP with a cache of its posterior at the target inputs.
#[derive(Debug)]
pub struct MetaTaskModel {
    index: usize,
    gp: FittedGP,
    cache: Mutex<Option<Arc<MetaCache>>>,
    evaluations: AtomicU64,
}

impl Clone for MetaTaskModel {
    fn clone(&self) -> Self {
        Self {
            index: self.index,
            gp: self.gp.clone(),
            cache: Mutex::new(self.cache.lock().expect("cache lock").clone()),
            evaluations: AtomicU64::new(self.evaluations()),
        }
    }
}

impl MetaTaskModel {
    pub fn new(index: usize, gp: FittedGP) -> Self {
        Self { index, gp, cache: Mutex::new(None), evaluations: AtomicU64::new(0) }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn gp(&self) -> &FittedGP {
        &self.gp
    }

    /// Number of posterior computations performed for the cache so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Replaces the fitted GP and drops any cached values.
    pub fn refit(&mut self, gp: FittedGP) {
        self.gp = gp;
        *self.cache.get_mut().expect("cache lock") = None;
    }

    pub fn clear_cache(&self) {
        *self.cache.lock().expect("cache lock") = None;
    }

    fn compute(&self, q: &[AugmentedInput]) -> Result<MetaCache> {
        let post = self.gp.posterior_model(q)?;
        Ok(MetaCache {
            key: query_key(q),
            query: q.to_vec(),
            mean: post.mean,
            covariance: post.covariance,
            whitened: self.gp.whitened_cross(q),
        })
    }

    /// Posterior mean and covariance at `q`, reusing the cache when `q` is unchanged.
    pub fn cache_at(&self, q: &[AugmentedInput]) -> Result<Arc<MetaCache>> {
        let key = query_key(q);
        let mut slot = self.cache.lock().expect("cache lock");
        if let Some(c) = slot.as_ref() {
            if c.key == key && c.query == q {
                return Ok(Arc::clone(c));
            }
        }
        let fresh = Arc::new(self.compute(q)?);
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        *slot = Some(Arc::clone(&fresh));
        Ok(fresh)
    }

    /// Posterior moments at `q` plus the posterior cross-covariance `k̂(cache.query, q)`.
    fn moments_against(&self, cache: &MetaCache, q: &[AugmentedInput]) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        let k = self.gp.kernel();
        let prior_qq = k.gram_aug(q, q);
        let prior_cq = k.gram_aug(&cache.query, q);
        match self.gp.conditioner() {
            None => (DVector::zeros(q.len()), prior_qq, prior_cq),
            Some(c) => {
                let cross = k.cross_points(self.gp.data().inputs(), q);
                let vq = c.cholesky().solve_lower(&cross);
                let mean = cross.transpose() * c.alpha();
                let cov = prior_qq - vq.transpose() * &vq;
                let vc = cache.whitened.as_ref().expect("conditioned meta model caches its whitened cross");
                (mean, cov, prior_cq - vc.transpose() * vq)
            }
        }
    }
}

/// Per-task fit failure reported by [`fit_meta_tasks`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFitFailure {
    pub index: usize,
    pub error: SmogError,
}

#[derive(Debug, Clone, Default)]
pub struct MetaFitReport {
    pub models: Vec<MetaTaskModel>,
    pub failures: Vec<MetaFitFailure>,
}

fn fit_one(i: usize, d: &MultiOutputDataset, cfg: &SmogConfig, seed: u64) -> Result<MetaTaskModel> {
    if d.is_empty() {
        return invalid(format!("meta dataset {i} is empty"));
    }
    let spec = cfg.meta_spec(d.dim(), d.objectives());
    let gp = fit(&spec, d, cfg.meta_restarts, derive_seed(seed, &[purpose::META_TASK, i as u64]))?;
    Ok(MetaTaskModel::new(i, gp))
}

/// Fits every meta task independently. Tasks that fail are left out and listed in the report.
pub fn fit_meta_tasks(meta_data: &[MultiOutputDataset], cfg: &SmogConfig, seed: u64) -> MetaFitReport {
    #[cfg(feature = "parallel")]
    let results: Vec<Result<MetaTaskModel>> = {
        use rayon::prelude::*;
        meta_data.par_iter().enumerate().map(|(i, d)| fit_one(i, d, cfg, seed)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<MetaTaskModel>> =
        meta_data.iter().enumerate().map(|(i, d)| fit_one(i, d, cfg, seed)).collect();

    let mut report = MetaFitReport::default();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(m) => report.models.push(m),
            Err(error) => report.failures.push(MetaFitFailure { index, error }),
        }
    }
    report
}

/// Writes each model to `<dir>/meta/<task_index>.smogmeta`.
pub fn save_meta_models(dir: &Path, models: &[MetaTaskModel]) -> Result<()> {
    let meta = dir.join("meta");
    std::fs::create_dir_all(&meta).map_err(|e| SmogError::State(format!("{}: {e}", meta.display())))?;
    for m in models {
        let path = meta.join(format!("{}.smogmeta", m.index));
        persist::write_file(m.gp(), &path).map_err(|e| SmogError::State(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Loads every `<dir>/meta/<task_index>.smogmeta`, ordered by task index.
pub fn load_meta_models(dir: &Path) -> Result<Vec<MetaTaskModel>> {
    let meta = dir.join("meta");
    let entries = std::fs::read_dir(&meta).map_err(|e| SmogError::State(format!("{}: {e}", meta.display())))?;
    let mut found = Vec::new();
    for e in entries {
        let path = e.map_err(|e| SmogError::State(e.to_string()))?.path();
        if path.extension().and_then(|s| s.to_str()) != Some("smogmeta") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let index: usize =
            stem.parse().map_err(|_| SmogError::Parse(format!("unexpected meta file {}", path.display())))?;
        found.push((index, path));
    }
    found.sort();
    found.into_iter().map(|(i, p)| Ok(MetaTaskModel::new(i, persist::read_file(&p)?))).collect()
}

/// Transfer weights `w_{mo}`, one row per meta task.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferWeights {
    values: DMatrix<f64>,
}

impl TransferWeights {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("transfer weights must be finite");
        }
        Ok(Self { values })
    }

    pub fn zeros(meta_tasks: usize, objectives: usize) -> Self {
        Self { values: DMatrix::zeros(meta_tasks, objectives) }
    }

    pub fn from_fn(meta_tasks: usize, objectives: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(meta_tasks, objectives, f))
    }

    /// `0.5 + U(-0.1, 0.1)` per entry, from the stream of restart `r`.
    pub fn initial(meta_tasks: usize, objectives: usize, seed: u64, r: usize) -> Self {
        let mut rng = rng_for(seed, &[purpose::WEIGHT_INIT, r as u64]);
        Self { values: DMatrix::from_fn(meta_tasks, objectives, |_, _| 0.5 + rng.random_range(-0.1..0.1)) }
    }

    pub fn get(&self, m: usize, o: usize) -> f64 {
        self.values[(m, o)]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn meta_tasks(&self) -> usize {
        self.values.nrows()
    }

    pub fn objectives(&self) -> usize {
        self.values.ncols()
    }

    fn row_scales(&self, m: usize, q: &[AugmentedInput]) -> DVector<f64> {
        DVector::from_iterator(q.len(), q.iter().map(|a| self.values[(m, a.objective)]))
    }
}

/// Conditioning results for the current target dataset.
#[derive(Debug, Clone)]
struct TargetState {
    query: Vec<AugmentedInput>,
    transform: Standardization,
    caches: Vec<Arc<MetaCache>>,
    conditioner: GaussianConditioner,
}

/// Meta models, transfer weights, residual kernel and global noise.
#[derive(Debug, Clone)]
pub struct SmogModel {
    dim: usize,
    objectives: usize,
    meta: Vec<Arc<MetaTaskModel>>,
    weights: TransferWeights,
    residual: MultiOutputKernel,
    noise: f64,
    standardize: bool,
    target: MultiOutputDataset,
    state: Option<TargetState>,
}

/// `d_a K d_bᵀ` with `d` given as row scale vectors.
fn scale_rows_cols(k: &DMatrix<f64>, da: &DVector<f64>, db: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| da[i] * k[(i, j)] * db[j])
}

impl SmogModel {
    /// Assembles a model from fitted meta tasks and explicit target hyperparameters.
    pub fn new(
        meta: Vec<Arc<MetaTaskModel>>,
        weights: TransferWeights,
        residual: MultiOutputKernel,
        noise: f64,
        standardize: bool,
    ) -> Result<Self> {
        let (dim, objectives) = (residual.dim(), residual.objectives());
        if weights.meta_tasks() != meta.len() || weights.objectives() != objectives {
            return invalid(format!(
                "weights are {}x{} but there are {} meta tasks and {objectives} objectives",
                weights.meta_tasks(),
                weights.objectives(),
                meta.len()
            ));
        }
        if let Some(m) = meta.iter().find(|m| m.gp.dim() != dim || m.gp.objectives() != objectives) {
            return invalid(format!("meta task {} does not match the residual kernel shape", m.index));
        }
        NoiseModel::Global(noise).validate(objectives)?;
        Ok(Self {
            dim,
            objectives,
            meta,
            weights,
            residual,
            noise,
            standardize,
            target: MultiOutputDataset::empty(dim, objectives),
            state: None,
        })
    }

    /// Model with residual hyperparameters at their prior modes and the restart-0 weights.
    pub fn initial(meta: Vec<Arc<MetaTaskModel>>, dim: usize, objectives: usize, cfg: &SmogConfig, seed: u64) -> Result<Self> {
        let spec = KernelSpec::Separable { dim, objectives };
        let residual = spec.unpack(&spec.mode(&cfg.residual_priors))?;
        let noise = match NoiseKind::Global.unpack(&NoiseKind::Global.mode(objectives, &cfg.residual_priors)) {
            NoiseModel::Global(s) => s,
            NoiseModel::PerObjective(_) => unreachable!("global noise unpacks to one value"),
        };
        let weights = TransferWeights::initial(meta.len(), objectives, seed, 0);
        Self::new(meta, weights, residual, noise, cfg.standardize)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objectives(&self) -> usize {
        self.objectives
    }

    pub fn meta_models(&self) -> &[Arc<MetaTaskModel>] {
        &self.meta
    }

    pub fn weights(&self) -> &TransferWeights {
        &self.weights
    }

    pub fn residual(&self) -> &MultiOutputKernel {
        &self.residual
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn target_data(&self) -> &MultiOutputDataset {
        &self.target
    }

    fn check(&self, q: &[AugmentedInput]) -> Result<()> {
        q.iter().try_for_each(|a| self.residual.validate(a))
    }

    /// Prior mean and covariance over the list `q`.
    pub fn prior_moments(&self, q: &[AugmentedInput]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check(q)?;
        let mut mean = DVector::zeros(q.len());
        let mut cov = self.residual.gram_aug(q, q);
        for (m, meta) in self.meta.iter().enumerate() {
            let d = self.weights.row_scales(m, q);
            let p = meta.gp.posterior_model(q)?;
            mean += p.mean.component_mul(&d);
            cov += scale_rows_cols(&p.covariance, &d, &d);
        }
        Ok((mean, cov))
    }

    /// Prior mean at `a` and prior covariance between `a` and `b`.
    pub fn target_prior(&self, a: &AugmentedInput, b: &AugmentedInput) -> Result<(f64, f64)> {
        let (mean, cov) = self.prior_moments(&[a.clone(), b.clone()])?;
        Ok((mean[0], cov[(0, 1)]))
    }

    /// Caches meta posteriors at the target inputs and factorizes the target Gram.
    pub fn condition(&self, data: MultiOutputDataset) -> Result<SmogModel> {
        if data.dim() != self.dim || data.objectives() != self.objectives {
            return invalid("target data shape does not match the model");
        }
        let mut out = self.clone();
        out.state = None;
        if !data.is_empty() {
            let query = AugmentedInput::stack(data.inputs(), self.objectives);
            let caches = self.meta.iter().map(|m| m.cache_at(&query)).collect::<Result<Vec<_>>>()?;
            let transform = self.transform_for(&data);
            let y = transform.apply_dataset(&data).stacked_outputs();
            let (prior_mean, prior_cov) = assemble(&self.residual, &self.weights, &caches, &query);
            let conditioner = GaussianConditioner::new(prior_cov, &vec![self.noise; query.len()], y - prior_mean)?;
            out.state = Some(TargetState { query, transform, caches, conditioner });
        }
        out.target = data;
        Ok(out)
    }

    fn transform_for(&self, data: &MultiOutputDataset) -> Standardization {
        if self.standardize {
            Standardization::fit(data.outputs(), self.objectives)
        } else {
            Standardization::identity(self.objectives)
        }
    }

    /// Target log marginal likelihood of the conditioned data (0 without data).
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.state.as_ref().map_or(0.0, |s| s.conditioner.log_marginal_likelihood())
    }

    /// Posterior in model units over the list `q`.
    pub fn posterior_model(&self, q: &[AugmentedInput]) -> Result<PosteriorGaussian> {
        if q.is_empty() {
            return invalid("posterior query must be non-empty");
        }
        self.check(q)?;
        let Some(state) = &self.state else {
            let (mean, cov) = self.prior_moments(q)?;
            return Ok(PosteriorGaussian::new(mean, cov, PosteriorLayout::QueryOrder));
        };
        let mut mean = DVector::zeros(q.len());
        let mut cov = self.residual.gram_aug(q, q);
        let mut cross = self.residual.gram_aug(&state.query, q);
        for (m, (meta, cache)) in self.meta.iter().zip(&state.caches).enumerate() {
            let dq = self.weights.row_scales(m, q);
            let dt = self.weights.row_scales(m, &state.query);
            let (mq, kqq, ktq) = meta.moments_against(cache, q);
            mean += mq.component_mul(&dq);
            cov += scale_rows_cols(&kqq, &dq, &dq);
            cross += scale_rows_cols(&ktq, &dt, &dq);
        }
        let (mean, cov) = state.conditioner.condition(mean, cov, &cross);
        Ok(PosteriorGaussian::new(mean, cov, PosteriorLayout::QueryOrder))
    }

    /// Posterior over `q` in the units of the target observations.
    pub fn smog_posterior(&self, q: &[AugmentedInput]) -> Result<PosteriorGaussian> {
        let p = self.posterior_model(q)?;
        Ok(match &self.state {
            Some(s) => s.transform.invert_posterior(&p, q),
            None => p,
        })
    }

    /// Posterior over every objective at each point, objective-major, in data units.
    pub fn posterior_points(&self, points: &[Vec<f64>]) -> Result<PosteriorGaussian> {
        let q = AugmentedInput::stack(points, self.objectives);
        let mut p = self.smog_posterior(&q)?;
        p.layout = PosteriorLayout::ObjectiveMajor { points: points.len(), objectives: self.objectives };
        Ok(p)
    }

    fn target_spec(&self) -> KernelSpec {
        KernelSpec::Separable { dim: self.dim, objectives: self.objectives }
    }

    fn pack(&self) -> Result<Vec<f64>> {
        let mut u = self.target_spec().pack(&self.residual)?;
        u.extend(NoiseKind::Global.pack(&NoiseModel::Global(self.noise))?);
        u.extend(self.weights.values.iter());
        Ok(u)
    }

    fn unpack(&self, u: &[f64]) -> Result<(MultiOutputKernel, f64, TransferWeights)> {
        let spec = self.target_spec();
        let nk = spec.n_params();
        let residual = spec.unpack(&u[..nk])?;
        let NoiseModel::Global(noise) = NoiseKind::Global.unpack(&u[nk..nk + 1]) else {
            unreachable!("global noise unpacks to one value")
        };
        let weights = TransferWeights {
            values: DMatrix::from_column_slice(self.meta.len(), self.objectives, &u[nk + 1..]),
        };
        Ok((residual, noise, weights))
    }

    /// Maximizes the target marginal likelihood plus residual hyperpriors over
    /// the residual kernel, the noise and all transfer weights. Meta models stay fixed.
    pub fn fit_target(&self, data: MultiOutputDataset, cfg: &SmogConfig, seed: u64) -> Result<SmogModel> {
        self.fit_target_inner(data, cfg, seed, false)
    }

    /// Like [`fit_target`](Self::fit_target), with the current hyperparameters as an extra first start.
    pub fn fit_target_warm(&self, data: MultiOutputDataset, cfg: &SmogConfig, seed: u64) -> Result<SmogModel> {
        self.fit_target_inner(data, cfg, seed, true)
    }

    fn fit_target_inner(&self, data: MultiOutputDataset, cfg: &SmogConfig, seed: u64, warm: bool) -> Result<SmogModel> {
        if cfg.target_restarts == 0 {
            return invalid("target_restarts must be positive");
        }
        if data.dim() != self.dim || data.objectives() != self.objectives {
            return invalid("target data shape does not match the model");
        }
        if data.is_empty() {
            return self.condition(data);
        }
        let query = AugmentedInput::stack(data.inputs(), self.objectives);
        let caches = self.meta.iter().map(|m| m.cache_at(&query)).collect::<Result<Vec<_>>>()?;
        let y = self.transform_for(&data).apply_dataset(&data).stacked_outputs();
        let priors = &cfg.residual_priors;
        let n = query.len();

        let objective = |u: &[f64]| -> f64 {
            let Ok((residual, noise, weights)) = self.unpack(u) else { return f64::NEG_INFINITY };
            let lp = kernel_log_prior(&residual, priors) + noise_log_prior(&NoiseModel::Global(noise), priors);
            if !lp.is_finite() {
                return f64::NEG_INFINITY;
            }
            let (mean, cov) = assemble(&residual, &weights, &caches, &query);
            match GaussianConditioner::new(cov, &vec![noise; n], &y - mean) {
                Ok(c) => c.log_marginal_likelihood() + lp,
                Err(_) => f64::NEG_INFINITY,
            }
        };

        let spec = self.target_spec();
        let mut starts = Vec::with_capacity(cfg.target_restarts + 1);
        if warm {
            starts.push(self.pack()?);
        }
        let fit_seed = derive_seed(seed, &[purpose::TARGET_FIT]);
        for r in 0..cfg.target_restarts {
            let mut u = if r == 0 {
                let mut u = spec.mode(priors);
                u.extend(NoiseKind::Global.mode(self.objectives, priors));
                u
            } else {
                let mut rng = rng_for(fit_seed, &[purpose::RESTART, r as u64]);
                let mut u = spec.sample(priors, &mut rng);
                u.extend(NoiseKind::Global.sample(self.objectives, priors, &mut rng));
                u
            };
            u.extend(TransferWeights::initial(self.meta.len(), self.objectives, fit_seed, r).values.iter());
            starts.push(u);
        }
        let mut f = objective;
        let best = ascend_multistart(&mut f, &starts, &cfg.ascent)
            .ok_or_else(|| SmogError::Numerical("every target restart failed to factorize".into()))?;
        let (residual, noise, weights) = self.unpack(&best.x)?;
        let mut out = self.clone();
        out.residual = residual;
        out.noise = noise;
        out.weights = weights;
        out.condition(data)
    }
}

/// Prior mean and covariance at the cached target inputs.
fn assemble(
    residual: &MultiOutputKernel,
    weights: &TransferWeights,
    caches: &[Arc<MetaCache>],
    query: &[AugmentedInput],
) -> (DVector<f64>, DMatrix<f64>) {
    let mut mean = DVector::zeros(query.len());
    let mut cov = residual.gram_aug(query, query);
    for (m, c) in caches.iter().enumerate() {
        let d = weights.row_scales(m, query);
        mean += c.mean.component_mul(&d);
        cov += scale_rows_cols(&c.covariance, &d, &d);
    }
    (mean, cov)
}

/// One index of the joint model: input, task and objective.
#[derive(Debug, Clone, PartialEq)]
pub struct JointIndex {
    pub x: Vec<f64>,
    pub task: TaskIndex,
    pub objective: usize,
}

/// The full joint kernel over all meta tasks and the target, built from
/// per-task kernels and the transfer weights.
#[derive(Debug, Clone)]
pub struct JointKernelOracle {
    pub meta_kernels: Vec<MultiOutputKernel>,
    pub target_kernel: MultiOutputKernel,
    pub weights: TransferWeights,
}

impl JointKernelOracle {
    pub fn from_model(model: &SmogModel) -> Self {
        Self {
            meta_kernels: model.meta.iter().map(|m| m.gp.kernel().clone()).collect(),
            target_kernel: model.residual.clone(),
            weights: model.weights.clone(),
        }
    }

    fn objectives(&self) -> usize {
        self.target_kernel.objectives()
    }

    /// `g_v(ν, o)`: 1 if `v = ν`, `w_{vo}` if `v` is a meta task and `ν` the target, else 0.
    fn g(&self, v: TaskIndex, nu: TaskIndex, o: usize) -> f64 {
        match (v, nu) {
            (a, b) if a == b => 1.0,
            (TaskIndex::Meta(m), TaskIndex::Target) => self.weights.get(m, o),
            _ => 0.0,
        }
    }

    fn check(&self, a: &JointIndex) -> Result<()> {
        if let TaskIndex::Meta(m) = a.task {
            if m >= self.meta_kernels.len() {
                return invalid(format!("meta task {m} out of range"));
            }
        }
        if a.objective >= self.objectives() || a.x.len() != self.target_kernel.dim() {
            return invalid("joint index has wrong objective or dimension");
        }
        Ok(())
    }
}

/// `Σ_v g_v(ν,o) g_v(ν',o') k_v[(x,o),(x',o')]` over all tasks `v`.
pub fn joint_kernel(oracle: &JointKernelOracle, a: &JointIndex, b: &JointIndex) -> Result<f64> {
    oracle.check(a)?;
    oracle.check(b)?;
    let (aa, bb) = (
        AugmentedInput { x: a.x.clone(), objective: a.objective },
        AugmentedInput { x: b.x.clone(), objective: b.objective },
    );
    let tasks = (0..oracle.meta_kernels.len()).map(TaskIndex::Meta).chain(std::iter::once(TaskIndex::Target));
    let mut total = 0.0;
    for v in tasks {
        let ga = oracle.g(v, a.task, a.objective);
        let gb = oracle.g(v, b.task, b.objective);
        if ga == 0.0 || gb == 0.0 {
            continue;
        }
        let k = match v {
            TaskIndex::Meta(m) => &oracle.meta_kernels[m],
            TaskIndex::Target => &oracle.target_kernel,
        };
        total += ga * gb * k.eval(&aa, &bb)?;
    }
    Ok(total)
}

pub fn joint_gram(oracle: &JointKernelOracle, idx: &[JointIndex]) -> Result<DMatrix<f64>> {
    let mut k = DMatrix::zeros(idx.len(), idx.len());
    for i in 0..idx.len() {
        for j in 0..=i {
            let v = joint_kernel(oracle, &idx[i], &idx[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `(M+1)O x (M+1)O` matrices `C_v = w_v w_vᵀ ⊠ H_v`, task-major ordering with the target last.
///
/// `blocks` holds one `O x O` matrix per meta task followed by the target's.
pub fn build_coregionalization_matrices(weights: &TransferWeights, blocks: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let (m, o) = (weights.meta_tasks(), weights.objectives());
    if blocks.len() != m + 1 {
        return invalid(format!("expected {} blocks, got {}", m + 1, blocks.len()));
    }
    let n = (m + 1) * o;
    blocks
        .iter()
        .enumerate()
        .map(|(v, h)| {
            if h.nrows() != o {
                return invalid(format!("block {v} is not {o}x{o}"));
            }
            let h = CoregionalizationBlock::new(h.clone())?;
            let mut w = DVector::zeros(n);
            for p in 0..o {
                w[v * o + p] = 1.0;
                if v < m {
                    w[m * o + p] = weights.get(v, p);
                }
            }
            Ok(DMatrix::from_fn(n, n, |i, j| w[i] * w[j] * h.matrix()[(i % o, j % o)]))
        })
        .collect()
}

fn meta_indices(meta_data: &[MultiOutputDataset]) -> (Vec<JointIndex>, DVector<f64>) {
    let mut idx = Vec::new();
    let mut y = Vec::new();
    for (m, d) in meta_data.iter().enumerate() {
        for o in 0..d.objectives() {
            for (x, row) in d.inputs().iter().zip(d.outputs()) {
                idx.push(JointIndex { x: x.clone(), task: TaskIndex::Meta(m), objective: o });
                y.push(row[o]);
            }
        }
    }
    (idx, DVector::from_vec(y))
}

const ORACLE_MAX_ROWS: usize = 200;

/// Dense Gaussian conditioning of the target slice with the modular path's
/// regularization: the first `meta_rows` training rows get the relative base
/// jitter on their own diagonal, the remaining (target) rows on the diagonal of
/// their Schur complement, which is the matrix the target Cholesky sees.
fn dense_condition(
    oracle: &JointKernelOracle,
    train: &[JointIndex],
    noise: &[f64],
    y: &DVector<f64>,
    query: &[JointIndex],
    meta_rows: usize,
) -> Result<PosteriorGaussian> {
    if train.len() > ORACLE_MAX_ROWS {
        return invalid(format!("oracle is limited to {ORACLE_MAX_ROWS} rows, got {}", train.len()));
    }
    let kqq = joint_gram(oracle, query)?;
    if train.is_empty() {
        return Ok(PosteriorGaussian::new(DVector::zeros(query.len()), kqq, PosteriorLayout::QueryOrder));
    }
    let mut a = joint_gram(oracle, train)?;
    for (i, s) in noise.iter().enumerate() {
        a[(i, i)] += s;
    }
    for i in 0..meta_rows {
        a[(i, i)] += JITTER_LADDER[0] * a[(i, i)].abs();
    }
    let n = a.nrows();
    if n > meta_rows {
        let tt = a.view((meta_rows, meta_rows), (n - meta_rows, n - meta_rows)).into_owned();
        let schur = if meta_rows == 0 {
            tt
        } else {
            let amm = a.view((0, 0), (meta_rows, meta_rows)).into_owned();
            let amt = a.view((0, meta_rows), (meta_rows, n - meta_rows)).into_owned();
            let inv = amm.lu().try_inverse().ok_or_else(|| SmogError::Numerical("dense meta Gram is singular".into()))?;
            tt - amt.transpose() * inv * amt
        };
        for i in 0..n - meta_rows {
            a[(meta_rows + i, meta_rows + i)] += JITTER_LADDER[0] * schur[(i, i)].abs();
        }
    }
    let inv = a.lu().try_inverse().ok_or_else(|| SmogError::Numerical("dense joint Gram is singular".into()))?;
    let mut kxq = DMatrix::zeros(train.len(), query.len());
    for i in 0..train.len() {
        for j in 0..query.len() {
            kxq[(i, j)] = joint_kernel(oracle, &train[i], &query[j])?;
        }
    }
    let mean = kxq.transpose() * &inv * y;
    let cov = kqq - kxq.transpose() * &inv * &kxq;
    Ok(PosteriorGaussian::new(mean, cov, PosteriorLayout::QueryOrder))
}

fn target_indices(query: &[AugmentedInput]) -> Vec<JointIndex> {
    query.iter().map(|a| JointIndex { x: a.x.clone(), task: TaskIndex::Target, objective: a.objective }).collect()
}

fn meta_noise_rows(train: &[JointIndex], meta_noise: &[f64]) -> Result<Vec<f64>> {
    train
        .iter()
        .map(|j| match j.task {
            TaskIndex::Meta(m) => meta_noise.get(m).copied().ok_or_else(|| SmogError::InvalidArgument(format!("no noise for meta task {m}"))),
            TaskIndex::Target => Ok(0.0),
        })
        .collect()
}

/// Test oracle: conditions the dense joint model on raw meta observations and
/// returns the target slice at `query`. `meta_noise[m]` is task m's noise variance.
pub fn oracle_condition_on_metadata(
    oracle: &JointKernelOracle,
    meta_data: &[MultiOutputDataset],
    meta_noise: &[f64],
    query: &[AugmentedInput],
) -> Result<PosteriorGaussian> {
    let (train, y) = meta_indices(meta_data);
    let noise = meta_noise_rows(&train, meta_noise)?;
    dense_condition(oracle, &train, &noise, &y, &target_indices(query), train.len())
}

/// Test oracle: conditions the dense joint model on meta and target observations.
pub fn oracle_condition_on_all(
    oracle: &JointKernelOracle,
    meta_data: &[MultiOutputDataset],
    meta_noise: &[f64],
    target: &MultiOutputDataset,
    target_noise: f64,
    query: &[AugmentedInput],
) -> Result<PosteriorGaussian> {
    let (mut train, y_meta) = meta_indices(meta_data);
    let n_meta = train.len();
    let mut noise = meta_noise_rows(&train, meta_noise)?;
    let t_aug = AugmentedInput::stack(target.inputs(), target.objectives());
    train.extend(target_indices(&t_aug));
    noise.extend(std::iter::repeat_n(target_noise, t_aug.len()));
    let y = DVector::from_iterator(train.len(), y_meta.iter().copied().chain(target.stacked_outputs().iter().copied()));
    dense_condition(oracle, &train, &noise, &y, &target_indices(query), n_meta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub meta_tasks: usize,
    /// Time to cache every meta posterior at the target inputs.
    pub prior_seconds: f64,
    pub fit_seconds: f64,
}

impl TimingRow {
    pub fn total(&self) -> f64 {
        self.prior_seconds + self.fit_seconds
    }
}

/// Wall time of prior construction and target fitting on Hartmann6 for each
/// meta-task count, keeping the fastest of `repetitions` runs. Meta fits are
/// done up front and not timed.
pub fn timing_probe(
    meta_counts: &[usize],
    n_meta: usize,
    n_target: usize,
    objectives: usize,
    cfg: &SmogConfig,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &m in meta_counts {
        let (models, target) = if m == 0 {
            let inst = make_hartmann(1, objectives, seed)?;
            (Vec::new(), Hartmann6 { instance: inst })
        } else {
            let bench = Hartmann6 { instance: make_hartmann(m, objectives, seed)? };
            let data = sample_meta_data(&bench, n_meta, 0.0, seed)?;
            let report = fit_meta_tasks(&data, cfg, seed);
            (report.models.into_iter().map(Arc::new).collect::<Vec<_>>(), bench)
        };
        let mut rng = rng_for(seed, &[purpose::BO_INITIAL, m as u64]);
        let mut tdata = MultiOutputDataset::empty(6, objectives);
        for _ in 0..n_target {
            let x: Vec<f64> = (0..6).map(|_| rng.random()).collect();
            let y = target.evaluate(TaskIndex::Target, &x)?;
            tdata.push(x, y)?;
        }
        let base = SmogModel::initial(models.clone(), 6, objectives, cfg, seed)?;
        let query = AugmentedInput::stack(tdata.inputs(), objectives);
        let mut best: Option<TimingRow> = None;
        for _ in 0..repetitions.max(1) {
            models.iter().for_each(|mm| mm.clear_cache());
            let t0 = Instant::now();
            for mm in &models {
                mm.cache_at(&query)?;
            }
            let prior_seconds = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            base.fit_target(tdata.clone(), cfg, seed)?;
            let row = TimingRow { meta_tasks: m, prior_seconds, fit_seconds: t1.elapsed().as_secs_f64() };
            if best.as_ref().is_none_or(|b| row.total() < b.total()) {
                best = Some(row);
            }
        }
        rows.push(best.expect("at least one repetition"));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests;
