//! Browser demo on top of `smog-core`.
//!
//! The plain Rust API (`try_*` and the `*_native` helpers) is what the tests
//! exercise; the `wasm_bindgen` wrappers only translate errors to JS.

use std::sync::Arc;

use nalgebra::DVector;
use smog_core::benchmarks::{sample_meta_data, Benchmark, Sinusoidal};
use smog_core::gp::{fit, sample_posterior, GpSpec, KernelSpec, NoiseKind, PosteriorLayout, PriorSet};
use smog_core::kernels::{EquicorrelatedTaskParams, Matern52Params};
use smog_core::mobo::{dominates, hypervolume};
use smog_core::seeding::derive_seed;
use smog_core::smog::{fit_meta_tasks, MetaTaskModel, SmogConfig, TaskIndex};
use smog_core::{AugmentedInput, FittedGP, MultiOutputDataset, MultiOutputKernel, PosteriorGaussian, SmogModel};
use wasm_bindgen::prelude::*;

/// Columns per grid point returned by [`SinusoidalDemo::curves`]:
/// `u, truth0, truth1`, then `mean0, sd0, mean1, sd1` for SMOG and for ind-gp.
pub const CURVE_COLUMNS: usize = 11;

fn js(e: smog_core::SmogError) -> JsError {
    JsError::new(&e.to_string())
}

/// The sinusoidal transfer problem: SMOG with three fitted meta tasks against
/// independent GPs, both refit after every observation.
#[wasm_bindgen]
pub struct SinusoidalDemo {
    meta: Vec<Arc<MetaTaskModel>>,
    cfg: SmogConfig,
    seed: u64,
    data: MultiOutputDataset,
    smog: SmogModel,
    ind: Vec<FittedGP>,
}

fn ind_specs() -> GpSpec {
    GpSpec::new(KernelSpec::Independent { dim: 1, objectives: 1 }, NoiseKind::PerObjective, PriorSet::standard())
}

/// Concatenated means and standard deviations of `parts`.
fn moments(parts: &[PosteriorGaussian]) -> (Vec<f64>, Vec<f64>) {
    let mean = parts.iter().flat_map(|p| p.mean.iter().copied()).collect();
    let sd = parts.iter().flat_map(|p| p.variance().iter().map(|v| v.max(0.0).sqrt()).collect::<Vec<_>>()).collect();
    (mean, sd)
}

impl SinusoidalDemo {
    /// Meta data are `meta_points` noise-free samples per source task.
    pub fn try_new(seed: u64, meta_points: usize) -> smog_core::Result<Self> {
        // Fewer restarts than the experiment defaults keep a click under a second.
        let cfg = SmogConfig { meta_restarts: 4, target_restarts: 4, ..SmogConfig::default() };
        let meta_data = sample_meta_data(&Sinusoidal, meta_points, 0.0, seed)?;
        let report = fit_meta_tasks(&meta_data, &cfg, seed);
        if let Some(f) = report.failures.first() {
            return Err(smog_core::SmogError::Numerical(format!("meta task {} did not fit: {}", f.index, f.error)));
        }
        let meta: Vec<_> = report.models.into_iter().map(Arc::new).collect();
        let smog = SmogModel::initial(meta.clone(), 1, 2, &cfg, seed)?;
        let empty = MultiOutputDataset::empty(1, 1);
        let prior = fit(&ind_specs(), &empty, 1, 0)?;
        Ok(Self { meta, cfg, seed, data: MultiOutputDataset::empty(1, 2), smog, ind: vec![prior.clone(), prior] })
    }

    /// Observes the target at unit coordinate `u` and refits both models.
    pub fn try_observe(&mut self, u: f64) -> smog_core::Result<()> {
        let u = u.clamp(0.0, 1.0);
        let y = Sinusoidal.evaluate(TaskIndex::Target, &[u])?;
        self.data.push(vec![u], y)?;
        let step = derive_seed(self.seed, &[self.data.len() as u64]);
        self.smog = self.smog.fit_target(self.data.clone(), &self.cfg, step)?;
        self.ind = (0..2)
            .map(|o| fit(&ind_specs(), &self.data.objective(o)?, self.cfg.target_restarts, derive_seed(step, &[o as u64])))
            .collect::<smog_core::Result<_>>()?;
        Ok(())
    }

    /// `n` grid rows of [`CURVE_COLUMNS`] values, row-major.
    pub fn try_curves(&self, n: usize) -> smog_core::Result<Vec<f64>> {
        let n = n.max(2);
        let grid: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let s = self.smog.posterior_points(&grid)?;
        let (sm, ss) = moments(std::slice::from_ref(&s));
        let parts = self.ind.iter().map(|g| g.posterior_points(&grid)).collect::<smog_core::Result<Vec<_>>>()?;
        let (im, is) = moments(&parts);
        let mut out = Vec::with_capacity(n * CURVE_COLUMNS);
        for (i, x) in grid.iter().enumerate() {
            let t = Sinusoidal.evaluate(TaskIndex::Target, x)?;
            out.extend([x[0], t[0], t[1]]);
            out.extend([sm[i], ss[i], sm[n + i], ss[n + i]]);
            out.extend([im[i], is[i], im[n + i], is[n + i]]);
        }
        Ok(out)
    }

    pub fn meta_tasks(&self) -> usize {
        self.meta.len()
    }
}

#[wasm_bindgen]
impl SinusoidalDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, meta_points: usize) -> Result<SinusoidalDemo, JsError> {
        Self::try_new(seed as u64, meta_points).map_err(js)
    }

    pub fn observe(&mut self, u: f64) -> Result<(), JsError> {
        self.try_observe(u).map_err(js)
    }

    pub fn curves(&self, n: usize) -> Result<Vec<f64>, JsError> {
        self.try_curves(n).map_err(js)
    }

    /// Flat `u, y0, y1` triples of the target observations.
    pub fn observations(&self) -> Vec<f64> {
        self.data.inputs().iter().zip(self.data.outputs()).flat_map(|(x, y)| [x[0], y[0], y[1]]).collect()
    }

    /// Transfer weights, meta-task-major (`w[m * 2 + o]`).
    pub fn weights(&self) -> Vec<f64> {
        let w = self.smog.weights();
        (0..w.meta_tasks()).flat_map(|m| (0..2).map(move |o| w.get(m, o))).collect()
    }

    pub fn reset(&mut self) -> Result<(), JsError> {
        self.data = MultiOutputDataset::empty(1, 2);
        self.smog = SmogModel::initial(self.meta.clone(), 1, 2, &self.cfg, self.seed).map_err(js)?;
        let prior = fit(&ind_specs(), &MultiOutputDataset::empty(1, 1), 1, 0).map_err(js)?;
        self.ind = vec![prior.clone(), prior];
        Ok(())
    }
}

/// For flat 2-D points (maximized) returns `[hv, on_front_0, contribution_0, ...]`,
/// where the contribution is the hypervolume lost by removing that point.
pub fn pareto_summary_native(points: &[f64], reference: &[f64]) -> smog_core::Result<Vec<f64>> {
    if reference.len() != 2 || points.len() % 2 != 0 {
        return Err(smog_core::SmogError::InvalidArgument("expected flat 2-D points and a 2-D reference".into()));
    }
    let pts: Vec<Vec<f64>> = points.chunks(2).map(|c| c.to_vec()).collect();
    let hv = hypervolume(&pts, reference)?;
    let mut out = vec![hv];
    for (i, p) in pts.iter().enumerate() {
        let on_front = !pts.iter().any(|q| dominates(q, p));
        let rest: Vec<Vec<f64>> = pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q.clone()).collect();
        let contribution = if on_front { hv - hypervolume(&rest, reference)? } else { 0.0 };
        out.extend([on_front as u8 as f64, contribution.max(0.0)]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn pareto_summary(points: Vec<f64>, reference: Vec<f64>) -> Result<Vec<f64>, JsError> {
    pareto_summary_native(&points, &reference).map_err(js)
}

/// `count` joint draws over a `grid`-point line from the separable prior with
/// unit scales and correlation `rho`. Row-major, each row objective-major.
pub fn prior_samples_native(rho: f64, lengthscale: f64, grid: usize, count: usize, seed: u64) -> smog_core::Result<Vec<f64>> {
    let kernel = MultiOutputKernel::separable(
        Matern52Params::isotropic(1, lengthscale)?,
        EquicorrelatedTaskParams::new(vec![1.0, 1.0], rho)?,
    )?;
    let points: Vec<Vec<f64>> = (0..grid.max(2)).map(|i| vec![i as f64 / (grid.max(2) - 1) as f64]).collect();
    let q = AugmentedInput::stack(&points, 2);
    let cov = kernel.gram_aug(&q, &q);
    let layout = PosteriorLayout::ObjectiveMajor { points: points.len(), objectives: 2 };
    let prior = PosteriorGaussian::new(DVector::zeros(q.len()), cov, layout);
    let draws = sample_posterior(&prior, count, seed)?;
    Ok(draws.transpose().as_slice().to_vec())
}

#[wasm_bindgen]
pub fn prior_samples(rho: f64, lengthscale: f64, grid: usize, count: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    prior_samples_native(rho, lengthscale, grid, count, seed as u64).map_err(js)
}
