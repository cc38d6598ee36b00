//! Exact multi-output GP regression over objective-augmented inputs.

mod fit;
pub mod params;
pub mod persist;
pub mod priors;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result, SmogError};
use crate::kernels::{AugmentedInput, MultiOutputKernel};
use crate::linalg::{jittered_cholesky, psd_factor, JitteredCholesky};
use crate::seeding::{purpose, rng_for};

pub use fit::{fit, fitted_objective, log_posterior_objective, GpSpec};
pub use params::{KernelSpec, NoiseKind};
pub use priors::{HyperPriorSpec, ParamGroup, PriorKind, PriorSet};

/// `N` points in `[0,1]^D` with all `O` objectives observed at each.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiOutputDataset {
    dim: usize,
    objectives: usize,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl MultiOutputDataset {
    pub fn new(dim: usize, objectives: usize, inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Result<Self> {
        if objectives == 0 || dim == 0 {
            return invalid("datasets need at least one input dimension and one objective");
        }
        if inputs.len() != outputs.len() {
            return invalid(format!("{} inputs but {} output rows", inputs.len(), outputs.len()));
        }
        for (x, y) in inputs.iter().zip(&outputs) {
            if x.len() != dim || y.len() != objectives {
                return invalid(format!("row shape ({}, {}) does not match ({dim}, {objectives})", x.len(), y.len()));
            }
            if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return invalid(format!("input outside the unit box: {x:?}"));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return invalid(format!("non-finite observation: {y:?}"));
            }
        }
        Ok(Self { dim, objectives, inputs, outputs })
    }

    pub fn empty(dim: usize, objectives: usize) -> Self {
        Self { dim, objectives, inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objectives(&self) -> usize {
        self.objectives
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    pub fn push(&mut self, x: Vec<f64>, y: Vec<f64>) -> Result<()> {
        let one = Self::new(self.dim, self.objectives, vec![x], vec![y])?;
        self.inputs.extend(one.inputs);
        self.outputs.extend(one.outputs);
        Ok(())
    }

    /// Observations stacked objective-major, matching [`AugmentedInput::stack`].
    pub fn stacked_outputs(&self) -> DVector<f64> {
        let n = self.len();
        DVector::from_fn(n * self.objectives, |r, _| self.outputs[r % n][r / n])
    }

    /// The single-objective dataset for objective `o`.
    pub fn objective(&self, o: usize) -> Result<Self> {
        if o >= self.objectives {
            return invalid(format!("objective {o} out of range"));
        }
        Ok(Self {
            dim: self.dim,
            objectives: 1,
            inputs: self.inputs.clone(),
            outputs: self.outputs.iter().map(|y| vec![y[o]]).collect(),
        })
    }

    pub fn map_outputs(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        Self {
            dim: self.dim,
            objectives: self.objectives,
            inputs: self.inputs.clone(),
            outputs: self.outputs.iter().map(|y| f(y)).collect(),
        }
    }
}

/// Per-objective affine output transform `(y - mean) / std`.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn identity(objectives: usize) -> Self {
        Self { means: vec![0.0; objectives], stds: vec![1.0; objectives] }
    }

    /// Sample mean and `N-1` standard deviation per column; the std falls back
    /// to 1 when `N <= 1` or the column is constant.
    pub fn fit(rows: &[Vec<f64>], objectives: usize) -> Self {
        let n = rows.len();
        let mut means = vec![0.0; objectives];
        let mut stds = vec![1.0; objectives];
        if n == 0 {
            return Self { means, stds };
        }
        for o in 0..objectives {
            let mean = rows.iter().map(|r| r[o]).sum::<f64>() / n as f64;
            means[o] = mean;
            if n > 1 {
                let var = rows.iter().map(|r| (r[o] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let sd = var.sqrt();
                if sd >= 1e-12 {
                    stds[o] = sd;
                }
            }
        }
        Self { means, stds }
    }

    pub fn is_identity(&self) -> bool {
        self.means.iter().all(|m| *m == 0.0) && self.stds.iter().all(|s| *s == 1.0)
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.means.iter().zip(&self.stds)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.means.iter().zip(&self.stds)).map(|(v, (m, s))| v * s + m).collect()
    }

    pub fn apply_dataset(&self, data: &MultiOutputDataset) -> MultiOutputDataset {
        data.map_outputs(|y| self.apply(y))
    }

    /// Maps a model-space posterior over `query` back to data units.
    pub fn invert_posterior(&self, post: &PosteriorGaussian, query: &[AugmentedInput]) -> PosteriorGaussian {
        if self.is_identity() {
            return post.clone();
        }
        let s: Vec<f64> = query.iter().map(|q| self.stds[q.objective]).collect();
        let mean = DVector::from_fn(query.len(), |i, _| post.mean[i] * s[i] + self.means[query[i].objective]);
        let covariance = DMatrix::from_fn(query.len(), query.len(), |i, j| post.covariance[(i, j)] * s[i] * s[j]);
        PosteriorGaussian { mean, covariance, layout: post.layout }
    }
}

/// Observation-noise variances.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    Global(f64),
    PerObjective(Vec<f64>),
}

impl NoiseModel {
    pub fn for_objective(&self, o: usize) -> f64 {
        match self {
            NoiseModel::Global(v) => *v,
            NoiseModel::PerObjective(v) => v[o],
        }
    }

    /// Objective-major diagonal for `n` points.
    pub fn diagonal(&self, n: usize, objectives: usize) -> Vec<f64> {
        (0..n * objectives).map(|r| self.for_objective(r / n.max(1))).collect()
    }

    pub fn validate(&self, objectives: usize) -> Result<()> {
        let vals: &[f64] = match self {
            NoiseModel::Global(v) => std::slice::from_ref(v),
            NoiseModel::PerObjective(v) => {
                if v.len() != objectives {
                    return invalid(format!("{} noise terms for {objectives} objectives", v.len()));
                }
                v
            }
        };
        if vals.iter().any(|v| !(v.is_finite() && *v >= priors::NOISE_FLOOR)) {
            return invalid(format!("noise must be at least {:e}, got {vals:?}", priors::NOISE_FLOOR));
        }
        Ok(())
    }
}

/// Row ordering of a posterior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosteriorLayout {
    /// Rows follow the query list as given.
    QueryOrder,
    /// Row `o * points + n` is point `n`, objective `o`.
    ObjectiveMajor { points: usize, objectives: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorGaussian {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub layout: PosteriorLayout,
}

impl PosteriorGaussian {
    /// Symmetrizes and clamps tiny negative variances to zero.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, layout: PosteriorLayout) -> Self {
        let mut covariance = (&covariance + covariance.transpose()) * 0.5;
        for i in 0..covariance.nrows() {
            if covariance[(i, i)] < 0.0 && covariance[(i, i)] >= -1e-8 {
                covariance[(i, i)] = 0.0;
            }
        }
        Self { mean, covariance, layout }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn variance(&self) -> DVector<f64> {
        self.covariance.diagonal()
    }
}

/// Cached solve of `(K + Σ) α = y - m` for Gaussian conditioning.
#[derive(Clone, Debug)]
pub struct GaussianConditioner {
    chol: JitteredCholesky,
    alpha: DVector<f64>,
    residual: DVector<f64>,
}

impl GaussianConditioner {
    /// `prior_cov` is the prior covariance at the training rows, `noise` its
    /// additive diagonal and `residual` the centred observations.
    pub fn new(prior_cov: DMatrix<f64>, noise: &[f64], residual: DVector<f64>) -> Result<Self> {
        let mut a = prior_cov;
        for (i, s) in noise.iter().enumerate() {
            a[(i, i)] += s;
        }
        let chol = jittered_cholesky(&a)?;
        let alpha = chol.solve_vec(&residual);
        Ok(Self { chol, alpha, residual })
    }

    pub fn rows(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn cholesky(&self) -> &JitteredCholesky {
        &self.chol
    }

    /// `-½ rᵀα - Σ log L_ii - (n/2) log 2π`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.rows() as f64;
        -0.5 * self.residual.dot(&self.alpha) - 0.5 * self.chol.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Posterior moments given prior mean/cov at the query and the training-query cross-covariance.
    pub fn condition(
        &self,
        prior_mean: DVector<f64>,
        prior_cov: DMatrix<f64>,
        cross: &DMatrix<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let mean = prior_mean + cross.transpose() * &self.alpha;
        let v = self.chol.solve_lower(cross);
        let cov = prior_cov - v.transpose() * &v;
        (mean, cov)
    }

    /// Posterior cross-covariance between two query sets.
    pub fn condition_cross(&self, prior_cov_ab: DMatrix<f64>, cross_a: &DMatrix<f64>, cross_b: &DMatrix<f64>) -> DMatrix<f64> {
        let va = self.chol.solve_lower(cross_a);
        let vb = self.chol.solve_lower(cross_b);
        prior_cov_ab - va.transpose() * vb
    }
}

/// A multi-output GP conditioned on its training data (possibly none).
#[derive(Clone, Debug)]
pub struct FittedGP {
    kernel: MultiOutputKernel,
    noise: NoiseModel,
    data: MultiOutputDataset,
    standardize: bool,
    transform: Standardization,
    conditioner: Option<GaussianConditioner>,
}

impl FittedGP {
    /// Conditions the zero-mean GP on `data`. With `standardize`, outputs are
    /// standardized per objective first and predictions mapped back.
    pub fn condition(
        kernel: MultiOutputKernel,
        noise: NoiseModel,
        data: MultiOutputDataset,
        standardize: bool,
    ) -> Result<Self> {
        let o = kernel.objectives();
        if data.objectives() != o {
            return invalid(format!("data has {} objectives but kernel has {o}", data.objectives()));
        }
        if data.dim() != kernel.dim() {
            return invalid(format!("data has dimension {} but kernel has {}", data.dim(), kernel.dim()));
        }
        noise.validate(o)?;
        let transform =
            if standardize { Standardization::fit(data.outputs(), o) } else { Standardization::identity(o) };
        let conditioner = if data.is_empty() {
            None
        } else {
            let y = transform.apply_dataset(&data).stacked_outputs();
            let k = kernel.gram_points(data.inputs());
            Some(GaussianConditioner::new(k, &noise.diagonal(data.len(), o), y)?)
        };
        Ok(Self { kernel, noise, data, standardize, transform, conditioner })
    }

    pub fn kernel(&self) -> &MultiOutputKernel {
        &self.kernel
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn data(&self) -> &MultiOutputDataset {
        &self.data
    }

    pub fn transform(&self) -> &Standardization {
        &self.transform
    }

    pub fn standardizes(&self) -> bool {
        self.standardize
    }

    pub fn objectives(&self) -> usize {
        self.kernel.objectives()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn conditioner(&self) -> Option<&GaussianConditioner> {
        self.conditioner.as_ref()
    }

    fn check_query(&self, query: &[AugmentedInput]) -> Result<()> {
        if query.is_empty() {
            return invalid("posterior query must be non-empty");
        }
        query.iter().try_for_each(|q| self.kernel.validate(q))
    }

    /// Posterior mean in model (standardized) units.
    pub fn posterior_mean_model(&self, query: &[AugmentedInput]) -> DVector<f64> {
        match &self.conditioner {
            None => DVector::zeros(query.len()),
            Some(c) => self.kernel.cross_points(self.data.inputs(), query).transpose() * c.alpha(),
        }
    }

    /// `L⁻¹ K(X, query)`: the whitened training-query cross-covariance.
    pub fn whitened_cross(&self, query: &[AugmentedInput]) -> Option<DMatrix<f64>> {
        self.conditioner
            .as_ref()
            .map(|c| c.cholesky().solve_lower(&self.kernel.cross_points(self.data.inputs(), query)))
    }

    /// Posterior in model units.
    pub fn posterior_model(&self, query: &[AugmentedInput]) -> Result<PosteriorGaussian> {
        self.check_query(query)?;
        let prior_cov = self.kernel.gram_aug(query, query);
        let (mean, cov) = match &self.conditioner {
            None => (DVector::zeros(query.len()), prior_cov),
            Some(c) => {
                let cross = self.kernel.cross_points(self.data.inputs(), query);
                c.condition(DVector::zeros(query.len()), prior_cov, &cross)
            }
        };
        Ok(PosteriorGaussian::new(mean, cov, PosteriorLayout::QueryOrder))
    }

    /// Posterior mean and covariance in data units at the augmented queries.
    pub fn posterior(&self, query: &[AugmentedInput]) -> Result<PosteriorGaussian> {
        let p = self.posterior_model(query)?;
        Ok(self.transform.invert_posterior(&p, query))
    }

    /// Posterior over every objective at each point, objective-major.
    pub fn posterior_points(&self, points: &[Vec<f64>]) -> Result<PosteriorGaussian> {
        let q = AugmentedInput::stack(points, self.objectives());
        let mut p = self.posterior(&q)?;
        p.layout = PosteriorLayout::ObjectiveMajor { points: points.len(), objectives: self.objectives() };
        Ok(p)
    }

    /// Log marginal likelihood of the (model-space) training data.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.conditioner.as_ref().map_or(0.0, |c| c.log_marginal_likelihood())
    }
}

/// `log N(Y; 0, K + Σ)` of `data` under the hyperparameters of `model`.
pub fn log_marginal_likelihood(model: &FittedGP, data: &MultiOutputDataset) -> Result<f64> {
    Ok(condition(model, data.clone())?.log_marginal_likelihood())
}

/// Conditions `model`'s hyperparameters on `data`.
pub fn condition(model: &FittedGP, data: MultiOutputDataset) -> Result<FittedGP> {
    FittedGP::condition(model.kernel.clone(), model.noise.clone(), data, model.standardize)
}

/// `count x len` draws `mean + L z` with standard normals fixed by `seed`.
pub fn sample_posterior(post: &PosteriorGaussian, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    if count == 0 {
        return invalid("sample count must be positive");
    }
    let l = psd_factor(&post.covariance, 1e-12)
        .map_err(|e| SmogError::Numerical(format!("posterior covariance factorization failed: {e}")))?;
    let d = post.len();
    let mut rng = rng_for(seed, &[purpose::POSTERIOR_SAMPLES]);
    let z = DMatrix::<f64>::from_fn(d, count, |_, _| StandardNormal.sample(&mut rng));
    let draws = &l * z;
    Ok(DMatrix::from_fn(count, d, |s, i| post.mean[i] + draws[(i, s)]))
}

#[cfg(test)]
mod tests;
