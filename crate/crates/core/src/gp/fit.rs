//! MAP hyperparameter fitting by multi-start local ascent.

use super::params::{kernel_log_prior, noise_log_prior, KernelSpec, NoiseKind};
use super::priors::PriorSet;
use super::{FittedGP, GaussianConditioner, MultiOutputDataset, Standardization};
use crate::error::{invalid, Result, SmogError};
use crate::optim::{ascend_multistart, AscentConfig};
use crate::seeding::{purpose, rng_for};

/// Everything needed to fit a GP: kernel structure, noise structure and priors.
#[derive(Clone, Debug, PartialEq)]
pub struct GpSpec {
    pub kernel: KernelSpec,
    pub noise: NoiseKind,
    pub priors: PriorSet,
    pub standardize: bool,
    pub ascent: AscentConfig,
}

impl GpSpec {
    pub fn new(kernel: KernelSpec, noise: NoiseKind, priors: PriorSet) -> Self {
        Self { kernel, noise, priors, standardize: true, ascent: AscentConfig::default() }
    }

    pub fn n_params(&self) -> usize {
        self.kernel.n_params() + self.noise.n_params(self.kernel.objectives())
    }

    fn split<'a>(&self, u: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        u.split_at(self.kernel.n_params())
    }

    fn mode(&self) -> Vec<f64> {
        let mut u = self.kernel.mode(&self.priors);
        u.extend(self.noise.mode(self.kernel.objectives(), &self.priors));
        u
    }

    /// Restart `r` starts at the prior modes for `r = 0` and at a prior draw
    /// otherwise; each restart owns a stream so adding restarts never changes
    /// earlier ones.
    fn start(&self, seed: u64, r: usize) -> Vec<f64> {
        if r == 0 {
            return self.mode();
        }
        let mut rng = rng_for(seed, &[purpose::RESTART, r as u64]);
        let mut u = self.kernel.sample(&self.priors, &mut rng);
        u.extend(self.noise.sample(self.kernel.objectives(), &self.priors, &mut rng));
        u
    }

    /// MAP objective on the unconstrained vector for already-transformed data.
    fn objective(&self, model_data: &MultiOutputDataset) -> impl Fn(&[f64]) -> f64 + '_ {
        let o = self.kernel.objectives();
        let data = model_data.clone();
        let y = data.stacked_outputs();
        move |u: &[f64]| {
            let (ku, nu) = self.split(u);
            let Ok(kernel) = self.kernel.unpack(ku) else { return f64::NEG_INFINITY };
            let noise = self.noise.unpack(nu);
            let lp = kernel_log_prior(&kernel, &self.priors) + noise_log_prior(&noise, &self.priors);
            if !lp.is_finite() {
                return f64::NEG_INFINITY;
            }
            let k = kernel.gram_points(data.inputs());
            match GaussianConditioner::new(k, &noise.diagonal(data.len(), o), y.clone()) {
                Ok(c) => c.log_marginal_likelihood() + lp,
                Err(_) => f64::NEG_INFINITY,
            }
        }
    }
}

/// Log marginal likelihood plus hyperprior log-densities; `-inf` when a
/// parameter leaves its prior's support.
pub fn log_posterior_objective(model: &FittedGP, data: &MultiOutputDataset, priors: &PriorSet) -> Result<f64> {
    let lp = kernel_log_prior(model.kernel(), priors) + noise_log_prior(model.noise(), priors);
    if !lp.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(super::log_marginal_likelihood(model, data)? + lp)
}

/// Maximizes the MAP objective over `restarts` local ascents.
pub fn fit(spec: &GpSpec, data: &MultiOutputDataset, restarts: usize, seed: u64) -> Result<FittedGP> {
    if restarts == 0 {
        return invalid("restarts must be positive");
    }
    let o = spec.kernel.objectives();
    if data.objectives() != o || data.dim() != spec.kernel.dim() {
        return invalid(format!(
            "data shape ({}, {}) does not match spec ({}, {o})",
            data.dim(),
            data.objectives(),
            spec.kernel.dim()
        ));
    }
    if data.is_empty() {
        let u = spec.mode();
        let (ku, nu) = spec.split(&u);
        return FittedGP::condition(spec.kernel.unpack(ku)?, spec.noise.unpack(nu), data.clone(), spec.standardize);
    }
    let transform =
        if spec.standardize { Standardization::fit(data.outputs(), o) } else { Standardization::identity(o) };
    let model_data = transform.apply_dataset(data);
    let f = spec.objective(&model_data);
    let mut f = |u: &[f64]| f(u);
    let starts: Vec<Vec<f64>> = (0..restarts).map(|r| spec.start(seed, r)).collect();
    let best = ascend_multistart(&mut f, &starts, &spec.ascent)
        .ok_or_else(|| SmogError::Numerical(format!("all {restarts} restarts failed to factorize")))?;
    let (ku, nu) = spec.split(&best.x);
    FittedGP::condition(spec.kernel.unpack(ku)?, spec.noise.unpack(nu), data.clone(), spec.standardize)
}

/// Best objective value reached by [`fit`]; used to compare restart budgets.
pub fn fitted_objective(spec: &GpSpec, model: &FittedGP) -> Result<f64> {
    log_posterior_objective(model, model.data(), &spec.priors)
}
