//! Packing of kernel and noise hyperparameters onto an unconstrained vector.

use rand::Rng;

use super::priors::{from_noise, from_positive, from_unit, to_noise, to_positive, to_unit, ParamGroup, PriorSet};
use super::NoiseModel;
use crate::error::{invalid, Result};
use crate::kernels::{EquicorrelatedTaskParams, Matern52Params, MultiOutputKernel};

/// The learnable structure of a multi-output kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSpec {
    /// Matérn-5/2 ARD with unit outputscale times an equicorrelated task
    /// block; the `σ_i` carry the function variance.
    Separable { dim: usize, objectives: usize },
    /// One Matérn-5/2 ARD kernel with its own outputscale per objective.
    Independent { dim: usize, objectives: usize },
}

impl KernelSpec {
    pub fn dim(&self) -> usize {
        match *self {
            Self::Separable { dim, .. } | Self::Independent { dim, .. } => dim,
        }
    }

    pub fn objectives(&self) -> usize {
        match *self {
            Self::Separable { objectives, .. } | Self::Independent { objectives, .. } => objectives,
        }
    }

    pub fn n_params(&self) -> usize {
        match *self {
            Self::Separable { dim, objectives } => dim + objectives + usize::from(objectives > 1),
            Self::Independent { dim, objectives } => objectives * (dim + 1),
        }
    }

    pub fn unpack(&self, u: &[f64]) -> Result<MultiOutputKernel> {
        if u.len() != self.n_params() {
            return invalid(format!("expected {} kernel parameters, got {}", self.n_params(), u.len()));
        }
        match *self {
            Self::Separable { dim, objectives } => {
                let ls = u[..dim].iter().map(|v| to_positive(*v)).collect();
                let sigma = u[dim..dim + objectives].iter().map(|v| to_positive(*v)).collect();
                let rho = if objectives > 1 { to_unit(u[dim + objectives]).min(1.0 - 1e-12) } else { 0.0 };
                Ok(MultiOutputKernel::Separable {
                    input: Matern52Params::new(ls, 1.0)?,
                    task: EquicorrelatedTaskParams::new(sigma, rho)?,
                })
            }
            Self::Independent { dim, objectives } => {
                let inputs = (0..objectives)
                    .map(|o| {
                        let chunk = &u[o * (dim + 1)..(o + 1) * (dim + 1)];
                        Matern52Params::new(
                            chunk[..dim].iter().map(|v| to_positive(*v)).collect(),
                            to_positive(chunk[dim]),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MultiOutputKernel::Independent { inputs })
            }
        }
    }

    pub fn pack(&self, k: &MultiOutputKernel) -> Result<Vec<f64>> {
        match (*self, k) {
            (Self::Separable { dim, objectives }, MultiOutputKernel::Separable { input, task })
                if input.dim() == dim && task.objectives() == objectives =>
            {
                let mut u: Vec<f64> = input.lengthscales().iter().map(|v| from_positive(*v)).collect();
                u.extend(task.sigma().iter().map(|v| from_positive(*v)));
                if objectives > 1 {
                    u.push(from_unit(task.rho()));
                }
                Ok(u)
            }
            (Self::Independent { dim, objectives }, MultiOutputKernel::Independent { inputs })
                if inputs.len() == objectives && inputs[0].dim() == dim =>
            {
                Ok(inputs
                    .iter()
                    .flat_map(|p| {
                        p.lengthscales()
                            .iter()
                            .map(|v| from_positive(*v))
                            .chain(std::iter::once(from_positive(p.outputscale())))
                            .collect::<Vec<_>>()
                    })
                    .collect())
            }
            _ => invalid(format!("kernel does not match spec {self:?}")),
        }
    }

    /// Unconstrained vector at the prior modes.
    pub fn mode(&self, priors: &PriorSet) -> Vec<f64> {
        self.build(|g| priors.mode(g))
    }

    /// Unconstrained vector drawn from the priors.
    pub fn sample<R: Rng + ?Sized>(&self, priors: &PriorSet, rng: &mut R) -> Vec<f64> {
        self.build(|g| priors.sample(g, rng))
    }

    fn build(&self, mut natural: impl FnMut(ParamGroup) -> f64) -> Vec<f64> {
        match *self {
            Self::Separable { dim, objectives } => {
                let mut u: Vec<f64> = (0..dim).map(|_| from_positive(natural(ParamGroup::Lengthscale))).collect();
                u.extend((0..objectives).map(|_| from_positive(natural(ParamGroup::TaskScale))));
                if objectives > 1 {
                    u.push(from_unit(natural(ParamGroup::Correlation)));
                }
                u
            }
            Self::Independent { dim, objectives } => {
                let mut u = Vec::with_capacity(self.n_params());
                for _ in 0..objectives {
                    u.extend((0..dim).map(|_| from_positive(natural(ParamGroup::Lengthscale))));
                    u.push(from_positive(natural(ParamGroup::Outputscale)));
                }
                u
            }
        }
    }
}

/// Log hyperprior density of a kernel's natural-scale parameters.
///
/// The outputscale of shared-input kernels is fixed to one and excluded; the
/// task scales and correlation stand in for it.
pub fn kernel_log_prior(k: &MultiOutputKernel, priors: &PriorSet) -> f64 {
    let ls = |p: &Matern52Params| -> f64 {
        p.lengthscales().iter().map(|l| priors.log_density(ParamGroup::Lengthscale, *l)).sum()
    };
    match k {
        MultiOutputKernel::Separable { input, task } => {
            let mut lp = ls(input);
            lp += task.sigma().iter().map(|s| priors.log_density(ParamGroup::TaskScale, *s)).sum::<f64>();
            if task.objectives() > 1 {
                lp += priors.log_density(ParamGroup::Correlation, task.rho());
            }
            lp
        }
        MultiOutputKernel::Coregionalized { input, .. } => ls(input),
        MultiOutputKernel::Independent { inputs } => inputs
            .iter()
            .map(|p| ls(p) + priors.log_density(ParamGroup::Outputscale, p.outputscale()))
            .sum(),
    }
}

pub fn noise_log_prior(noise: &NoiseModel, priors: &PriorSet) -> f64 {
    let one = |v: f64| {
        if v < super::priors::NOISE_FLOOR {
            f64::NEG_INFINITY
        } else {
            priors.log_density(ParamGroup::Noise, v)
        }
    };
    match noise {
        NoiseModel::Global(v) => one(*v),
        NoiseModel::PerObjective(v) => v.iter().map(|x| one(*x)).sum(),
    }
}

/// Noise structure: one shared variance or one per objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Global,
    PerObjective,
}

impl NoiseKind {
    pub fn n_params(&self, objectives: usize) -> usize {
        match self {
            Self::Global => 1,
            Self::PerObjective => objectives,
        }
    }

    pub fn unpack(&self, u: &[f64]) -> NoiseModel {
        match self {
            Self::Global => NoiseModel::Global(to_noise(u[0])),
            Self::PerObjective => NoiseModel::PerObjective(u.iter().map(|v| to_noise(*v)).collect()),
        }
    }

    pub fn pack(&self, n: &NoiseModel) -> Result<Vec<f64>> {
        match (self, n) {
            (Self::Global, NoiseModel::Global(v)) => Ok(vec![from_noise(*v)]),
            (Self::PerObjective, NoiseModel::PerObjective(v)) => Ok(v.iter().map(|x| from_noise(*x)).collect()),
            _ => invalid("noise model does not match its kind"),
        }
    }

    pub fn mode(&self, objectives: usize, priors: &PriorSet) -> Vec<f64> {
        vec![from_noise(priors.mode(ParamGroup::Noise).max(2e-6)); self.n_params(objectives)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, objectives: usize, priors: &PriorSet, rng: &mut R) -> Vec<f64> {
        (0..self.n_params(objectives))
            .map(|_| from_noise(priors.sample(ParamGroup::Noise, rng).max(2e-6)))
            .collect()
    }
}
