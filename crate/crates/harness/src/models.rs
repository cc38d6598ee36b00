//! Surrogates compared by the harness: SMOG and three baselines.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use smog_core::gp::{fit, GpSpec, KernelSpec, NoiseKind, PosteriorLayout, PriorSet};
use smog_core::seeding::derive_seed;
use smog_core::smog::{fit_meta_tasks, MetaFitFailure, MetaTaskModel, SmogConfig};
use smog_core::{FittedGP, MultiOutputDataset, PosteriorGaussian, SmogModel};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    Smog,
    IndGp,
    MoGp,
    IndScaml,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::Smog, ModelId::IndGp, ModelId::MoGp, ModelId::IndScaml];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelId::Smog => "smog",
            ModelId::IndGp => "ind-gp",
            ModelId::MoGp => "mo-gp",
            ModelId::IndScaml => "ind-scaml",
        }
    }

    pub fn uses_metadata(&self) -> bool {
        matches!(self, ModelId::Smog | ModelId::IndScaml)
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown model {s:?} (expected smog, ind-gp, mo-gp or ind-scaml)")))
    }
}

/// Fitted meta models shared by the campaigns of a suite.
#[derive(Debug, Clone, Default)]
pub struct MetaModels {
    /// Multi-output meta models used by `smog`.
    pub joint: Vec<MetaTaskModel>,
    /// `per_objective[o]` holds single-output meta models used by `ind-scaml`.
    pub per_objective: Vec<Vec<MetaTaskModel>>,
}

/// Seed of the single-objective meta fits for objective `o`.
pub fn objective_meta_seed(seed: u64, o: usize) -> u64 {
    derive_seed(seed, &[o as u64 + 1])
}

/// Fits the meta models the listed surrogates need. Failed tasks are dropped and reported.
pub fn fit_meta_models(
    models: &[ModelId],
    meta_data: &[MultiOutputDataset],
    cfg: &SmogConfig,
    seed: u64,
) -> smog_core::Result<(MetaModels, Vec<MetaFitFailure>)> {
    let mut out = MetaModels::default();
    let mut failures = Vec::new();
    if models.contains(&ModelId::Smog) {
        let report = fit_meta_tasks(meta_data, cfg, seed);
        out.joint = report.models;
        failures.extend(report.failures);
    }
    if models.contains(&ModelId::IndScaml) {
        let objectives = meta_data.first().map_or(0, |d| d.objectives());
        for o in 0..objectives {
            let data = meta_data.iter().map(|d| d.objective(o)).collect::<smog_core::Result<Vec<_>>>()?;
            let report = fit_meta_tasks(&data, cfg, objective_meta_seed(seed, o));
            out.per_objective.push(report.models);
            failures.extend(report.failures);
        }
    }
    Ok((out, failures))
}

/// A model that can be refit on target data and queried jointly over objectives.
pub trait Surrogate: Send + Sync {
    fn id(&self) -> ModelId;
    fn objectives(&self) -> usize;
    /// Refits hyperparameters on `data` and conditions on it.
    fn fit(&mut self, data: &MultiOutputDataset, seed: u64) -> smog_core::Result<()>;
    /// Posterior over every objective at each point, objective-major, in data units.
    fn predict(&self, points: &[Vec<f64>]) -> smog_core::Result<PosteriorGaussian>;
}

/// Block-diagonal combination of per-objective posteriors over the same points.
fn stack_objectives(parts: Vec<PosteriorGaussian>, points: usize) -> PosteriorGaussian {
    let o = parts.len();
    let mut mean = DVector::zeros(o * points);
    let mut cov = DMatrix::zeros(o * points, o * points);
    for (i, p) in parts.iter().enumerate() {
        mean.rows_mut(i * points, points).copy_from(&p.mean);
        cov.view_mut((i * points, i * points), (points, points)).copy_from(&p.covariance);
    }
    PosteriorGaussian { mean, covariance: cov, layout: PosteriorLayout::ObjectiveMajor { points, objectives: o } }
}

pub struct SmogSurrogate {
    model: SmogModel,
    cfg: SmogConfig,
    fitted: bool,
}

impl SmogSurrogate {
    pub fn new(meta: &[MetaTaskModel], dim: usize, objectives: usize, cfg: &SmogConfig, seed: u64) -> smog_core::Result<Self> {
        let meta = meta.iter().cloned().map(Arc::new).collect();
        Ok(Self { model: SmogModel::initial(meta, dim, objectives, cfg, seed)?, cfg: cfg.clone(), fitted: false })
    }

    pub fn model(&self) -> &SmogModel {
        &self.model
    }
}

impl Surrogate for SmogSurrogate {
    fn id(&self) -> ModelId {
        ModelId::Smog
    }

    fn objectives(&self) -> usize {
        self.model.objectives()
    }

    // After the first fit the previous optimum seeds an extra start.
    fn fit(&mut self, data: &MultiOutputDataset, seed: u64) -> smog_core::Result<()> {
        self.model = if self.fitted {
            self.model.fit_target_warm(data.clone(), &self.cfg, seed)?
        } else {
            self.model.fit_target(data.clone(), &self.cfg, seed)?
        };
        self.fitted = true;
        Ok(())
    }

    fn predict(&self, points: &[Vec<f64>]) -> smog_core::Result<PosteriorGaussian> {
        self.model.posterior_points(points)
    }
}

/// One single-objective SMOG model per objective.
pub struct IndScamlSurrogate {
    parts: Vec<SmogSurrogate>,
}

impl IndScamlSurrogate {
    pub fn new(per_objective: &[Vec<MetaTaskModel>], dim: usize, cfg: &SmogConfig, seed: u64) -> smog_core::Result<Self> {
        let parts = per_objective
            .iter()
            .enumerate()
            .map(|(o, meta)| SmogSurrogate::new(meta, dim, 1, cfg, derive_seed(seed, &[o as u64])))
            .collect::<smog_core::Result<Vec<_>>>()?;
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[SmogSurrogate] {
        &self.parts
    }
}

impl Surrogate for IndScamlSurrogate {
    fn id(&self) -> ModelId {
        ModelId::IndScaml
    }

    fn objectives(&self) -> usize {
        self.parts.len()
    }

    fn fit(&mut self, data: &MultiOutputDataset, seed: u64) -> smog_core::Result<()> {
        for (o, part) in self.parts.iter_mut().enumerate() {
            part.fit(&data.objective(o)?, derive_seed(seed, &[o as u64]))?;
        }
        Ok(())
    }

    fn predict(&self, points: &[Vec<f64>]) -> smog_core::Result<PosteriorGaussian> {
        let parts = self.parts.iter().map(|p| p.predict(points)).collect::<smog_core::Result<Vec<_>>>()?;
        Ok(stack_objectives(parts, points.len()))
    }
}

/// Plain GPs without metadata: `ind-gp` (one GP per objective) or `mo-gp`
/// (one separable GP over all objectives).
pub struct GpSurrogate {
    id: ModelId,
    objectives: usize,
    specs: Vec<GpSpec>,
    restarts: usize,
    fitted: Vec<FittedGP>,
}

impl GpSurrogate {
    pub fn new(id: ModelId, dim: usize, objectives: usize, restarts: usize) -> smog_core::Result<Self> {
        let specs = match id {
            ModelId::IndGp => (0..objectives)
                .map(|_| {
                    GpSpec::new(KernelSpec::Independent { dim, objectives: 1 }, NoiseKind::PerObjective, PriorSet::standard())
                })
                .collect(),
            ModelId::MoGp => {
                vec![GpSpec::new(KernelSpec::Separable { dim, objectives }, NoiseKind::Global, PriorSet::standard())]
            }
            _ => return Err(smog_core::SmogError::InvalidArgument(format!("{id} is not a plain GP"))),
        };
        let empty = MultiOutputDataset::empty(dim, specs[0].kernel.objectives());
        let fitted = specs.iter().map(|s| fit(s, &empty, 1, 0)).collect::<smog_core::Result<Vec<_>>>()?;
        Ok(Self { id, objectives, specs, restarts, fitted })
    }

    pub fn models(&self) -> &[FittedGP] {
        &self.fitted
    }
}

impl Surrogate for GpSurrogate {
    fn id(&self) -> ModelId {
        self.id
    }

    fn objectives(&self) -> usize {
        self.objectives
    }

    fn fit(&mut self, data: &MultiOutputDataset, seed: u64) -> smog_core::Result<()> {
        self.fitted = if self.id == ModelId::IndGp {
            (0..self.objectives)
                .map(|o| fit(&self.specs[o], &data.objective(o)?, self.restarts, derive_seed(seed, &[o as u64])))
                .collect::<smog_core::Result<Vec<_>>>()?
        } else {
            vec![fit(&self.specs[0], data, self.restarts, seed)?]
        };
        Ok(())
    }

    fn predict(&self, points: &[Vec<f64>]) -> smog_core::Result<PosteriorGaussian> {
        if self.id == ModelId::MoGp {
            return self.fitted[0].posterior_points(points);
        }
        let parts = self.fitted.iter().map(|g| g.posterior_points(points)).collect::<smog_core::Result<Vec<_>>>()?;
        Ok(stack_objectives(parts, points.len()))
    }
}

/// Builds an unfitted surrogate. Models without metadata ignore `meta`.
pub fn build_model(
    id: ModelId,
    meta: &MetaModels,
    dim: usize,
    objectives: usize,
    cfg: &SmogConfig,
    seed: u64,
) -> smog_core::Result<Box<dyn Surrogate>> {
    Ok(match id {
        ModelId::Smog => Box::new(SmogSurrogate::new(&meta.joint, dim, objectives, cfg, seed)?),
        ModelId::IndScaml => {
            if meta.per_objective.len() != objectives {
                return Err(smog_core::SmogError::InvalidArgument(format!(
                    "ind-scaml needs single-objective meta models for {objectives} objectives, got {}",
                    meta.per_objective.len()
                )));
            }
            Box::new(IndScamlSurrogate::new(&meta.per_objective, dim, cfg, seed)?)
        }
        ModelId::IndGp | ModelId::MoGp => Box::new(GpSurrogate::new(id, dim, objectives, cfg.target_restarts)?),
    })
}
