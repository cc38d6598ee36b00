//! Experiment configuration, read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smog_core::benchmarks::{parse_benchmark, BenchmarkId};
use smog_core::mobo::AcquisitionConfig;
use smog_core::smog::SmogConfig;

use crate::error::{HarnessError, Result};
use crate::models::ModelId;

/// Acquisition settings as they appear in the config file. Missing keys take
/// the library defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSettings {
    pub mc_samples: usize,
    pub base_seed: u64,
    pub continuous_restarts: usize,
    pub init_samples: usize,
    pub interleave_rounds: usize,
    pub discrete_candidates: usize,
    pub log_floor: f64,
    pub pattern_step: f64,
    pub pattern_halvings: usize,
    pub reference_fraction: f64,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        AcquisitionConfig::default().into()
    }
}

impl From<AcquisitionConfig> for AcquisitionSettings {
    fn from(c: AcquisitionConfig) -> Self {
        Self {
            mc_samples: c.mc_samples,
            base_seed: c.base_seed,
            continuous_restarts: c.continuous_restarts,
            init_samples: c.init_samples,
            interleave_rounds: c.interleave_rounds,
            discrete_candidates: c.discrete_candidates,
            log_floor: c.log_floor,
            pattern_step: c.pattern_step,
            pattern_halvings: c.pattern_halvings,
            reference_fraction: c.reference_fraction,
        }
    }
}

impl From<&AcquisitionSettings> for AcquisitionConfig {
    fn from(s: &AcquisitionSettings) -> Self {
        Self {
            mc_samples: s.mc_samples,
            base_seed: s.base_seed,
            continuous_restarts: s.continuous_restarts,
            init_samples: s.init_samples,
            interleave_rounds: s.interleave_rounds,
            discrete_candidates: s.discrete_candidates,
            log_floor: s.log_floor,
            pattern_step: s.pattern_step,
            pattern_halvings: s.pattern_halvings,
            reference_fraction: s.reference_fraction,
        }
    }
}

fn default_models() -> Vec<String> {
    vec!["smog".into(), "ind-gp".into()]
}

fn default_iterations() -> usize {
    15
}

fn default_repetitions() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_meta_restarts() -> usize {
    8
}

fn default_target_restarts() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `sinusoidal` or `hartmann6:M=..,O=..,n_meta=..`.
    pub benchmark: String,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    /// BO steps after the single random initial point.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides `M` of the benchmark id.
    #[serde(default)]
    pub meta_tasks: Option<usize>,
    /// Overrides `n_meta` of the benchmark id.
    #[serde(default)]
    pub n_meta: Option<usize>,
    /// Standard deviation of Gaussian noise added to metadata.
    #[serde(default)]
    pub meta_noise: f64,
    #[serde(default)]
    pub acquisition: AcquisitionSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub meta_cache_dir: Option<PathBuf>,
    #[serde(default = "default_meta_restarts")]
    pub meta_restarts: usize,
    #[serde(default = "default_target_restarts")]
    pub target_restarts: usize,
    /// Write measured wall time to the CSV; otherwise `elapsed_ms` is 0 so
    /// output bytes depend only on the config.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.iterations == 0 || self.repetitions == 0 {
            return bad("iterations and repetitions must be positive");
        }
        if self.meta_restarts == 0 || self.target_restarts == 0 {
            return bad("restart counts must be positive");
        }
        if self.models.is_empty() {
            return bad("at least one model is required");
        }
        self.model_ids()?;
        self.benchmark_id()?;
        if !(self.meta_noise >= 0.0 && self.meta_noise.is_finite()) {
            return bad("meta_noise must be finite and non-negative");
        }
        self.acquisition_config().validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn model_ids(&self) -> Result<Vec<ModelId>> {
        let mut ids = Vec::with_capacity(self.models.len());
        for m in &self.models {
            let id: ModelId = m.parse()?;
            if ids.contains(&id) {
                return Err(HarnessError::Config(format!("model {m} listed twice")));
            }
            ids.push(id);
        }
        Ok(ids)
    }

    /// The benchmark id with `meta_tasks` and `n_meta` overrides applied.
    pub fn benchmark_id(&self) -> Result<BenchmarkId> {
        let mut id = parse_benchmark(&self.benchmark).map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.n_meta == Some(0) || self.meta_tasks == Some(0) {
            return Err(HarnessError::Config("meta_tasks and n_meta must be positive".into()));
        }
        match &mut id {
            BenchmarkId::Sinusoidal { n_meta } => {
                if self.meta_tasks.is_some_and(|m| m != 3) {
                    return Err(HarnessError::Config("sinusoidal has exactly 3 meta tasks".into()));
                }
                if let Some(n) = self.n_meta {
                    *n_meta = n;
                }
            }
            BenchmarkId::Hartmann6 { meta_tasks, n_meta, .. } => {
                if let Some(m) = self.meta_tasks {
                    *meta_tasks = m;
                }
                if let Some(n) = self.n_meta {
                    *n_meta = n;
                }
            }
        }
        Ok(id)
    }

    pub fn acquisition_config(&self) -> AcquisitionConfig {
        (&self.acquisition).into()
    }

    pub fn smog_config(&self) -> SmogConfig {
        SmogConfig { meta_restarts: self.meta_restarts, target_restarts: self.target_restarts, ..SmogConfig::default() }
    }
}
