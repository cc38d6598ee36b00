//! Meta-learned multi-output Gaussian process surrogates for multi-objective
//! Bayesian optimization.
//!
//! Meta-task GPs are fit independently and cached; their posteriors, scaled by
//! learned per-objective transfer weights, form the prior of the target task,
//! to which a residual multi-output kernel is added. The crate also provides
//! the decision layer (Pareto fronts, hypervolume, Monte-Carlo log-EHVI and its
//! optimizers) and analytic benchmark families.

pub mod benchmarks;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod mobo;
pub mod optim;
pub mod seeding;
pub mod smog;

pub use error::{Result, SmogError};
pub use gp::{FittedGP, MultiOutputDataset, PosteriorGaussian};
pub use kernels::{AugmentedInput, MultiOutputKernel};
pub use smog::SmogModel;
