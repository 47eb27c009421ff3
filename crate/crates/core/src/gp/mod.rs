//! Single-output Gaussian-process machinery over a scalar input.
//!
//! Kernels, jitter-guarded factorization, closed-form Gaussian conditioning,
//! the log marginal likelihood with its analytic gradient, the predictive
//! distribution and per-voxel maximum-likelihood fitting.

mod fit;
mod gaussian;
mod kernel;
mod likelihood;
pub mod optimize;

pub use fit::{degenerate_fallback, fit_voxel, FitStatus, GpSettings, VoxelFit};
pub use gaussian::condition_gaussian;
pub use kernel::{
    cross_kernel, factorize, kernel_eval, kernel_matrix, FactorizedCovariance, HyperParams, KernelKind,
    JITTER_LADDER, LOG_BOUND, N_HYPER,
};
pub use likelihood::{
    lml_gradient, log_marginal_likelihood, normal_log_density, predict, Gp, GpDataset, PredictiveGaussian,
    PredictiveSpace,
};
pub use optimize::{OptimStatus, OptimizerOptions};
