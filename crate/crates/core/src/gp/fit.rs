use super::kernel::{HyperParams, KernelKind, LOG_BOUND};
use super::likelihood::{Gp, GpDataset};
use super::optimize::{maximize, OptimStatus, OptimizerOptions};
use crate::error::{Error, Result};

/// Outcome of a single-voxel maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    MaxIterations,
    Stalled,
    /// Targets constant: fitting skipped, fallback returned.
    Degenerate,
}

impl From<OptimStatus> for FitStatus {
    fn from(s: OptimStatus) -> Self {
        match s {
            OptimStatus::Converged => FitStatus::Converged,
            OptimStatus::MaxIterations => FitStatus::MaxIterations,
            OptimStatus::Stalled => FitStatus::Stalled,
        }
    }
}

impl FitStatus {
    pub fn label(self) -> &'static str {
        match self {
            FitStatus::Converged => "converged",
            FitStatus::MaxIterations => "max_iter",
            FitStatus::Stalled => "stalled",
            FitStatus::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VoxelFit {
    pub params: HyperParams,
    pub lml: f64,
    pub init_lml: f64,
    pub status: FitStatus,
    pub iterations: usize,
    /// LML after each accepted optimizer iteration.
    pub trace: Vec<f64>,
}

/// Everything needed to fit and predict one voxel's GP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpSettings {
    pub kind: KernelKind,
    pub jitter: f64,
    /// Constant prior mean m(x).
    pub prior_mean: f64,
    pub optimizer: OptimizerOptions,
}

impl GpSettings {
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            jitter: 0.0,
            prior_mean: 0.0,
            optimizer: OptimizerOptions::default(),
        }
    }

    pub fn gp(&self) -> Gp {
        Gp::new(self.kind).with_jitter(self.jitter)
    }
}

/// Fallback for data that carry no information: the start point with the
/// noise pushed to its lower bound.
pub fn degenerate_fallback(init: &HyperParams) -> HyperParams {
    HyperParams {
        log_noise: -LOG_BOUND,
        ..init.clamped()
    }
}

impl Gp {
    /// Maximize the LML over the log-hyperparameters from `init`.
    ///
    /// Fewer than two observations is an error. Constant targets return the
    /// [`degenerate_fallback`] with status [`FitStatus::Degenerate`].
    pub fn fit(&self, data: &GpDataset, init: &HyperParams, opts: &OptimizerOptions) -> Result<VoxelFit> {
        if data.len() < 2 {
            return Err(Error::DegenerateData(format!(
                "need at least 2 observations, got {}",
                data.len()
            )));
        }
        if data.targets_constant() {
            let params = degenerate_fallback(init);
            let lml = self.log_marginal_likelihood(&params, data)?;
            return Ok(VoxelFit {
                params,
                lml,
                init_lml: lml,
                status: FitStatus::Degenerate,
                iterations: 0,
                trace: vec![lml],
            });
        }
        let start = init.clamped();
        let ascent = maximize(
            |x: &[f64; 3]| self.lml_and_gradient(&HyperParams::from_array(*x), data),
            start.to_array(),
            opts,
        )?;
        Ok(VoxelFit {
            params: HyperParams::from_array(ascent.x),
            lml: ascent.value,
            init_lml: ascent.trace[0],
            status: ascent.status.into(),
            iterations: ascent.iterations,
            trace: ascent.trace,
        })
    }
}

/// Maximum-likelihood hyperparameters for one voxel with zero base jitter.
pub fn fit_voxel(
    kind: KernelKind,
    data: &GpDataset,
    init: &HyperParams,
    opts: &OptimizerOptions,
) -> Result<VoxelFit> {
    Gp::new(kind).fit(data, init, opts)
}
