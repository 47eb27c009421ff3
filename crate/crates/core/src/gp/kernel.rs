//! Covariance kernels over scalar inputs and the jitter-guarded Cholesky
//! factorization of the resulting covariance matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Number of GP hyperparameters per voxel.
pub const N_HYPER: usize = 3;

/// Log-hyperparameters are kept inside `[-LOG_BOUND, LOG_BOUND]`.
pub const LOG_BOUND: f64 = 10.0;

/// Diagonal jitter values tried, in order, when a factorization fails.
pub const JITTER_LADDER: [f64; 3] = [1e-10, 1e-6, 1e-4];

/// One voxel's GP hyperparameters on the log scale.
///
/// The natural-scale values (input scale τ, output scale λ, noise σ) are
/// recovered with `exp`, so they are strictly positive by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperParams {
    pub log_input_scale: f64,
    pub log_output_scale: f64,
    pub log_noise: f64,
}

impl HyperParams {
    pub fn new(log_input_scale: f64, log_output_scale: f64, log_noise: f64) -> Result<Self> {
        let hp = Self {
            log_input_scale,
            log_output_scale,
            log_noise,
        };
        if hp.to_array().iter().all(|v| v.is_finite()) {
            Ok(hp)
        } else {
            Err(Error::invalid(format!("non-finite hyperparameters {hp:?}")))
        }
    }

    pub fn from_array(a: [f64; N_HYPER]) -> Self {
        Self {
            log_input_scale: a[0],
            log_output_scale: a[1],
            log_noise: a[2],
        }
    }

    pub fn to_array(self) -> [f64; N_HYPER] {
        [self.log_input_scale, self.log_output_scale, self.log_noise]
    }

    pub fn input_scale(&self) -> f64 {
        self.log_input_scale.exp()
    }

    pub fn output_scale(&self) -> f64 {
        self.log_output_scale.exp()
    }

    pub fn noise(&self) -> f64 {
        self.log_noise.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        (2.0 * self.log_noise).exp()
    }

    pub fn signal_variance(&self) -> f64 {
        (2.0 * self.log_output_scale).exp()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Clamp every component into the guarded box.
    pub fn clamped(self) -> Self {
        let a = self.to_array().map(|v| v.clamp(-LOG_BOUND, LOG_BOUND));
        Self::from_array(a)
    }
}

/// Covariance family; both are combined additively with observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    SquaredExponential,
    Linear,
}

impl KernelKind {
    pub fn label(self) -> &'static str {
        match self {
            KernelKind::SquaredExponential => "se",
            KernelKind::Linear => "linear",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "se" | "squared_exponential" => Ok(KernelKind::SquaredExponential),
            "linear" | "lin" => Ok(KernelKind::Linear),
            other => Err(Error::invalid(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Evaluate the kernel between two inputs. `same_observation` adds σ² and
/// must only be set when `xi` and `xj` are the same observation.
pub fn kernel_eval(
    kind: KernelKind,
    theta: &HyperParams,
    xi: f64,
    xj: f64,
    same_observation: bool,
) -> f64 {
    let lambda2 = theta.signal_variance();
    let k = match kind {
        KernelKind::SquaredExponential => {
            let tau = theta.input_scale();
            let d = xi - xj;
            lambda2 * (-(d * d) / (2.0 * tau * tau)).exp()
        }
        KernelKind::Linear => lambda2 * xi * xj,
    };
    if same_observation {
        k + theta.noise_variance()
    } else {
        k
    }
}

/// Noise-free kernel matrix between two input sets.
pub fn cross_kernel(kind: KernelKind, theta: &HyperParams, xa: &[f64], xb: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(xa.len(), xb.len(), |i, j| {
        kernel_eval(kind, theta, xa[i], xb[j], false)
    })
}

/// N×N training covariance with `σ² + jitter` added on the diagonal.
pub fn kernel_matrix(kind: KernelKind, theta: &HyperParams, xs: &[f64], jitter: f64) -> DMatrix<f64> {
    let n = xs.len();
    let diag = theta.noise_variance() + jitter;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_eval(kind, theta, xs[i], xs[j], false);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += diag;
    }
    k
}

/// A factorized training covariance together with the jitter that made it
/// positive definite.
#[derive(Debug, Clone)]
pub struct FactorizedCovariance {
    pub matrix: DMatrix<f64>,
    pub cholesky: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl FactorizedCovariance {
    pub fn log_det(&self) -> f64 {
        2.0 * self.cholesky.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Build and factorize the training covariance, escalating the jitter along
/// [`JITTER_LADDER`] when Cholesky fails.
pub fn factorize(
    kind: KernelKind,
    theta: &HyperParams,
    xs: &[f64],
    jitter: f64,
) -> Result<FactorizedCovariance> {
    if xs.is_empty() {
        return Err(Error::invalid("empty input set"));
    }
    let base = kernel_matrix(kind, theta, xs, 0.0);
    let ladder = std::iter::once(jitter).chain(JITTER_LADDER.iter().copied().filter(|&j| j > jitter));
    let mut last = jitter;
    for j in ladder {
        last = j;
        let mut m = base.clone();
        for i in 0..xs.len() {
            m[(i, i)] += j;
        }
        if !m.iter().all(|v| v.is_finite()) {
            break;
        }
        if let Some(ch) = Cholesky::new(m.clone()) {
            if ch.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                return Ok(FactorizedCovariance {
                    matrix: m,
                    cholesky: ch,
                    jitter: j,
                });
            }
        }
    }
    Err(Error::FactorizationFailure { jitter: last })
}
