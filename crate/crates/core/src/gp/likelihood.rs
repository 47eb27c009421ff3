//! Log marginal likelihood, its gradient in log-hyperparameter space and the
//! predictive distribution for a single-output GP.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::kernel::{cross_kernel, factorize, kernel_eval, FactorizedCovariance, HyperParams, KernelKind, N_HYPER};
use crate::error::{Error, Result};

/// Training data for one GP: scalar inputs, targets and the constant prior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GpDataset {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    mean_value: f64,
}

impl GpDataset {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>, mean_value: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("GP dataset needs at least one observation"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::invalid(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if !mean_value.is_finite() || inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("GP dataset contains non-finite values"));
        }
        Ok(Self {
            inputs,
            targets,
            mean_value,
        })
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn mean_value(&self) -> f64 {
        self.mean_value
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// True when every target equals the first to within a few ulps.
    pub fn targets_constant(&self) -> bool {
        let first = self.targets[0];
        let scale = self.targets.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        self.targets
            .iter()
            .all(|v| (v - first).abs() <= 4.0 * f64::EPSILON * scale)
    }
}

/// Gaussian predictive distribution at one query input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveGaussian {
    pub mean: f64,
    pub variance: f64,
}

impl PredictiveGaussian {
    pub fn log_density(&self, y: f64) -> f64 {
        normal_log_density(y, self.mean, self.variance)
    }
}

pub fn normal_log_density(y: f64, mean: f64, variance: f64) -> f64 {
    let d = y - mean;
    -0.5 * (2.0 * PI * variance).ln() - 0.5 * d * d / variance
}

/// Whether the predictive variance describes the latent function or a new
/// noisy observation of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictiveSpace {
    #[default]
    Latent,
    Observed,
}

/// A kernel family plus the base diagonal jitter used for factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gp {
    pub kind: KernelKind,
    pub jitter: f64,
}

/// Training-side quantities shared by the likelihood, gradient and predictor.
struct Conditioned {
    xs: Vec<f64>,
    shift: f64,
    cov: FactorizedCovariance,
    alpha: DVector<f64>,
    resid: DVector<f64>,
}

impl Gp {
    pub fn new(kind: KernelKind) -> Self {
        Self { kind, jitter: 0.0 }
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    /// The linear kernel is evaluated on inputs centered at the training
    /// mean so that it does not privilege the score origin.
    fn input_shift(&self, inputs: &[f64]) -> f64 {
        match self.kind {
            KernelKind::SquaredExponential => 0.0,
            KernelKind::Linear => inputs.iter().sum::<f64>() / inputs.len() as f64,
        }
    }

    fn condition(&self, theta: &HyperParams, data: &GpDataset) -> Result<Conditioned> {
        let shift = self.input_shift(data.inputs());
        let xs: Vec<f64> = data.inputs().iter().map(|x| x - shift).collect();
        let cov = factorize(self.kind, theta, &xs, self.jitter)?;
        let resid = DVector::from_iterator(
            data.len(),
            data.targets().iter().map(|y| y - data.mean_value()),
        );
        let alpha = cov.cholesky.solve(&resid);
        Ok(Conditioned {
            xs,
            shift,
            cov,
            alpha,
            resid,
        })
    }

    fn lml_from(c: &Conditioned) -> f64 {
        let n = c.xs.len() as f64;
        -0.5 * n * (2.0 * PI).ln() - 0.5 * c.cov.log_det() - 0.5 * c.resid.dot(&c.alpha)
    }

    pub fn log_marginal_likelihood(&self, theta: &HyperParams, data: &GpDataset) -> Result<f64> {
        Ok(Self::lml_from(&self.condition(theta, data)?))
    }

    /// LML and its gradient with respect to (log τ, log λ, log σ).
    pub fn lml_and_gradient(
        &self,
        theta: &HyperParams,
        data: &GpDataset,
    ) -> Result<(f64, [f64; N_HYPER])> {
        let c = self.condition(theta, data)?;
        let lml = Self::lml_from(&c);
        let n = c.xs.len();
        let k_inv = c.cov.cholesky.inverse();
        // W = α αᵀ − K⁻¹; ∂L/∂ℓ_j = ½ tr(W ∂K/∂ℓ_j)
        let w = &c.alpha * c.alpha.transpose() - k_inv;

        let noise_var = theta.noise_variance();
        let tau2 = theta.input_scale().powi(2);
        let mut grad = [0.0; N_HYPER];
        for i in 0..n {
            for j in 0..n {
                let k_signal = kernel_eval(self.kind, theta, c.xs[i], c.xs[j], false);
                let d_tau = match self.kind {
                    KernelKind::SquaredExponential => {
                        let d = c.xs[i] - c.xs[j];
                        k_signal * d * d / tau2
                    }
                    KernelKind::Linear => 0.0,
                };
                let wij = w[(i, j)];
                grad[0] += wij * d_tau;
                grad[1] += wij * 2.0 * k_signal;
            }
            grad[2] += w[(i, i)] * 2.0 * noise_var;
        }
        for g in &mut grad {
            *g *= 0.5;
        }
        Ok((lml, grad))
    }

    pub fn predict(
        &self,
        theta: &HyperParams,
        data: &GpDataset,
        x_star: f64,
        space: PredictiveSpace,
    ) -> Result<PredictiveGaussian> {
        let c = self.condition(theta, data)?;
        Ok(self.predict_from(&c, theta, data.mean_value(), x_star, space))
    }

    /// Predict at several queries, factorizing the training covariance once.
    pub fn predict_many(
        &self,
        theta: &HyperParams,
        data: &GpDataset,
        queries: &[f64],
        space: PredictiveSpace,
    ) -> Result<Vec<PredictiveGaussian>> {
        let c = self.condition(theta, data)?;
        Ok(queries
            .iter()
            .map(|&x| self.predict_from(&c, theta, data.mean_value(), x, space))
            .collect())
    }

    fn predict_from(
        &self,
        c: &Conditioned,
        theta: &HyperParams,
        mean_value: f64,
        x_star: f64,
        space: PredictiveSpace,
    ) -> PredictiveGaussian {
        let xq = x_star - c.shift;
        let k_star: DMatrix<f64> = cross_kernel(self.kind, theta, &c.xs, &[xq]);
        let k_star = k_star.column(0).into_owned();
        let mean = mean_value + k_star.dot(&c.alpha);
        let v = c
            .cov
            .cholesky
            .l_dirty()
            .solve_lower_triangular(&k_star)
            .expect("Cholesky factor has a positive diagonal");
        let prior = kernel_eval(self.kind, theta, xq, xq, false);
        let mut variance = (prior - v.dot(&v)).max(0.0);
        if space == PredictiveSpace::Observed {
            variance += theta.noise_variance();
        }
        PredictiveGaussian { mean, variance }
    }
}

/// LML with zero base jitter.
pub fn log_marginal_likelihood(kind: KernelKind, theta: &HyperParams, data: &GpDataset) -> Result<f64> {
    Gp::new(kind).log_marginal_likelihood(theta, data)
}

/// Gradient of [`log_marginal_likelihood`] with respect to the log-hyperparameters.
pub fn lml_gradient(kind: KernelKind, theta: &HyperParams, data: &GpDataset) -> Result<[f64; N_HYPER]> {
    Gp::new(kind).lml_and_gradient(theta, data).map(|(_, g)| g)
}

/// Latent-function predictive distribution at `x_star`.
pub fn predict(
    kind: KernelKind,
    theta: &HyperParams,
    data: &GpDataset,
    x_star: f64,
) -> Result<PredictiveGaussian> {
    Gp::new(kind).predict(theta, data, x_star, PredictiveSpace::Latent)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

    fn unit_noiseless() -> HyperParams {
        // λ = τ = 1, σ² = 1e-12
        HyperParams::new(0.0, 0.0, 0.5 * 1e-12f64.ln()).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(GpDataset::new(vec![], vec![], 0.0).is_err());
        assert!(GpDataset::new(vec![1.0], vec![1.0, 2.0], 0.0).is_err());
        assert!(GpDataset::new(vec![f64::NAN], vec![1.0], 0.0).is_err());
        assert!(GpDataset::new(vec![0.0], vec![1.0], 0.0).is_ok());
    }

    #[test]
    fn lml_single_point() {
        // K = [[1]]: λ = 1 with σ → 0, τ irrelevant for one point
        let th = HyperParams::new(0.0, 0.0, -400.0).unwrap();
        let d0 = GpDataset::new(vec![0.0], vec![0.0], 0.0).unwrap();
        let l0 = log_marginal_likelihood(KernelKind::SquaredExponential, &th, &d0).unwrap();
        assert!((l0 + HALF_LOG_2PI).abs() < 1e-12);
        assert!((l0 + 0.918939).abs() < 1e-6);

        let d2 = GpDataset::new(vec![0.0], vec![2.0], 0.0).unwrap();
        let l2 = log_marginal_likelihood(KernelKind::SquaredExponential, &th, &d2).unwrap();
        assert!((l2 - (-HALF_LOG_2PI - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_with_zero_residual_is_trace_term() {
        let th = HyperParams::new(-0.4, 0.3, -0.7).unwrap();
        let xs = vec![0.0, 0.2, 0.5, 0.9];
        let d = GpDataset::new(xs.clone(), vec![1.5; 4], 1.5).unwrap();
        let g = lml_gradient(KernelKind::SquaredExponential, &th, &d).unwrap();

        let k = super::super::kernel::kernel_matrix(KernelKind::SquaredExponential, &th, &xs, 0.0);
        let k_inv = k.clone().try_inverse().unwrap();
        let signal = &k - DMatrix::identity(4, 4) * th.noise_variance();
        let tr = |dk: &DMatrix<f64>| -0.5 * (&k_inv * dk).trace();
        let dk_lambda = &signal * 2.0;
        let dk_noise = DMatrix::identity(4, 4) * (2.0 * th.noise_variance());
        let tau2 = th.input_scale().powi(2);
        let dk_tau = DMatrix::from_fn(4, 4, |i, j| signal[(i, j)] * (xs[i] - xs[j]).powi(2) / tau2);
        assert!((g[0] - tr(&dk_tau)).abs() < 1e-10);
        assert!((g[1] - tr(&dk_lambda)).abs() < 1e-10);
        assert!((g[2] - tr(&dk_noise)).abs() < 1e-10);
    }

    #[test]
    fn noiseless_interpolation_at_training_point() {
        let d = GpDataset::new(vec![0.0], vec![1.0], 0.0).unwrap();
        let p = predict(KernelKind::SquaredExponential, &unit_noiseless(), &d, 0.0).unwrap();
        assert!((p.mean - 1.0).abs() < 1e-6);
        assert!(p.variance < 1e-6);
    }

    #[test]
    fn decorrelation_far_from_data() {
        let d = GpDataset::new(vec![0.0], vec![1.0], 0.0).unwrap();
        for x in [10.0, -10.0] {
            let p = predict(KernelKind::SquaredExponential, &unit_noiseless(), &d, x).unwrap();
            assert!(p.mean.abs() < 1e-12);
            assert!((p.variance - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_point_closed_form() {
        let d = GpDataset::new(vec![0.0], vec![1.0], 0.0).unwrap();
        let p = predict(KernelKind::SquaredExponential, &unit_noiseless(), &d, 1.0).unwrap();
        let e = (-0.5f64).exp();
        assert!((p.mean - e).abs() < 1e-10);
        assert!((p.variance - (1.0 - (-1.0f64).exp())).abs() < 1e-10);
        assert!((p.mean - 0.60653).abs() < 1e-5);
        assert!((p.variance - 0.63212).abs() < 1e-5);
    }

    #[test]
    fn observed_space_adds_noise() {
        let th = HyperParams::new(0.0, 0.0, -1.0).unwrap();
        let d = GpDataset::new(vec![0.0, 0.5], vec![1.0, -1.0], 0.0).unwrap();
        let gp = Gp::new(KernelKind::SquaredExponential);
        let lat = gp.predict(&th, &d, 0.3, PredictiveSpace::Latent).unwrap();
        let obs = gp.predict(&th, &d, 0.3, PredictiveSpace::Observed).unwrap();
        assert_eq!(lat.mean, obs.mean);
        assert!((obs.variance - lat.variance - th.noise_variance()).abs() < 1e-14);
    }

    #[test]
    fn variance_non_decreasing_with_distance() {
        let d = GpDataset::new(vec![0.0], vec![0.4], 0.0).unwrap();
        let th = HyperParams::new(0.0, 0.2, -2.0).unwrap();
        let mut prev = -1.0;
        for i in 0..=50 {
            let x = i as f64 * 0.1;
            let p = Gp::new(KernelKind::SquaredExponential)
                .predict(&th, &d, x, PredictiveSpace::Latent)
                .unwrap();
            assert!(p.variance >= prev);
            prev = p.variance;
        }
    }

    #[test]
    fn linear_kernel_centres_inputs() {
        // Shifting every input (and the query) by a constant leaves the
        // centred linear model unchanged.
        let th = HyperParams::new(0.0, 0.5, -1.0).unwrap();
        let gp = Gp::new(KernelKind::Linear);
        let a = GpDataset::new(vec![0.0, 0.3, 1.0], vec![0.1, 0.5, 1.2], 0.0).unwrap();
        let b = GpDataset::new(vec![5.0, 5.3, 6.0], vec![0.1, 0.5, 1.2], 0.0).unwrap();
        let la = gp.log_marginal_likelihood(&th, &a).unwrap();
        let lb = gp.log_marginal_likelihood(&th, &b).unwrap();
        assert!((la - lb).abs() < 1e-10);
        let pa = gp.predict(&th, &a, 0.7, PredictiveSpace::Latent).unwrap();
        let pb = gp.predict(&th, &b, 5.7, PredictiveSpace::Latent).unwrap();
        assert!((pa.mean - pb.mean).abs() < 1e-10);
        assert!((pa.variance - pb.variance).abs() < 1e-10);
    }

    #[test]
    fn constant_targets_detected() {
        assert!(GpDataset::new(vec![0.0, 1.0], vec![2.0, 2.0], 0.0).unwrap().targets_constant());
        assert!(!GpDataset::new(vec![0.0, 1.0], vec![2.0, 2.001], 0.0).unwrap().targets_constant());
    }
}
