//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voxgp::gp::{GpDataset, HyperParams, KernelKind};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Covariance written straight from the kernel definitions. The linear kernel
/// acts on inputs centred at their mean.
pub fn dense_covariance(kind: KernelKind, theta: &HyperParams, xs: &[f64]) -> Vec<Vec<f64>> {
    let lambda2 = (2.0 * theta.log_output_scale).exp();
    let tau = theta.log_input_scale.exp();
    let sigma2 = (2.0 * theta.log_noise).exp();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let n = xs.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = match kind {
                KernelKind::SquaredExponential => lambda2 * (-(xs[i] - xs[j]).powi(2) / (2.0 * tau * tau)).exp(),
                KernelKind::Linear => lambda2 * (xs[i] - xbar) * (xs[j] - xbar),
            };
            if i == j {
                k[i][j] += sigma2;
            }
        }
    }
    k
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting; also
/// returns `ln |det a|`.
pub fn solve_with_logdet(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> (Vec<f64>, f64) {
    let n = b.len();
    let mut logdet = 0.0;
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, p);
        b.swap(col, p);
        let pivot = a[col][col];
        logdet += pivot.abs().ln();
        for r in col + 1..n {
            let f = a[r][col] / pivot;
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    (x, logdet)
}

/// Multivariate normal log-density of the targets under the GP prior.
pub fn dense_lml(kind: KernelKind, theta: &HyperParams, data: &GpDataset) -> f64 {
    let k = dense_covariance(kind, theta, data.inputs());
    let r: Vec<f64> = data.targets().iter().map(|y| y - data.mean_value()).collect();
    let (x, logdet) = solve_with_logdet(k, r.clone());
    let quad: f64 = r.iter().zip(&x).map(|(a, b)| a * b).sum();
    let n = r.len() as f64;
    -0.5 * quad - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

pub fn random_theta(rng: &mut ChaCha8Rng) -> HyperParams {
    HyperParams::new(
        rng.random_range(-2.0..1.0),
        rng.random_range(-1.0..1.5),
        rng.random_range(-3.0..0.5),
    )
    .unwrap()
}

pub fn random_data(rng: &mut ChaCha8Rng, n: usize) -> GpDataset {
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| (5.0 * x).sin() + rng.random_range(-0.5..0.5))
        .collect();
    GpDataset::new(xs, ys, rng.random_range(-0.5..0.5)).unwrap()
}

/// Central finite-difference gradient in log-hyperparameter space.
pub fn fd_gradient(f: impl Fn(&HyperParams) -> f64, theta: &HyperParams, h: f64) -> [f64; 3] {
    let x = theta.to_array();
    std::array::from_fn(|i| {
        let mut up = x;
        let mut down = x;
        up[i] += h;
        down[i] -= h;
        (f(&HyperParams::from_array(up)) - f(&HyperParams::from_array(down))) / (2.0 * h)
    })
}

/// Conditional mean and variance of `y2 | y1` for a zero-mean bivariate
/// normal, by midpoint quadrature of the joint density along `y2`.
pub fn conditional_by_quadrature(var1: f64, var2: f64, cov: f64, y1: f64) -> (f64, f64) {
    let det = var1 * var2 - cov * cov;
    let density = |y2: f64| {
        let q = (var2 * y1 * y1 - 2.0 * cov * y1 * y2 + var1 * y2 * y2) / det;
        (-0.5 * q).exp()
    };
    let centre = cov / var1 * y1;
    let half = 12.0 * var2.sqrt();
    let steps = 200_000;
    let h = 2.0 * half / steps as f64;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..steps {
        let y2 = centre - half + (i as f64 + 0.5) * h;
        let p = density(y2);
        z += p;
        m1 += p * y2;
        m2 += p * y2 * y2;
    }
    let mean = m1 / z;
    (mean, m2 / z - mean * mean)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}
