//! Closed-form conditioning of a multivariate Gaussian on a subset of its
//! coordinates.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Mean and covariance of the unobserved coordinates given `observed_vals`
/// at `observed_idx`.
///
/// Uses the standard identity
/// `μ_u + Σ_uo Σ_oo⁻¹ (y_o − μ_o)` and `Σ_uu − Σ_uo Σ_oo⁻¹ Σ_ou`.
/// The returned block keeps the original order of the unobserved indices.
pub fn condition_gaussian(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    observed_idx: &[usize],
    observed_vals: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = mu.len();
    if sigma.shape() != (n, n) {
        return Err(Error::invalid("covariance shape does not match mean"));
    }
    if observed_idx.len() != observed_vals.len() {
        return Err(Error::invalid("observed index and value counts differ"));
    }
    let mut is_obs = vec![false; n];
    for &i in observed_idx {
        if i >= n || is_obs[i] {
            return Err(Error::invalid(format!("bad observed index {i}")));
        }
        is_obs[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_obs[i]).collect();
    let pick = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| sigma[(rows[r], cols[c])])
    };

    let mu_u = DVector::from_iterator(free.len(), free.iter().map(|&i| mu[i]));
    let sigma_uu = pick(&free, &free);
    if observed_idx.is_empty() {
        return Ok((mu_u, sigma_uu));
    }

    let sigma_oo = pick(observed_idx, observed_idx);
    let sigma_uo = pick(&free, observed_idx);
    let chol = Cholesky::new(sigma_oo).ok_or(Error::FactorizationFailure { jitter: 0.0 })?;

    let resid = DVector::from_iterator(
        observed_idx.len(),
        observed_idx.iter().zip(observed_vals.iter()).map(|(&i, &y)| y - mu[i]),
    );
    let mean = mu_u + &sigma_uo * chol.solve(&resid);
    let gain = chol.solve(&sigma_uo.transpose());
    let mut cov = sigma_uu - &sigma_uo * gain;
    // restore exact symmetry lost to rounding
    let cov_t = cov.transpose();
    cov = (cov + cov_t) * 0.5;
    Ok((mean, cov))
}
