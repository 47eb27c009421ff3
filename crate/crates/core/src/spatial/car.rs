//! Multivariate conditional-autoregressive prior over the log-hyperparameter
//! field.
//!
//! Each voxel's vector ℓ_v is Gaussian around `Σ_{u∈N(v)} B₀ ℓ_u` with
//! `B₀ = R / |N(v)|` and diagonal covariance `T₀ = diag(t)`.

use std::f64::consts::PI;

use super::lattice::{Lattice, VoxelIndex};
use crate::error::{Error, Result};
use crate::gp::{HyperParams, N_HYPER};

/// Structure of the coupling matrix R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// R = diag(ρ): each component couples to the same component of its neighbours.
    #[default]
    Diagonal,
    /// Row i of R is ρ_i everywhere, mixing all components.
    FullRowConstant,
}

/// How voxels are visited within one ICM sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepSchedule {
    /// Seeded random permutation, updates applied one at a time.
    #[default]
    RandomSerial,
    /// Two-colour checkerboard; same-colour voxels are updated concurrently.
    Checkerboard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarConfig {
    rho: [f64; N_HYPER],
    t: [f64; N_HYPER],
    pub coupling: CouplingMode,
    pub sweeps: usize,
    pub seed: u64,
    pub schedule: SweepSchedule,
}

impl Default for CarConfig {
    fn default() -> Self {
        Self {
            rho: [1.0; N_HYPER],
            t: [0.5; N_HYPER],
            coupling: CouplingMode::Diagonal,
            sweeps: 5,
            seed: 0,
            schedule: SweepSchedule::RandomSerial,
        }
    }
}

impl CarConfig {
    pub fn new(rho: [f64; N_HYPER], t: [f64; N_HYPER]) -> Result<Self> {
        if rho.iter().any(|r| !r.is_finite() || r.abs() > 1.0) {
            return Err(Error::invalid(format!("coupling weights must satisfy |rho| <= 1, got {rho:?}")));
        }
        if t.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(format!("conditional variances must be positive, got {t:?}")));
        }
        Ok(Self {
            rho,
            t,
            ..Self::default()
        })
    }

    pub fn with_sweeps(mut self, sweeps: usize) -> Self {
        self.sweeps = sweeps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_coupling(mut self, coupling: CouplingMode) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_schedule(mut self, schedule: SweepSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn rho(&self) -> [f64; N_HYPER] {
        self.rho
    }

    pub fn t(&self) -> [f64; N_HYPER] {
        self.t
    }

    /// Neighbour pairs whose neighbourhood sizes differ. For such pairs
    /// `B_{v,u} T₀ = T₀ B_{u,v}ᵀ` cannot hold exactly, so the conditionals do
    /// not correspond to a proper joint.
    pub fn symmetry_defects(&self, lattice: &Lattice) -> usize {
        let mut defects = 0;
        for v in lattice.masked_indices() {
            let nv = lattice.neighbors(v);
            for &u in &nv {
                if u > v && lattice.neighbors(u).len() != nv.len() {
                    defects += 1;
                }
            }
        }
        defects
    }
}

/// Per-voxel log-hyperparameters over a lattice; masked-out voxels are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperField {
    lattice: Lattice,
    values: Vec<Option<HyperParams>>,
}

impl HyperField {
    /// Field with `value` at every masked-in voxel.
    pub fn uniform(lattice: Lattice, value: HyperParams) -> Self {
        let values = lattice.mask().iter().map(|&m| m.then_some(value)).collect();
        Self { lattice, values }
    }

    pub fn from_values(lattice: Lattice, values: Vec<Option<HyperParams>>) -> Result<Self> {
        if values.len() != lattice.n_voxels() {
            return Err(Error::invalid("field size does not match lattice"));
        }
        for (v, val) in values.iter().enumerate() {
            match (lattice.is_masked(v), val) {
                (true, Some(hp)) if hp.is_finite() => {}
                (false, None) => {}
                (true, _) => return Err(Error::invalid(format!("voxel {v} is masked in but has no finite value"))),
                (false, Some(_)) => return Err(Error::invalid(format!("voxel {v} is masked out but has a value"))),
            }
        }
        Ok(Self { lattice, values })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn get(&self, v: VoxelIndex) -> Option<HyperParams> {
        self.values.get(v).copied().flatten()
    }

    /// Panics if `v` is masked out.
    pub fn set(&mut self, v: VoxelIndex, value: HyperParams) {
        assert!(self.lattice.is_masked(v), "voxel {v} is masked out");
        self.values[v] = Some(value);
    }

    pub fn values(&self) -> &[Option<HyperParams>] {
        &self.values
    }

    /// One component of every voxel, NaN outside the mask.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.map_or(f64::NAN, |hp| hp.to_array()[c]))
            .collect()
    }
}

/// The Gaussian conditional prior at one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarPrior {
    pub mean: [f64; N_HYPER],
    pub t: [f64; N_HYPER],
}

impl CarPrior {
    pub fn log_density(&self, ell: &HyperParams) -> f64 {
        let x = ell.to_array();
        let mut quad = 0.0;
        let mut log_det = 0.0;
        for i in 0..N_HYPER {
            let d = x[i] - self.mean[i];
            quad += d * d / self.t[i];
            log_det += self.t[i].ln();
        }
        -0.5 * N_HYPER as f64 * (2.0 * PI).ln() - 0.5 * log_det - 0.5 * quad
    }

    pub fn gradient(&self, ell: &HyperParams) -> [f64; N_HYPER] {
        let x = ell.to_array();
        std::array::from_fn(|i| -(x[i] - self.mean[i]) / self.t[i])
    }
}

/// `Σ_{u∈N(v)} B₀ ℓ_u`; zero when `v` has no neighbours.
pub fn car_conditional_mean(field: &HyperField, cfg: &CarConfig, v: VoxelIndex) -> [f64; N_HYPER] {
    let nbrs = field.lattice().neighbors(v);
    let mut mean = [0.0; N_HYPER];
    if nbrs.is_empty() {
        return mean;
    }
    let mut sum = [0.0; N_HYPER];
    for u in &nbrs {
        let ell = field.get(*u).expect("masked neighbour has a value").to_array();
        for i in 0..N_HYPER {
            sum[i] += ell[i];
        }
    }
    let scale = 1.0 / nbrs.len() as f64;
    match cfg.coupling {
        CouplingMode::Diagonal => {
            for i in 0..N_HYPER {
                mean[i] = cfg.rho[i] * sum[i] * scale;
            }
        }
        CouplingMode::FullRowConstant => {
            let total: f64 = sum.iter().sum();
            for i in 0..N_HYPER {
                mean[i] = cfg.rho[i] * total * scale;
            }
        }
    }
    mean
}

pub fn car_prior(field: &HyperField, cfg: &CarConfig, v: VoxelIndex) -> CarPrior {
    CarPrior {
        mean: car_conditional_mean(field, cfg, v),
        t: cfg.t,
    }
}

/// Log conditional prior density of the field's current value at `v`.
pub fn car_log_density(field: &HyperField, cfg: &CarConfig, v: VoxelIndex) -> f64 {
    let ell = field.get(v).expect("voxel is masked in");
    car_prior(field, cfg, v).log_density(&ell)
}
