//! Iterated conditional modes over the hyperparameter field.
//!
//! Each update maximizes `LML_v(ℓ_v) + log p(ℓ_v | ℓ_N(v))` with the
//! neighbours held fixed. Sweeps visit every masked voxel once, in a seeded
//! random order by default.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::car::{car_prior, CarConfig, CarPrior, HyperField, SweepSchedule};
use super::lattice::VoxelIndex;
use crate::error::{Error, Result};
use crate::gp::optimize::maximize;
use crate::gp::{Gp, GpDataset, GpSettings, HyperParams, N_HYPER};
use crate::seed;
use crate::volume::VolumeDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    /// The field value moved to a point with objective no lower than before.
    Accepted,
    /// The optimizer found nothing better; value retained.
    Unchanged,
}

#[derive(Debug, Clone, Copy)]
pub struct IcmUpdate {
    pub voxel: VoxelIndex,
    pub params: HyperParams,
    pub objective_before: f64,
    pub objective_after: f64,
    pub outcome: UpdateOutcome,
}

/// Local conditional log-posterior (up to a constant) and its gradient.
pub fn local_objective(
    gp: &Gp,
    data: &GpDataset,
    prior: &CarPrior,
    ell: &HyperParams,
) -> Result<(f64, [f64; N_HYPER])> {
    let (lml, g) = gp.lml_and_gradient(ell, data)?;
    let pg = prior.gradient(ell);
    Ok((lml + prior.log_density(ell), std::array::from_fn(|i| g[i] + pg[i])))
}

/// Maximize the local conditional posterior at `v` starting from the field's
/// current value.
///
/// Constant data yield `DegenerateData`; a failed factorization at the
/// current value is propagated. Callers treat both as no-ops.
pub fn icm_update(
    v: VoxelIndex,
    data_v: &GpDataset,
    settings: &GpSettings,
    field: &HyperField,
    cfg: &CarConfig,
) -> Result<IcmUpdate> {
    let current = field
        .get(v)
        .ok_or_else(|| Error::invalid(format!("voxel {v} is masked out")))?;
    if data_v.targets_constant() {
        return Err(Error::DegenerateData(format!("voxel {v} series is constant")));
    }
    let gp = settings.gp();
    let prior = car_prior(field, cfg, v);
    let (before, _) = local_objective(&gp, data_v, &prior, &current)?;
    let ascent = maximize(
        |x: &[f64; N_HYPER]| local_objective(&gp, data_v, &prior, &HyperParams::from_array(*x)),
        current.to_array(),
        &settings.optimizer,
    )?;
    let candidate = HyperParams::from_array(ascent.x);
    let (params, after, outcome) = if ascent.value >= before && candidate != current {
        (candidate, ascent.value, UpdateOutcome::Accepted)
    } else {
        (current, before, UpdateOutcome::Unchanged)
    };
    Ok(IcmUpdate {
        voxel: v,
        params,
        objective_before: before,
        objective_after: after,
        outcome,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IcmReport {
    pub sweeps: usize,
    pub updates: usize,
    pub accepted: usize,
    pub unchanged: usize,
    /// Voxels skipped because their series is constant.
    pub degenerate: usize,
    /// Voxels skipped because the objective could not be evaluated.
    pub failed: usize,
    /// Accepted updates whose objective decreased (should stay zero).
    pub monotone_violations: usize,
    pub min_delta: f64,
    /// Sum over voxels of LML plus conditional prior log-density, before the
    /// first sweep and after each sweep. Tracked, not guaranteed monotone.
    pub pseudo_objective: Vec<f64>,
}

impl IcmReport {
    pub fn no_ops(&self) -> usize {
        self.unchanged + self.degenerate + self.failed
    }

    fn record(&mut self, outcome: &Result<IcmUpdate>) {
        self.updates += 1;
        match outcome {
            Ok(u) => {
                let delta = u.objective_after - u.objective_before;
                self.min_delta = if self.updates == 1 { delta } else { self.min_delta.min(delta) };
                match u.outcome {
                    UpdateOutcome::Accepted => {
                        self.accepted += 1;
                        if delta < 0.0 {
                            self.monotone_violations += 1;
                        }
                    }
                    UpdateOutcome::Unchanged => self.unchanged += 1,
                }
            }
            Err(Error::DegenerateData(_)) => self.degenerate += 1,
            Err(_) => self.failed += 1,
        }
    }
}

/// Per-voxel GP data for every masked voxel (None elsewhere).
pub(crate) fn voxel_datasets(dataset: &VolumeDataset, prior_mean: f64) -> Result<Vec<Option<GpDataset>>> {
    let lattice = dataset.lattice();
    (0..lattice.n_voxels())
        .map(|v| {
            if lattice.is_masked(v) {
                dataset.gp_data(v, prior_mean).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

fn pseudo_objective(field: &HyperField, data: &[Option<GpDataset>], gp: &Gp, cfg: &CarConfig) -> f64 {
    field
        .lattice()
        .masked_indices()
        .into_iter()
        .filter_map(|v| {
            let ell = field.get(v)?;
            let d = data[v].as_ref()?;
            let lml = gp.log_marginal_likelihood(&ell, d).ok()?;
            Some(lml + car_prior(field, cfg, v).log_density(&ell))
        })
        .sum()
}

/// Run `cfg.sweeps` ICM sweeps from `init`.
pub fn run_icm(
    dataset: &VolumeDataset,
    settings: &GpSettings,
    cfg: &CarConfig,
    init: &HyperField,
) -> Result<(HyperField, IcmReport)> {
    run_icm_observed(dataset, settings, cfg, init, |_, _| {})
}

/// [`run_icm`] with a callback invoked for every successful update, before it
/// is applied, with the field as the update saw it.
pub fn run_icm_observed<O>(
    dataset: &VolumeDataset,
    settings: &GpSettings,
    cfg: &CarConfig,
    init: &HyperField,
    mut observer: O,
) -> Result<(HyperField, IcmReport)>
where
    O: FnMut(&HyperField, &IcmUpdate),
{
    if init.lattice() != dataset.lattice() {
        return Err(Error::MaskMismatch);
    }
    let data = voxel_datasets(dataset, settings.prior_mean)?;
    let gp = settings.gp();
    let mut field = init.clone();
    let mut report = IcmReport {
        sweeps: cfg.sweeps,
        ..Default::default()
    };
    if cfg.sweeps == 0 {
        return Ok((field, report));
    }
    report.pseudo_objective.push(pseudo_objective(&field, &data, &gp, cfg));
    let masked = field.lattice().masked_indices();

    for sweep in 0..cfg.sweeps {
        match cfg.schedule {
            SweepSchedule::RandomSerial => {
                let mut order = masked.clone();
                order.shuffle(&mut seed::stream(cfg.seed, "icm-sweep", sweep as u64));
                for v in order {
                    let data_v = data[v].as_ref().expect("masked voxel has data");
                    let outcome = icm_update(v, data_v, settings, &field, cfg);
                    report.record(&outcome);
                    if let Ok(u) = outcome {
                        observer(&field, &u);
                        field.set(v, u.params);
                    }
                }
            }
            SweepSchedule::Checkerboard => {
                for colour in 0..2 {
                    let batch: Vec<VoxelIndex> = masked
                        .iter()
                        .copied()
                        .filter(|&v| field.lattice().coords(v).iter().sum::<usize>() % 2 == colour)
                        .collect();
                    // same-colour voxels are never neighbours, so every update
                    // in the batch sees the same conditional prior
                    let snapshot = &field;
                    let outcomes: Vec<Result<IcmUpdate>> = batch
                        .par_iter()
                        .map(|&v| {
                            let data_v = data[v].as_ref().expect("masked voxel has data");
                            icm_update(v, data_v, settings, snapshot, cfg)
                        })
                        .collect();
                    for outcome in outcomes {
                        report.record(&outcome);
                        if let Ok(u) = outcome {
                            observer(&field, &u);
                            field.set(u.voxel, u.params);
                        }
                    }
                }
            }
        }
        report.pseudo_objective.push(pseudo_objective(&field, &data, &gp, cfg));
    }
    Ok((field, report))
}
