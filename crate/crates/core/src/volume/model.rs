use std::sync::Arc;

use rayon::prelude::*;

use super::dataset::VolumeDataset;
use crate::error::{Error, Result};
use crate::gp::{FitStatus, Gp, GpDataset, GpSettings, HyperParams, KernelKind, PredictiveGaussian, PredictiveSpace};
use crate::spatial::{run_icm_observed, voxel_datasets, CarConfig, HyperField, IcmReport, IcmUpdate, VoxelIndex};

/// Kernel/optimizer settings plus the spatial prior: everything a volume
/// fit needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub gp: GpSettings,
    pub car: CarConfig,
}

impl ModelSpec {
    pub fn new(kind: KernelKind) -> Self {
        Self {
            gp: GpSettings::new(kind),
            car: CarConfig::default(),
        }
    }

    pub fn with_car(mut self, car: CarConfig) -> Self {
        self.car = car;
        self
    }

    pub fn with_kind(mut self, kind: KernelKind) -> Self {
        self.gp.kind = kind;
        self
    }
}

/// Status of a voxel after fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxelStatus {
    Fitted(FitStatus),
    /// Initial fit errored; the default start was used instead.
    Failed,
}

impl VoxelStatus {
    pub fn label(self) -> &'static str {
        match self {
            VoxelStatus::Fitted(s) => s.label(),
            VoxelStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitReport {
    /// Per voxel, None outside the mask.
    pub status: Vec<Option<VoxelStatus>>,
    pub failures: usize,
    pub degenerate: usize,
}

/// Independent maximum-likelihood fit at every masked voxel from ℓ = 0.
pub fn initialize_field(dataset: &VolumeDataset, settings: &GpSettings) -> Result<(HyperField, InitReport)> {
    let lattice = dataset.lattice().clone();
    let data = voxel_datasets(dataset, settings.prior_mean)?;
    let gp = settings.gp();
    let start = HyperParams::default();
    let fits: Vec<Option<(HyperParams, VoxelStatus)>> = data
        .par_iter()
        .map(|d| {
            d.as_ref().map(|d| match gp.fit(d, &start, &settings.optimizer) {
                Ok(fit) => (fit.params, VoxelStatus::Fitted(fit.status)),
                Err(_) => (start, VoxelStatus::Failed),
            })
        })
        .collect();
    let status: Vec<Option<VoxelStatus>> = fits.iter().map(|f| f.map(|(_, s)| s)).collect();
    let values = fits.iter().map(|f| f.map(|(p, _)| p)).collect();
    let field = HyperField::from_values(lattice, values)?;
    let failures = status.iter().filter(|s| **s == Some(VoxelStatus::Failed)).count();
    let degenerate = status
        .iter()
        .filter(|s| **s == Some(VoxelStatus::Fitted(FitStatus::Degenerate)))
        .count();
    Ok((
        field,
        InitReport {
            status,
            failures,
            degenerate,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Per-voxel LML at the final field, NaN outside the mask.
    pub voxel_lml: Vec<f64>,
    pub init: InitReport,
    /// Total evidence of the independent initialization.
    pub init_evidence: f64,
    pub icm: IcmReport,
}

/// A fitted hyperparameter field together with its data and settings.
#[derive(Debug, Clone)]
pub struct FittedVolumeModel {
    pub spec: ModelSpec,
    pub field: HyperField,
    pub dataset: Arc<VolumeDataset>,
    pub report: FitReport,
}

fn voxel_lml(dataset: &VolumeDataset, gp: &Gp, prior_mean: f64, field: &HyperField) -> Result<Vec<f64>> {
    let data = voxel_datasets(dataset, prior_mean)?;
    Ok(data
        .par_iter()
        .enumerate()
        .map(|(v, d)| match (d, field.get(v)) {
            (Some(d), Some(ell)) => gp.log_marginal_likelihood(&ell, d).unwrap_or(f64::NEG_INFINITY),
            _ => f64::NAN,
        })
        .collect())
}

fn masked_sum(values: &[f64], mask: &[bool]) -> f64 {
    values.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v).sum()
}

/// Independent initialization followed by `spec.car.sweeps` ICM sweeps.
pub fn fit_volume(dataset: Arc<VolumeDataset>, spec: &ModelSpec) -> Result<FittedVolumeModel> {
    fit_volume_observed(dataset, spec, |_, _| {})
}

/// [`fit_volume`] forwarding every ICM update to `observer`.
pub fn fit_volume_observed<O>(dataset: Arc<VolumeDataset>, spec: &ModelSpec, observer: O) -> Result<FittedVolumeModel>
where
    O: FnMut(&HyperField, &IcmUpdate),
{
    let (init_field, init) = initialize_field(&dataset, &spec.gp)?;
    let gp = spec.gp.gp();
    let init_lml = voxel_lml(&dataset, &gp, spec.gp.prior_mean, &init_field)?;
    let init_evidence = masked_sum(&init_lml, dataset.lattice().mask());
    let (field, icm) = run_icm_observed(&dataset, &spec.gp, &spec.car, &init_field, observer)?;
    let voxel_lml = if spec.car.sweeps == 0 {
        init_lml
    } else {
        voxel_lml(&dataset, &gp, spec.gp.prior_mean, &field)?
    };
    Ok(FittedVolumeModel {
        spec: *spec,
        field,
        dataset,
        report: FitReport {
            voxel_lml,
            init,
            init_evidence,
            icm,
        },
    })
}

impl FittedVolumeModel {
    /// Wrap an externally supplied field (e.g. read from disk).
    pub fn from_field(dataset: Arc<VolumeDataset>, spec: &ModelSpec, field: HyperField) -> Result<Self> {
        if field.lattice() != dataset.lattice() {
            return Err(Error::MaskMismatch);
        }
        let voxel_lml = voxel_lml(&dataset, &spec.gp.gp(), spec.gp.prior_mean, &field)?;
        let init_evidence = masked_sum(&voxel_lml, dataset.lattice().mask());
        let n = dataset.lattice().n_voxels();
        Ok(Self {
            spec: *spec,
            field,
            dataset,
            report: FitReport {
                voxel_lml,
                init: InitReport {
                    status: vec![None; n],
                    failures: 0,
                    degenerate: 0,
                },
                init_evidence,
                icm: IcmReport::default(),
            },
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.spec.gp.kind
    }
}

/// Predictive distribution at one voxel. A constant training series carries
/// no information about the score dependence and is predicted as that
/// constant, with only the noise variance in observation space.
pub(crate) fn voxel_predictive(
    gp: &Gp,
    data: &GpDataset,
    theta: &HyperParams,
    x_norm: f64,
    space: PredictiveSpace,
) -> PredictiveGaussian {
    let noise = match space {
        PredictiveSpace::Latent => 0.0,
        PredictiveSpace::Observed => theta.noise_variance(),
    };
    if data.targets_constant() {
        return PredictiveGaussian {
            mean: data.targets()[0],
            variance: noise,
        };
    }
    gp.predict(theta, data, x_norm, space).unwrap_or_else(|_| PredictiveGaussian {
        mean: data.mean_value(),
        variance: theta.signal_variance() + noise,
    })
}

/// Mean and variance volumes at one query score.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVolume {
    pub query_score: f64,
    pub mean_vol: Vec<f64>,
    pub var_vol: Vec<f64>,
    /// Query lies outside the declared raw score range.
    pub extrapolated: bool,
}

/// Latent-function prediction at raw score `x_star_raw`; NaN outside the mask.
pub fn predict_volume(model: &FittedVolumeModel, x_star_raw: f64) -> PredictionVolume {
    predict_volume_in(model, x_star_raw, PredictiveSpace::Latent)
}

pub fn predict_volume_in(model: &FittedVolumeModel, x_star_raw: f64, space: PredictiveSpace) -> PredictionVolume {
    let ds = &model.dataset;
    let map = ds.score_map();
    let x = map.normalize(x_star_raw);
    let gp = model.spec.gp.gp();
    let inputs = ds.normalized_scores();
    let (mean_vol, var_vol): (Vec<f64>, Vec<f64>) = (0..ds.lattice().n_voxels())
        .into_par_iter()
        .map(|v| match model.field.get(v) {
            Some(theta) => {
                let data = GpDataset::new(inputs.clone(), ds.voxel_series(v), model.spec.gp.prior_mean)
                    .expect("validated dataset");
                let p = voxel_predictive(&gp, &data, &theta, x, space);
                (p.mean, p.variance)
            }
            None => (f64::NAN, f64::NAN),
        })
        .unzip();
    PredictionVolume {
        query_score: x_star_raw,
        mean_vol,
        var_vol,
        extrapolated: !map.contains(x_star_raw),
    }
}

/// Sum of per-voxel LML with the field fixed at its estimate.
pub fn total_evidence(model: &FittedVolumeModel) -> f64 {
    masked_sum(&model.report.voxel_lml, model.field.lattice().mask())
}

/// Evidence restricted to `voxels` (masked-out entries ignored).
pub fn region_evidence(model: &FittedVolumeModel, voxels: &[VoxelIndex]) -> f64 {
    voxels
        .iter()
        .filter(|&&v| model.field.lattice().is_masked(v))
        .map(|&v| model.report.voxel_lml[v])
        .sum()
}

/// Per-voxel evidence comparison of model a against model b.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelComparisonMap {
    /// `L_a,v − L_b,v`; NaN outside the mask.
    pub log_bf_vol: Vec<f64>,
    /// Posterior probability of model b (the linear model in the usual
    /// SE-vs-linear comparison); NaN outside the mask.
    pub p_linear_vol: Vec<f64>,
    pub total_a: f64,
    pub total_b: f64,
    /// `(total_a − total_b) / masked voxel count`, in nats.
    pub per_voxel_log_diff: f64,
    /// `exp(per_voxel_log_diff)`: the same quantity as an odds ratio.
    pub per_voxel_odds: f64,
}

/// Numerically stable `1 / (1 + e^{-x})`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Compare under equal prior model probabilities.
pub fn compare_models(a: &FittedVolumeModel, b: &FittedVolumeModel) -> Result<ModelComparisonMap> {
    compare_models_with_prior(a, b, 0.0)
}

/// `log_prior_odds` is log p(b)/p(a).
pub fn compare_models_with_prior(
    a: &FittedVolumeModel,
    b: &FittedVolumeModel,
    log_prior_odds: f64,
) -> Result<ModelComparisonMap> {
    let lattice = a.field.lattice();
    if lattice != b.field.lattice() {
        return Err(Error::MaskMismatch);
    }
    let n = lattice.n_voxels();
    let mut log_bf_vol = vec![f64::NAN; n];
    let mut p_linear_vol = vec![f64::NAN; n];
    for v in lattice.masked_indices() {
        let bf = a.report.voxel_lml[v] - b.report.voxel_lml[v];
        log_bf_vol[v] = bf;
        p_linear_vol[v] = logistic(log_prior_odds - bf);
    }
    let total_a = total_evidence(a);
    let total_b = total_evidence(b);
    let per_voxel_log_diff = (total_a - total_b) / lattice.n_masked() as f64;
    Ok(ModelComparisonMap {
        log_bf_vol,
        p_linear_vol,
        total_a,
        total_b,
        per_voxel_log_diff,
        per_voxel_odds: per_voxel_log_diff.exp(),
    })
}
