//! Whole-volume orchestration: independent initialization, ICM fitting,
//! prediction volumes, evidence accounting and kernel comparison.

mod dataset;
mod model;

pub use dataset::{ScoreMap, VolumeDataset};
pub(crate) use model::voxel_predictive;
pub use model::{
    compare_models, compare_models_with_prior, fit_volume, fit_volume_observed, initialize_field, logistic,
    predict_volume, predict_volume_in, region_evidence, total_evidence, FitReport, FittedVolumeModel, InitReport,
    ModelComparisonMap, ModelSpec, PredictionVolume, VoxelStatus,
};
