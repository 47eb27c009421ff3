//! The voxel lattice, the CAR prior over the log-hyperparameter field and
//! iterated conditional modes.

mod car;
mod icm;
mod lattice;

pub use car::{
    car_conditional_mean, car_log_density, car_prior, CarConfig, CarPrior, CouplingMode, HyperField, SweepSchedule,
};
pub(crate) use icm::voxel_datasets;
pub use icm::{icm_update, local_objective, run_icm, run_icm_observed, IcmReport, IcmUpdate, UpdateOutcome};
pub use lattice::{neighbors, Lattice, VoxelIndex};
