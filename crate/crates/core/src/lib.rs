//! Voxel-wise Gaussian-process regression of an image phenotype on a
//! continuous behavioural score.
//!
//! Each voxel's z-score series is modelled as a GP function of the subject
//! score. The per-voxel log-hyperparameters are tied together by a
//! conditional-autoregressive prior on the voxel lattice and estimated with
//! iterated conditional modes. On top of the fitted field the crate offers
//! prediction volumes at unobserved scores, kernel comparison by evidence,
//! leave-one-out cross-validation against binned disease-stage inputs, a
//! synthetic block-design phantom and the `GPV1`/`GPH1` file formats.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod gp;
pub mod io;
pub mod phantom;
pub mod seed;
pub mod spatial;
pub mod volume;

pub use error::{Error, Result};
