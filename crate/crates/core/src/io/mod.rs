//! `GPV1`/`GPH1` volume files, the scores CSV and the run-configuration
//! file.

mod config;
mod scores;
mod volume_file;

pub use config::RunConfig;
pub use scores::{read_scores, scores_from_csv, scores_to_csv, write_scores};
pub use volume_file::{
    decode, encode, expected_len, field_from_file, field_to_file, read_field_file, read_volume_file, write_atomic,
    write_field_file, write_volume_file, FileKind, VolumeFile, CANONICAL_NAN, HEADER_LEN,
};
