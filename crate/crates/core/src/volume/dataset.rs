use crate::error::{Error, Result};
use crate::gp::GpDataset;
use crate::spatial::{Lattice, VoxelIndex};

/// Affine map from the raw behavioural scale (e.g. MMSE 0–30) onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreMap {
    pub raw_min: f64,
    pub raw_max: f64,
}

impl ScoreMap {
    pub fn new(raw_min: f64, raw_max: f64) -> Result<Self> {
        if !(raw_min.is_finite() && raw_max.is_finite() && raw_max > raw_min) {
            return Err(Error::invalid(format!("invalid score range [{raw_min}, {raw_max}]")));
        }
        Ok(Self { raw_min, raw_max })
    }

    pub fn unit() -> Self {
        Self {
            raw_min: 0.0,
            raw_max: 1.0,
        }
    }

    pub fn normalize(&self, raw: f64) -> f64 {
        (raw - self.raw_min) / (self.raw_max - self.raw_min)
    }

    pub fn denormalize(&self, unit: f64) -> f64 {
        self.raw_min + unit * (self.raw_max - self.raw_min)
    }

    pub fn contains(&self, raw: f64) -> bool {
        raw >= self.raw_min && raw <= self.raw_max
    }
}

/// Per-subject z-score volumes over a common lattice plus each subject's
/// behavioural score on the raw scale.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeDataset {
    lattice: Lattice,
    scores: Vec<f64>,
    zvols: Vec<Vec<f64>>,
    score_map: ScoreMap,
}

impl VolumeDataset {
    pub fn new(lattice: Lattice, scores: Vec<f64>, zvols: Vec<Vec<f64>>, score_map: ScoreMap) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 subjects, got {}", scores.len())));
        }
        if zvols.len() != scores.len() {
            return Err(Error::invalid(format!(
                "{} scores but {} volumes",
                scores.len(),
                zvols.len()
            )));
        }
        for (i, &s) in scores.iter().enumerate() {
            if !s.is_finite() || !score_map.contains(s) {
                return Err(Error::invalid(format!(
                    "subject {i} score {s} outside [{}, {}]",
                    score_map.raw_min, score_map.raw_max
                )));
            }
        }
        let masked = lattice.masked_indices();
        for (i, vol) in zvols.iter().enumerate() {
            if vol.len() != lattice.n_voxels() {
                return Err(Error::invalid(format!("volume {i} does not match lattice dims")));
            }
            if let Some(&v) = masked.iter().find(|&&v| !vol[v].is_finite()) {
                return Err(Error::invalid(format!("volume {i} has a non-finite value at masked voxel {v}")));
            }
        }
        Ok(Self {
            lattice,
            scores,
            zvols,
            score_map,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn zvols(&self) -> &[Vec<f64>] {
        &self.zvols
    }

    pub fn score_map(&self) -> ScoreMap {
        self.score_map
    }

    pub fn n_subjects(&self) -> usize {
        self.scores.len()
    }

    pub fn normalized_scores(&self) -> Vec<f64> {
        self.scores.iter().map(|&s| self.score_map.normalize(s)).collect()
    }

    /// One voxel's z-scores across subjects.
    pub fn voxel_series(&self, v: VoxelIndex) -> Vec<f64> {
        self.zvols.iter().map(|vol| vol[v]).collect()
    }

    /// GP training data for voxel `v` on the normalized score scale.
    pub fn gp_data(&self, v: VoxelIndex, prior_mean: f64) -> Result<GpDataset> {
        GpDataset::new(self.normalized_scores(), self.voxel_series(v), prior_mean)
    }

    /// The subjects at `keep`, in that order.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        Self::new(
            self.lattice.clone(),
            keep.iter().map(|&i| self.scores[i]).collect(),
            keep.iter().map(|&i| self.zvols[i].clone()).collect(),
            self.score_map,
        )
    }

    /// Every subject except `i`.
    pub fn without(&self, i: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n_subjects()).filter(|&j| j != i).collect();
        self.subset(&keep)
    }

    /// Same volumes with replaced raw scores.
    pub fn with_scores(&self, scores: Vec<f64>) -> Result<Self> {
        Self::new(self.lattice.clone(), scores, self.zvols.clone(), self.score_map)
    }
}
