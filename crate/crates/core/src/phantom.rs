//! Synthetic block-design population with two score-dependent active
//! regions.
//!
//! Each subject gets baseline noise per voxel, per-run linear detrending,
//! standardization to unit variance, then a boxcar stimulus response whose
//! amplitude depends on the subject's score and the voxel's region. A
//! voxelwise GLM turns every series into a z-score, giving one z-volume per
//! subject.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed;
use crate::spatial::{Lattice, VoxelIndex};
use crate::volume::{ScoreMap, VolumeDataset};

/// Length of one off/on/off stimulus cycle.
pub const STIMULUS_PERIOD: usize = 48;

/// 0 for phases 0–11, 1 for 12–35, 0 for 36–47.
pub fn reference_function(t: usize) -> f64 {
    let phase = t % STIMULUS_PERIOD;
    if (12..36).contains(&phase) {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    White,
    Ar1(f64),
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Ar1(0.3)
    }
}

/// How the injected amplitude in each region depends on the score α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActivationProfile {
    /// Region A weighted by α, region B by 1 − α.
    #[default]
    CrossFade,
    /// Region A weighted by 2α − 1, region B by 1 − 2α.
    LinearTrend,
    /// Region A peaks mid-range with weight 4α(1 − α), region B gets the
    /// complementary 1 − 4α(1 − α).
    Bump,
}

impl ActivationProfile {
    /// Weights for regions (A, B).
    pub fn weights(self, alpha: f64) -> (f64, f64) {
        match self {
            ActivationProfile::CrossFade => (alpha, 1.0 - alpha),
            ActivationProfile::LinearTrend => (2.0 * alpha - 1.0, 1.0 - 2.0 * alpha),
            ActivationProfile::Bump => {
                let b = 4.0 * alpha * (1.0 - alpha);
                (b, 1.0 - b)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Background,
    A,
    B,
}

impl Region {
    pub fn label(self) -> f64 {
        match self {
            Region::Background => 0.0,
            Region::A => 1.0,
            Region::B => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomConfig {
    pub dims: [usize; 3],
    pub n_runs: usize,
    pub run_length: usize,
    pub scores: Vec<f64>,
    /// Signal magnitude as a fraction of the baseline standard deviation.
    pub m_fraction: f64,
    pub region_a: Vec<VoxelIndex>,
    pub region_b: Vec<VoxelIndex>,
    pub noise_model: NoiseModel,
    pub profile: ActivationProfile,
    pub seed: u64,
}

fn rect(dims: [usize; 3], xs: std::ops::Range<usize>, ys: std::ops::Range<usize>) -> Vec<VoxelIndex> {
    let mut out = Vec::new();
    for z in 0..dims[2] {
        for y in ys.clone() {
            for x in xs.clone() {
                out.push(x + dims[0] * (y + dims[1] * z));
            }
        }
    }
    out
}

impl Default for PhantomConfig {
    fn default() -> Self {
        let dims = [12, 24, 1];
        Self {
            dims,
            n_runs: 8,
            run_length: 48,
            scores: vec![0.0, 0.1, 0.3, 0.7, 0.8, 0.9, 1.0],
            m_fraction: 1.0,
            region_a: rect(dims, 2..6, 4..10),
            region_b: rect(dims, 6..10, 14..20),
            noise_model: NoiseModel::default(),
            profile: ActivationProfile::default(),
            seed: 0,
        }
    }
}

impl PhantomConfig {
    pub fn n_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn series_len(&self) -> usize {
        self.n_runs * self.run_length
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_scores(mut self, scores: Vec<f64>) -> Self {
        self.scores = scores;
        self
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise_model = noise;
        self
    }

    pub fn with_profile(mut self, profile: ActivationProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_voxels();
        if n == 0 {
            return Err(Error::invalid("phantom dims must be positive"));
        }
        if self.n_runs == 0 || self.run_length < 3 || self.run_length % STIMULUS_PERIOD != 0 {
            return Err(Error::invalid(format!(
                "run length {} must be a positive multiple of {STIMULUS_PERIOD}",
                self.run_length
            )));
        }
        if let Some(s) = self.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::invalid(format!("score {s} outside [0, 1]")));
        }
        if !(self.m_fraction.is_finite() && self.m_fraction >= 0.0) {
            return Err(Error::invalid("m_fraction must be finite and nonnegative"));
        }
        if let NoiseModel::Ar1(phi) = self.noise_model {
            if !(phi.abs() < 1.0) {
                return Err(Error::invalid(format!("AR(1) coefficient {phi} must satisfy |phi| < 1")));
            }
        }
        if let Some(v) = self.region_a.iter().chain(&self.region_b).find(|&&v| v >= n) {
            return Err(Error::invalid(format!("region voxel {v} outside dims")));
        }
        if self.region_a.iter().any(|v| self.region_b.contains(v)) {
            return Err(Error::invalid("regions A and B overlap"));
        }
        Ok(())
    }

    pub fn region_of(&self, v: VoxelIndex) -> Region {
        if self.region_a.contains(&v) {
            Region::A
        } else if self.region_b.contains(&v) {
            Region::B
        } else {
            Region::Background
        }
    }

    /// Ground-truth region label per voxel (0 background, 1 A, 2 B).
    pub fn labels(&self) -> Vec<f64> {
        (0..self.n_voxels()).map(|v| self.region_of(v).label()).collect()
    }

    pub fn background(&self) -> Vec<VoxelIndex> {
        (0..self.n_voxels())
            .filter(|&v| self.region_of(v) == Region::Background)
            .collect()
    }
}

/// Residuals of a least-squares intercept-plus-slope fit against 0, 1, …, n−1.
pub fn detrend_run(series: &[f64]) -> Vec<f64> {
    let n = series.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = series.iter().sum::<f64>() / n;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (t, y) in series.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sty += dt * (y - y_mean);
        stt += dt * dt;
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    series
        .iter()
        .enumerate()
        .map(|(t, y)| y - y_mean - slope * (t as f64 - t_mean))
        .collect()
}

/// Sample variance with the n − 1 divisor.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Scale to unit sample variance; the mean is not removed.
pub fn standardize(series: &[f64]) -> Result<Vec<f64>> {
    let var = if series.len() < 2 { 0.0 } else { sample_variance(series) };
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let sd = var.sqrt();
    Ok(series.iter().map(|x| x / sd).collect())
}

/// Injected amplitude at voxel `v` for a subject with score `alpha`.
pub fn effective_beta(alpha: f64, v: VoxelIndex, cfg: &PhantomConfig, sigma_v: f64) -> f64 {
    let beta = cfg.m_fraction * sigma_v;
    let (wa, wb) = cfg.profile.weights(alpha);
    match cfg.region_of(v) {
        Region::A => wa * beta,
        Region::B => wb * beta,
        Region::Background => 0.0,
    }
}

/// Time series for every voxel of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSeries {
    pub alpha: f64,
    /// `series[v]` has length `n_runs · run_length`.
    pub series: Vec<Vec<f64>>,
}

fn baseline_run(noise: NoiseModel, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut e = || rng.sample::<f64, _>(StandardNormal);
    match noise {
        NoiseModel::White => (0..len).map(|_| e()).collect(),
        NoiseModel::Ar1(phi) => {
            let mut x = e() / (1.0 - phi * phi).sqrt();
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                out.push(x);
                x = phi * x + e();
            }
            out
        }
    }
}

/// Standardized, detrended baseline for one voxel (no stimulus).
fn baseline_series(cfg: &PhantomConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut series = Vec::with_capacity(cfg.series_len());
    for _ in 0..cfg.n_runs {
        series.extend(detrend_run(&baseline_run(cfg.noise_model, cfg.run_length, rng)));
    }
    standardize(&series)
}

pub fn generate_subject(cfg: &PhantomConfig, alpha: f64, rng: &mut ChaCha8Rng) -> Result<SubjectSeries> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("score {alpha} outside [0, 1]")));
    }
    let reference: Vec<f64> = (0..cfg.series_len()).map(reference_function).collect();
    let mut series = Vec::with_capacity(cfg.n_voxels());
    for v in 0..cfg.n_voxels() {
        let mut s = baseline_series(cfg, rng)?;
        let beta = effective_beta(alpha, v, cfg, sample_variance(&s).sqrt());
        if beta != 0.0 {
            for (x, r) in s.iter_mut().zip(&reference) {
                *x += beta * r;
            }
        }
        series.push(s);
    }
    Ok(SubjectSeries { alpha, series })
}

/// OLS slope on the reference function divided by its standard error.
pub fn glm_z(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let r_mean = (0..series.len()).map(reference_function).sum::<f64>() / n;
    let y_mean = series.iter().sum::<f64>() / n;
    let (mut sry, mut srr) = (0.0, 0.0);
    for (t, y) in series.iter().enumerate() {
        let dr = reference_function(t) - r_mean;
        sry += dr * (y - y_mean);
        srr += dr * dr;
    }
    let beta = sry / srr;
    let rss: f64 = series
        .iter()
        .enumerate()
        .map(|(t, y)| (y - y_mean - beta * (reference_function(t) - r_mean)).powi(2))
        .sum();
    let se = (rss / (n - 2.0) / srr).sqrt();
    beta / se
}

pub fn glm_zscores(subject: &SubjectSeries) -> Vec<f64> {
    subject.series.iter().map(|s| glm_z(s)).collect()
}

/// Simulated dataset together with its ground truth.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub dataset: VolumeDataset,
    pub labels: Vec<f64>,
}

/// One z-volume per configured score; subject `i` draws from its own stream.
pub fn generate_population(cfg: &PhantomConfig) -> Result<Phantom> {
    cfg.validate()?;
    let zvols = cfg
        .scores
        .par_iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let mut rng = seed::stream(cfg.seed, "subject", i as u64);
            generate_subject(cfg, alpha, &mut rng).map(|s| glm_zscores(&s))
        })
        .collect::<Result<Vec<_>>>()?;
    let dataset = VolumeDataset::new(Lattice::full(cfg.dims)?, cfg.scores.clone(), zvols, ScoreMap::unit())?;
    Ok(Phantom {
        dataset,
        labels: cfg.labels(),
    })
}
