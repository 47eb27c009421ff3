//! Leave-one-out cross-validation and disease-stage binning.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::{normal_log_density, GpDataset, PredictiveSpace};
use crate::volume::{fit_volume, voxel_predictive, FittedVolumeModel, ModelSpec, VolumeDataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSegment {
    /// Inclusive upper bound on the raw scale.
    pub upper: f64,
    pub representative: f64,
}

/// Piecewise-constant map from raw scores to group representatives.
///
/// Segment `k` covers `(upper_{k-1}, upper_k]`; the first segment is open
/// below. Scores above the last bound are kept as-is when `passthrough` is
/// set and rejected otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningRule {
    segments: Vec<BinSegment>,
    passthrough: bool,
}

impl BinningRule {
    pub fn new(segments: Vec<BinSegment>, passthrough: bool) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("binning rule needs at least one segment"));
        }
        let mut lower = f64::NEG_INFINITY;
        for s in &segments {
            if !(s.upper.is_finite() && s.representative.is_finite()) {
                return Err(Error::invalid("binning bounds must be finite"));
            }
            if s.upper <= lower {
                return Err(Error::invalid(format!("bound {} is not above {lower}", s.upper)));
            }
            if !(s.representative > lower && s.representative <= s.upper) {
                return Err(Error::invalid(format!(
                    "representative {} lies outside its segment ({lower}, {}]",
                    s.representative, s.upper
                )));
            }
            lower = s.upper;
        }
        Ok(Self { segments, passthrough })
    }

    /// Groups `≤26 → 24`, `27–29 → 27`, `30 → 30` on the MMSE scale.
    pub fn mmse_default() -> Self {
        Self::new(
            vec![
                BinSegment {
                    upper: 26.0,
                    representative: 24.0,
                },
                BinSegment {
                    upper: 29.0,
                    representative: 27.0,
                },
                BinSegment {
                    upper: 30.0,
                    representative: 30.0,
                },
            ],
            false,
        )
        .expect("static rule")
    }

    pub fn segments(&self) -> &[BinSegment] {
        &self.segments
    }

    pub fn passthrough(&self) -> bool {
        self.passthrough
    }

    pub fn with_passthrough(mut self, on: bool) -> Self {
        self.passthrough = on;
        self
    }

    pub fn representatives(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.representative).collect()
    }

    /// Whether consecutive representatives are evenly spaced.
    pub fn is_equidistant(&self) -> bool {
        let r = self.representatives();
        if r.len() < 3 {
            return true;
        }
        let step = r[1] - r[0];
        let tol = 1e-9 * step.abs().max(1.0);
        r.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= tol)
    }

    pub fn bin(&self, score: f64) -> Result<f64> {
        if let Some(s) = self.segments.iter().find(|s| score <= s.upper) {
            return Ok(s.representative);
        }
        if self.passthrough && score.is_finite() {
            Ok(score)
        } else {
            Err(Error::UncoveredScore(score))
        }
    }
}

/// Parses `"upper:rep,upper:rep,…"`, e.g. `"26:24,29:27,30:30"`.
impl FromStr for BinningRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let segments = s
            .split(',')
            .map(|part| {
                let (u, r) = part
                    .split_once(':')
                    .ok_or_else(|| Error::invalid(format!("bin segment `{part}` is not upper:representative")))?;
                let num = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("`{t}` is not a number")))
                };
                Ok(BinSegment {
                    upper: num(u)?,
                    representative: num(r)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(segments, false)
    }
}

impl fmt::Display for BinningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", s.upper, s.representative)?;
        }
        Ok(())
    }
}

pub fn apply_binning(scores: &[f64], rule: &BinningRule) -> Result<Vec<f64>> {
    scores.iter().map(|&s| rule.bin(s)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvEntry {
    pub subject: usize,
    pub score: f64,
    /// Training-input value this subject would get (the score itself for a
    /// continuous model).
    pub representative: f64,
    pub distance: f64,
    /// Mean over masked voxels of the held-out predictive log-density; NaN
    /// when the fold failed.
    pub pred_logdensity: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub label: String,
    pub entries: Vec<CvEntry>,
    /// Mean of `pred_logdensity` over successful folds.
    pub overall: f64,
}

impl CvReport {
    pub fn n_failed(&self) -> usize {
        self.entries.iter().filter(|e| e.failed).count()
    }
}

/// Fit on every subject except `held_out`, binning the training scores when
/// a rule is given.
pub fn fit_fold(
    dataset: &VolumeDataset,
    held_out: usize,
    spec: &ModelSpec,
    binning: Option<&BinningRule>,
) -> Result<FittedVolumeModel> {
    let mut train = dataset.without(held_out)?;
    if let Some(rule) = binning {
        train = train.with_scores(apply_binning(train.scores(), rule)?)?;
    }
    fit_volume(Arc::new(train), spec)
}

/// Mean over masked voxels of the noise-inclusive predictive log-density of
/// `zvol` at `raw_score`.
pub fn held_out_log_density(model: &FittedVolumeModel, raw_score: f64, zvol: &[f64]) -> f64 {
    let ds = &model.dataset;
    let x = ds.score_map().normalize(raw_score);
    let gp = model.spec.gp.gp();
    let inputs = ds.normalized_scores();
    let masked = ds.lattice().masked_indices();
    let total: f64 = masked
        .par_iter()
        .map(|&v| {
            let theta = model.field.get(v).expect("masked voxel has params");
            let data = GpDataset::new(inputs.clone(), ds.voxel_series(v), model.spec.gp.prior_mean)
                .expect("validated dataset");
            let p = voxel_predictive(&gp, &data, &theta, x, PredictiveSpace::Observed);
            normal_log_density(zvol[v], p.mean, p.variance)
        })
        .sum();
    total / masked.len() as f64
}

pub fn loo_cv(dataset: &VolumeDataset, spec: &ModelSpec, binning: Option<&BinningRule>) -> Result<CvReport> {
    let n = dataset.n_subjects();
    if n < 3 {
        return Err(Error::invalid(format!("cross-validation needs at least 3 subjects, got {n}")));
    }
    let representatives = match binning {
        Some(rule) => apply_binning(dataset.scores(), rule)?,
        None => dataset.scores().to_vec(),
    };
    let entries: Vec<CvEntry> = (0..n)
        .into_par_iter()
        .map(|i| {
            let score = dataset.scores()[i];
            let density = fit_fold(dataset, i, spec, binning)
                .map(|m| held_out_log_density(&m, score, &dataset.zvols()[i]))
                .ok()
                .filter(|d| d.is_finite());
            CvEntry {
                subject: i,
                score,
                representative: representatives[i],
                distance: (score - representatives[i]).abs(),
                pred_logdensity: density.unwrap_or(f64::NAN),
                failed: density.is_none(),
            }
        })
        .collect();
    let ok: Vec<f64> = entries.iter().filter(|e| !e.failed).map(|e| e.pred_logdensity).collect();
    let overall = if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().sum::<f64>() / ok.len() as f64
    };
    let label = match binning {
        Some(_) => "binned",
        None => "continuous",
    };
    Ok(CvReport {
        label: label.to_string(),
        entries,
        overall,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub distance: f64,
    pub count: usize,
    pub mean_continuous: f64,
    pub mean_binned: f64,
}

fn bucket_key(d: f64) -> i64 {
    (d * 1e9).round() as i64
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Mean held-out log-density per distance-to-representative bucket for both
/// models, ordered by distance. Distances come from the binned report.
pub fn distance_profile(continuous: &CvReport, binned: &CvReport) -> Result<Vec<ProfileRow>> {
    let same = continuous.entries.len() == binned.entries.len()
        && continuous
            .entries
            .iter()
            .zip(&binned.entries)
            .all(|(a, b)| a.subject == b.subject && a.score == b.score);
    if !same || continuous.entries.is_empty() {
        return Err(Error::SubjectMismatch);
    }
    let mut keys: Vec<i64> = binned.entries.iter().map(|e| bucket_key(e.distance)).collect();
    keys.sort_unstable();
    keys.dedup();
    Ok(keys
        .into_iter()
        .map(|k| {
            let members: Vec<usize> = (0..binned.entries.len())
                .filter(|&i| bucket_key(binned.entries[i].distance) == k)
                .collect();
            let pick = |r: &CvReport| -> Vec<f64> {
                members
                    .iter()
                    .map(|&i| &r.entries[i])
                    .filter(|e| !e.failed)
                    .map(|e| e.pred_logdensity)
                    .collect()
            };
            ProfileRow {
                distance: binned.entries[members[0]].distance,
                count: members.len(),
                mean_continuous: mean(&pick(continuous)),
                mean_binned: mean(&pick(binned)),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelKind;
    use crate::spatial::{CarConfig, Lattice};
    use crate::volume::ScoreMap;

    #[test]
    fn default_rule_examples() {
        let r = BinningRule::mmse_default();
        assert_eq!(r.bin(22.0).unwrap(), 24.0);
        assert_eq!(r.bin(26.0).unwrap(), 24.0);
        assert_eq!(r.bin(28.0).unwrap(), 27.0);
        assert_eq!(r.bin(30.0).unwrap(), 30.0);
        assert!(r.is_equidistant());
        assert!(matches!(r.bin(31.0), Err(Error::UncoveredScore(_))));
        assert_eq!(r.clone().with_passthrough(true).bin(31.0).unwrap(), 31.0);
    }

    #[test]
    fn group_sizes_match_roster() {
        let roster = [20.0, 22.0, 26.0, 26.0, 26.0, 27.0, 28.0, 28.0, 29.0, 30.0, 30.0, 30.0, 30.0, 30.0, 30.0];
        let b = apply_binning(&roster, &BinningRule::mmse_default()).unwrap();
        assert_eq!(b.iter().filter(|&&x| x == 24.0).count(), 5);
        assert_eq!(b.iter().filter(|&&x| x == 27.0).count(), 4);
        assert_eq!(b.iter().filter(|&&x| x == 30.0).count(), 6);
    }

    #[test]
    fn parsing() {
        let r: BinningRule = "26:24,29:27,30:30".parse().unwrap();
        assert_eq!(r, BinningRule::mmse_default());
        assert_eq!(r.to_string(), "26:24,29:27,30:30");
        assert!("26:24,25:27".parse::<BinningRule>().is_err());
        assert!("26-24".parse::<BinningRule>().is_err());
        assert!("26:x".parse::<BinningRule>().is_err());
        assert!("26:27".parse::<BinningRule>().is_err());
        let ph: BinningRule = "0.35:0,0.65:0.5,1:1".parse().unwrap();
        assert!(ph.is_equidistant());
        let lopsided: BinningRule = "0.35:0,0.65:0.6,1:1".parse().unwrap();
        assert!(!lopsided.is_equidistant());
    }

    #[test]
    fn uncovered_score() {
        let r: BinningRule = "0.35:0,0.65:0.5".parse().unwrap();
        assert!(matches!(apply_binning(&[0.2, 1.0], &r), Err(Error::UncoveredScore(s)) if s == 1.0));
    }

    fn tiny(identical: bool) -> VolumeDataset {
        let scores = vec![0.0, 0.1, 0.3, 0.7, 0.9, 1.0];
        let zvols = scores
            .iter()
            .map(|&s: &f64| {
                (0..3)
                    .map(|v| if identical { v as f64 * 0.5 } else { (3.0 * s + v as f64).sin() })
                    .collect()
            })
            .collect();
        VolumeDataset::new(Lattice::full([3, 1, 1]).unwrap(), scores, zvols, ScoreMap::unit()).unwrap()
    }

    fn spec() -> ModelSpec {
        ModelSpec::new(KernelKind::SquaredExponential).with_car(CarConfig::default().with_sweeps(1))
    }

    #[test]
    fn identical_volumes_make_binning_irrelevant() {
        let ds = tiny(true);
        let rule: BinningRule = "0.35:0,0.65:0.5,1:1".parse().unwrap();
        let c = loo_cv(&ds, &spec(), None).unwrap();
        let b = loo_cv(&ds, &spec(), Some(&rule)).unwrap();
        assert_eq!(c.n_failed(), 0);
        assert!((c.overall - b.overall).abs() <= 1e-6);
        for (x, y) in c.entries.iter().zip(&b.entries) {
            assert!((x.pred_logdensity - y.pred_logdensity).abs() <= 1e-6);
        }
    }

    #[test]
    fn report_shape() {
        let ds = tiny(false);
        let c = loo_cv(&ds, &spec(), None).unwrap();
        assert_eq!(c.entries.len(), 6);
        assert_eq!(c.label, "continuous");
        assert!(c.entries.iter().all(|e| e.distance == 0.0 && e.pred_logdensity.is_finite()));
        let too_small = ds.subset(&[0, 1]).unwrap();
        assert!(loo_cv(&too_small, &spec(), None).is_err());
    }

    #[test]
    fn fold_isolation() {
        let ds = tiny(false);
        let mut z = ds.zvols().to_vec();
        z[2] = vec![1e6, -3e5, 42.0];
        let garbage = VolumeDataset::new(ds.lattice().clone(), ds.scores().to_vec(), z, ds.score_map()).unwrap();
        let a = fit_fold(&ds, 2, &spec(), None).unwrap();
        let b = fit_fold(&garbage, 2, &spec(), None).unwrap();
        assert_eq!(a.field, b.field);
    }

    fn entry(subject: usize, distance: f64, d: f64) -> CvEntry {
        CvEntry {
            subject,
            score: subject as f64,
            representative: subject as f64 - distance,
            distance,
            pred_logdensity: d,
            failed: false,
        }
    }

    fn report(entries: Vec<CvEntry>) -> CvReport {
        CvReport {
            label: String::new(),
            overall: 0.0,
            entries,
        }
    }

    #[test]
    fn profile_groups() {
        let c = report(vec![entry(0, 0.0, -1.0), entry(1, 0.0, -2.0), entry(2, 0.0, -3.0)]);
        let b = report(vec![entry(0, 0.1, -1.5), entry(1, 0.0, -2.5), entry(2, 0.1, -3.5)]);
        let rows = distance_profile(&c, &b).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].distance, 0.0);
        assert_eq!(rows[0].mean_binned, -2.5);
        assert_eq!(rows[1].count, 2);
        assert_eq!(rows[1].mean_continuous, -2.0);
        let single = distance_profile(&c, &c).unwrap();
        assert_eq!(single.len(), 1);
        assert!(matches!(distance_profile(&c, &report(vec![])), Err(Error::SubjectMismatch)));
    }
}
