//! Command-line front end.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage, 3 I/O, 4 file format.
//! Machine-readable summaries are printed as `key=value` lines on stdout;
//! diagnostics go to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::evaluation::{distance_profile, loo_cv, BinningRule, CvReport};
use crate::gp::KernelKind;
use crate::io::{
    read_field_file, read_scores, read_volume_file, write_atomic, write_field_file, write_scores, write_volume_file,
    RunConfig, VolumeFile,
};
use crate::phantom::{generate_population, ActivationProfile, NoiseModel, PhantomConfig};
use crate::volume::{compare_models, fit_volume, predict_volume, total_evidence, FittedVolumeModel, VolumeDataset};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Format { .. } | Error::MaskMismatch => EXIT_FORMAT,
        Error::InvalidInput(_) | Error::UncoveredScore(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

#[derive(Parser, Debug)]
#[command(name = "voxgp", version, about = "Voxel-wise Gaussian-process regression on a behavioural score")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NoiseArg {
    Ar1,
    White,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProfileArg {
    Crossfade,
    Linear,
    Bump,
}

#[derive(clap::Args, Debug)]
struct DataArgs {
    /// GPV1 file with one z-volume per subject.
    #[arg(long)]
    data: PathBuf,
    /// CSV with header `subject,score` on the raw scale.
    #[arg(long)]
    scores: PathBuf,
    /// key=value run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured ICM seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic phantom population.
    Simulate {
        /// Output prefix: writes <out>.gpv, <out>_scores.csv and <out>_labels.gpv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated scores in [0, 1].
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.3, 0.7, 0.8, 0.9, 1.0])]
        scores: Vec<f64>,
        #[arg(long, value_enum, default_value = "ar1")]
        noise: NoiseArg,
        /// AR(1) coefficient.
        #[arg(long, default_value_t = 0.3)]
        phi: f64,
        #[arg(long, value_enum, default_value = "crossfade")]
        profile: ProfileArg,
        /// Signal magnitude relative to the baseline standard deviation.
        #[arg(long, default_value_t = 1.0)]
        m: f64,
    },
    /// Fit the hyperparameter field.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Output prefix: writes <out>.gph and <out>_report.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict mean and variance volumes from a fitted field.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        field: PathBuf,
        /// Comma-separated raw query scores.
        #[arg(long, value_delimiter = ',', required = true)]
        at: Vec<f64>,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Fit two kernels and compare their evidence voxel by voxel.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        /// Output prefix: writes <out>_logbf.gpv and <out>_plinear.gpv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "se")]
        kernel_a: KernelKind,
        #[arg(long, default_value = "linear")]
        kernel_b: KernelKind,
    },
    /// Leave-one-out cross-validation, optionally against binned inputs.
    Crossval {
        #[command(flatten)]
        data: DataArgs,
        /// Report CSV; with --bins a distance profile goes to <stem>_profile.csv.
        #[arg(long)]
        out: PathBuf,
        /// Binning rule `upper:rep,…`, e.g. "26:24,29:27,30:30".
        #[arg(long)]
        bins: Option<String>,
    },
}

/// Parse `args` (including the program name) and run, returning the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Simulate {
            out: prefix,
            seed,
            scores,
            noise,
            phi,
            profile,
            m,
        } => {
            let cfg = PhantomConfig {
                scores,
                m_fraction: m,
                noise_model: match noise {
                    NoiseArg::Ar1 => NoiseModel::Ar1(phi),
                    NoiseArg::White => NoiseModel::White,
                },
                profile: match profile {
                    ProfileArg::Crossfade => ActivationProfile::CrossFade,
                    ProfileArg::Linear => ActivationProfile::LinearTrend,
                    ProfileArg::Bump => ActivationProfile::Bump,
                },
                seed,
                ..PhantomConfig::default()
            };
            cmd_simulate(&cfg, &prefix, out)
        }
        Command::Fit { data, out: prefix } => cmd_fit(&data, &prefix, out),
        Command::Predict {
            data,
            field,
            at,
            out_prefix,
        } => cmd_predict(&data, &field, &at, &out_prefix, out, err),
        Command::Compare {
            data,
            out: prefix,
            kernel_a,
            kernel_b,
        } => cmd_compare(&data, &prefix, kernel_a, kernel_b, out),
        Command::Crossval { data, out: path, bins } => cmd_crossval(&data, &path, bins.as_deref(), out, err),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn load(args: &DataArgs) -> Result<(VolumeDataset, RunConfig)> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.spec.car.seed = seed;
    }
    let file = read_volume_file(&args.data)?;
    let scores = read_scores(&args.scores)?;
    if scores.len() != file.volumes.len() {
        return Err(Error::format(
            16,
            format!("{} volumes in data but {} scores", file.volumes.len(), scores.len()),
        ));
    }
    let zvols = file.volumes_f64();
    let ds = VolumeDataset::new(file.lattice, scores, zvols, cfg.score_map)?;
    Ok((ds, cfg))
}

fn cmd_simulate(cfg: &PhantomConfig, prefix: &Path, out: &mut dyn Write) -> Result<()> {
    let p = generate_population(cfg)?;
    let ds = &p.dataset;
    write_volume_file(
        &with_suffix(prefix, ".gpv"),
        &VolumeFile::from_f64(ds.lattice().clone(), ds.zvols())?,
    )?;
    write_scores(&with_suffix(prefix, "_scores.csv"), ds.scores())?;
    write_volume_file(
        &with_suffix(prefix, "_labels.gpv"),
        &VolumeFile::from_f64(ds.lattice().clone(), &[p.labels])?,
    )?;
    writeln!(out, "subjects={}", ds.n_subjects())?;
    Ok(())
}

fn echo_score_map(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "score_min={}", cfg.score_map.raw_min)?;
    writeln!(out, "score_max={}", cfg.score_map.raw_max)?;
    Ok(())
}

fn cmd_fit(args: &DataArgs, prefix: &Path, out: &mut dyn Write) -> Result<()> {
    let (ds, cfg) = load(args)?;
    let model = fit_volume(Arc::new(ds), &cfg.spec)?;
    write_field_file(&with_suffix(prefix, ".gph"), &model.field)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.into());
    csv.write_record(["voxel_index", "lml", "status"]).map_err(io)?;
    for v in model.field.lattice().masked_indices() {
        let status = model.report.init.status[v].map(|s| s.label()).unwrap_or("none");
        csv.write_record([v.to_string(), model.report.voxel_lml[v].to_string(), status.to_string()])
            .map_err(io)?;
    }
    let bytes = csv.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&with_suffix(prefix, "_report.csv"), &bytes)?;
    let icm = &model.report.icm;
    echo_score_map(&cfg, out)?;
    writeln!(out, "kernel={}", model.kind())?;
    writeln!(out, "init_failures={}", model.report.init.failures)?;
    writeln!(out, "degenerate_voxels={}", model.report.init.degenerate)?;
    writeln!(out, "icm_accepted={} icm_no_ops={}", icm.accepted, icm.no_ops())?;
    writeln!(out, "init_evidence={}", model.report.init_evidence)?;
    writeln!(out, "total_evidence={}", total_evidence(&model))?;
    Ok(())
}

fn cmd_predict(
    args: &DataArgs,
    field: &Path,
    at: &[f64],
    prefix: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let (ds, cfg) = load(args)?;
    let field = read_field_file(field)?;
    let model = FittedVolumeModel::from_field(Arc::new(ds), &cfg.spec, field)?;
    for &x in at {
        if !x.is_finite() {
            return Err(Error::invalid(format!("query {x} is not finite")));
        }
        let p = predict_volume(&model, x);
        if p.extrapolated {
            writeln!(
                err,
                "warning: extrapolation: query {x} outside [{}, {}]",
                cfg.score_map.raw_min, cfg.score_map.raw_max
            )?;
        }
        let lattice = model.field.lattice().clone();
        let mean = with_suffix(prefix, &format!("_mean_{x}.gpv"));
        let var = with_suffix(prefix, &format!("_var_{x}.gpv"));
        write_volume_file(&mean, &VolumeFile::from_f64(lattice.clone(), &[p.mean_vol])?)?;
        write_volume_file(&var, &VolumeFile::from_f64(lattice, &[p.var_vol])?)?;
        writeln!(out, "wrote={}", mean.display())?;
        writeln!(out, "wrote={}", var.display())?;
    }
    Ok(())
}

fn cmd_compare(args: &DataArgs, prefix: &Path, a: KernelKind, b: KernelKind, out: &mut dyn Write) -> Result<()> {
    let (ds, cfg) = load(args)?;
    let ds = Arc::new(ds);
    let ma = fit_volume(ds.clone(), &cfg.spec.with_kind(a))?;
    let mb = fit_volume(ds, &cfg.spec.with_kind(b))?;
    let c = compare_models(&ma, &mb)?;
    let lattice = ma.field.lattice().clone();
    write_volume_file(
        &with_suffix(prefix, "_logbf.gpv"),
        &VolumeFile::from_f64(lattice.clone(), &[c.log_bf_vol.clone()])?,
    )?;
    write_volume_file(
        &with_suffix(prefix, "_plinear.gpv"),
        &VolumeFile::from_f64(lattice, &[c.p_linear_vol.clone()])?,
    )?;
    let (ka, kb) = if a == b {
        (format!("{a}_a"), format!("{b}_b"))
    } else {
        (a.to_string(), b.to_string())
    };
    echo_score_map(&cfg, out)?;
    writeln!(
        out,
        "total_{ka}={} total_{kb}={} per_voxel_log_diff={}",
        c.total_a, c.total_b, c.per_voxel_log_diff
    )?;
    writeln!(out, "per_voxel_odds={}", c.per_voxel_odds)?;
    Ok(())
}

fn report_rows(csv: &mut csv::Writer<Vec<u8>>, r: &CvReport) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.into());
    for e in &r.entries {
        csv.write_record([
            e.subject.to_string(),
            e.score.to_string(),
            e.representative.to_string(),
            e.distance.to_string(),
            e.pred_logdensity.to_string(),
            r.label.clone(),
        ])
        .map_err(io)?;
    }
    Ok(())
}

fn cmd_crossval(
    args: &DataArgs,
    path: &Path,
    bins: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let rule = bins.map(str::parse::<BinningRule>).transpose()?;
    if let Some(r) = &rule {
        if !r.is_equidistant() {
            writeln!(err, "warning: bin representatives are not equidistant")?;
        }
    }
    let (ds, cfg) = load(args)?;
    if let Some(r) = &rule {
        crate::evaluation::apply_binning(ds.scores(), r)?;
    }
    let cont = loo_cv(&ds, &cfg.spec, None)?;
    let binned = rule.as_ref().map(|r| loo_cv(&ds, &cfg.spec, Some(r))).transpose()?;
    let reports: Vec<&CvReport> = std::iter::once(&cont).chain(binned.as_ref()).collect();

    let io = |e: csv::Error| Error::Io(e.into());
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["subject", "score", "representative", "distance", "pred_logdensity", "model"])
        .map_err(io)?;
    for r in &reports {
        report_rows(&mut csv, r)?;
    }
    for r in &reports {
        csv.write_record(["mean", "", "", "", &r.overall.to_string(), &r.label])
            .map_err(io)?;
    }
    write_atomic(path, &csv.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;

    if let Some(b) = &binned {
        let rows = distance_profile(&cont, b)?;
        let mut p = csv::Writer::from_writer(Vec::new());
        p.write_record(["distance", "count", "mean_continuous", "mean_binned"])
            .map_err(io)?;
        for row in &rows {
            p.write_record([
                row.distance.to_string(),
                row.count.to_string(),
                row.mean_continuous.to_string(),
                row.mean_binned.to_string(),
            ])
            .map_err(io)?;
        }
        let stem = path.with_extension("");
        write_atomic(
            &with_suffix(&stem, "_profile.csv"),
            &p.into_inner().map_err(|e| Error::Io(e.into_error()))?,
        )?;
    }
    for r in &reports {
        if r.n_failed() > 0 {
            writeln!(err, "warning: {} failed folds in {} model", r.n_failed(), r.label)?;
        }
        writeln!(out, "loo_{}={}", r.label, r.overall)?;
    }
    Ok(())
}
