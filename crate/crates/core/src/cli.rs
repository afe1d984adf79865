//! The `stripefit` command line.
//!
//! Every subcommand writes into an output directory and leaves a
//! `resolved_config.json` there; passing that file back with `--config`
//! repeats the run.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dsp::{butter_lowpass, filter_trial};
use crate::error::{Error, Result};
use crate::model_io::{parse_trials, write_trials, Point, Trial, TrialFormat, TrialMetadata, TrialSet};
use crate::optim::grid_search;
use crate::patternfit::{fit_trial, prepare_trial, run_batch, FitConfig, FramePolicy, Optimizer, Strategy};
use crate::report::{
    read_results, write_anova_csv, write_errors, write_quantiles, write_result_rows, write_results,
    write_surface_csv, write_ttest_csv, Metric,
};
use crate::stats::{
    bisector_normal_test, render_anova_table, render_ttest_table, strategy_comparison, DEFAULT_ALPHA, OPTIMIZER_PAIRS,
};
use crate::synth::{generate_crossing_trial, CrossingSpec, GroundTruth};
use crate::waveform::{FrameObjective, WaveKind, WaveParams};

pub const RESOLVED_CONFIG: &str = "resolved_config.json";
pub const LOG_ENV: &str = "STRIPEFIT_LOG";

#[derive(Debug, Parser)]
#[command(name = "stripefit", version, about = "Fit stripe patterns to crossing pedestrian flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate trajectories and low-pass filter them into canonical CSV.
    Ingest(IngestArgs),
    /// Fit one trial with one or more strategies.
    Fit(FitArgs),
    /// Fit every trial with every strategy.
    Batch(BatchArgs),
    /// ANOVA and t-test tables from a result CSV.
    Stats(StatsArgs),
    /// Generate synthetic crossing trials with known stripes.
    Synth(SynthArgs),
    /// Exhaustive grid evaluation of the objective on one frame.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Canonical CSV to read.
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-trial metadata JSON (bisector, sampling rate).
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub filter_cutoff_hz: Option<f64>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["2", "4"]))]
    pub filter_order: Option<String>,
    #[arg(long)]
    pub no_filter: bool,
    /// Resolved configuration from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Single,
    BestOverWindow,
    PerFrameSeries,
}

#[derive(Debug, Args)]
pub struct FitOptions {
    /// Resolved configuration from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Strategy such as `square+sa`; repeat for several. Defaults to all four.
    #[arg(long = "strategy")]
    pub strategies: Vec<Strategy>,
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub frame_policy: Option<PolicyArg>,
    /// Frame time for `--frame-policy single`.
    #[arg(long)]
    pub frame_t: Option<f64>,
    /// Frame spacing in seconds for window policies.
    #[arg(long)]
    pub stride: Option<f64>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub steps_per_temp: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Derive annealing seeds from trial ids.
    #[arg(long)]
    pub seed_from_trial_id: bool,
    /// Also write results.json with optimiser traces.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,
    /// Trial to fit; may be omitted when the file holds a single trial.
    #[arg(long)]
    pub trial_id: Option<String>,
    /// Bisector direction `bx,by`, overriding metadata and estimation.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub bisector: Option<(f64, f64)>,
    /// Fitting window `start,end` in seconds.
    #[arg(long, value_parser = parse_pair)]
    pub window: Option<(f64, f64)>,
    #[command(flatten)]
    pub opts: FitOptions,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub opts: FitOptions,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Result CSV written by `batch`.
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, conflicts_with = "angles")]
    pub angle: Option<f64>,
    /// Comma-separated crossing angles.
    #[arg(long, value_delimiter = ',')]
    pub angles: Option<Vec<f64>>,
    #[arg(long)]
    pub trials_per_angle: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub speed: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub fs: Option<f64>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub wavelength: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trial_id: Option<String>,
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Frame time; defaults to the middle of the crossing window.
    #[arg(long)]
    pub frame_t: Option<f64>,
    #[arg(long, value_enum)]
    pub wave: Option<WaveKind>,
    /// Grid points along gamma, lambda and psi.
    #[arg(long, value_delimiter = ',')]
    pub resolution: Option<Vec<usize>>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSettings {
    pub enabled: bool,
    pub order: usize,
    pub cutoff_hz: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            order: 4,
            cutoff_hz: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSettings {
    pub angles: Vec<f64>,
    pub trials_per_angle: usize,
    /// Template for every trial; `trial_id`, `angle_deg` and `seed` are
    /// set per trial.
    pub crossing: CrossingSpec,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            angles: vec![90.0],
            trials_per_angle: 1,
            crossing: CrossingSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub wave: WaveKind,
    pub resolution: [usize; 3],
    pub frame_t: Option<f64>,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            wave: WaveKind::Square,
            resolution: [181, 96, 64],
            frame_t: None,
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub trial_id: Option<String>,
    pub bisector: Option<[f64; 2]>,
    pub window: Option<[f64; 2]>,
    pub filter: FilterSettings,
    pub fit: FitConfig,
    pub strategies: Vec<Strategy>,
    pub jobs: usize,
    pub alpha: f64,
    pub synth: SynthSettings,
    pub oracle: OracleSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            input: None,
            metadata: None,
            output_dir: None,
            trial_id: None,
            bisector: None,
            window: None,
            filter: FilterSettings::default(),
            fit: FitConfig::default(),
            strategies: Strategy::ALL.to_vec(),
            jobs: 1,
            alpha: DEFAULT_ALPHA,
            synth: SynthSettings::default(),
            oracle: OracleSettings::default(),
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text).map_err(Error::from)?)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_trials(path: &Path, metadata: Option<&Path>) -> Result<TrialSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut set = parse_trials(BufReader::new(file), TrialFormat::CanonicalCsv).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    if let Some(m) = metadata {
        let text = fs::read_to_string(m).map_err(|e| Error::io(m, e))?;
        set.apply_metadata(&TrialMetadata::parse_json(&text)?)?;
    }
    Ok(set)
}

fn select_trial<'a>(set: &'a TrialSet, id: Option<&str>) -> Result<&'a Trial> {
    match id {
        Some(id) => set
            .get(id)
            .ok_or_else(|| Error::Config(format!("no trial with id {id:?}"))),
        None if set.len() == 1 => Ok(&set.trials[0]),
        None => Err(Error::Config(format!(
            "input holds {} trials; choose one with --trial-id",
            set.len()
        ))),
    }
}

fn apply_fit_options(cfg: &mut RunConfig, o: &FitOptions) -> CliResult<()> {
    cfg.output_dir = Some(o.out.clone());
    if o.metadata.is_some() {
        cfg.metadata = o.metadata.clone();
    }
    if !o.strategies.is_empty() {
        cfg.strategies = o.strategies.clone();
    }
    let fit = &mut cfg.fit;
    let stride = o.stride.or(match fit.frame_policy {
        FramePolicy::BestOverWindow { stride_s } | FramePolicy::PerFrameSeries { stride_s } => Some(stride_s),
        FramePolicy::Single { .. } => None,
    });
    let stride_s = stride.unwrap_or(0.25);
    match o.frame_policy {
        Some(PolicyArg::Single) => {
            let t = o
                .frame_t
                .ok_or_else(|| Failure::Usage("--frame-policy single needs --frame-t".into()))?;
            fit.frame_policy = FramePolicy::Single { t };
        }
        Some(PolicyArg::BestOverWindow) => fit.frame_policy = FramePolicy::BestOverWindow { stride_s },
        Some(PolicyArg::PerFrameSeries) => fit.frame_policy = FramePolicy::PerFrameSeries { stride_s },
        None => {
            if let Some(t) = o.frame_t {
                fit.frame_policy = FramePolicy::Single { t };
            } else if let Some(s) = o.stride {
                match &mut fit.frame_policy {
                    FramePolicy::BestOverWindow { stride_s } | FramePolicy::PerFrameSeries { stride_s } => *stride_s = s,
                    FramePolicy::Single { .. } => {}
                }
            }
        }
    }
    if let Some(v) = o.lambda_min {
        fit.bounds.lambda_m.0 = v;
    }
    if let Some(v) = o.lambda_max {
        fit.bounds.lambda_m.1 = v;
    }
    if let Some(v) = o.steps_per_temp {
        fit.sa.steps_per_temp = v;
    }
    if let Some(s) = o.seed {
        fit.seed = s;
    }
    if o.seed_from_trial_id {
        fit.seed_from_trial_id = true;
    }
    if o.trace {
        fit.trace = true;
    }
    fit.validate()?;
    Ok(())
}

fn finish(cfg: &RunConfig, dir: &Path) -> Result<()> {
    write_json(&dir.join(RESOLVED_CONFIG), cfg)
}

fn cmd_ingest(a: IngestArgs) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    cfg.command = "ingest".into();
    cfg.input = Some(a.input.clone());
    cfg.output_dir = Some(a.out.clone());
    if a.metadata.is_some() {
        cfg.metadata = a.metadata.clone();
    }
    if let Some(c) = a.filter_cutoff_hz {
        cfg.filter.cutoff_hz = c;
    }
    if let Some(o) = &a.filter_order {
        cfg.filter.order = o.parse().expect("validated by clap");
    }
    if a.no_filter {
        cfg.filter.enabled = false;
    }

    let set = read_trials(&a.input, cfg.metadata.as_deref())?;
    let trials = if cfg.filter.enabled {
        set.iter()
            .map(|t| {
                let coeffs = butter_lowpass(cfg.filter.order, cfg.filter.cutoff_hz, t.sample_rate_hz)?;
                let mut f = filter_trial(t, &coeffs)?;
                f.bisector = t.bisector;
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        set.trials.clone()
    };
    let out = TrialSet { trials };
    create_dir(&a.out)?;
    let path = a.out.join("trials.csv");
    write_trials(create_file(&path)?, &out)?;
    let metadata: Vec<TrialMetadata> = out
        .iter()
        .map(|t| TrialMetadata {
            trial_id: t.trial_id.clone(),
            bisector: t.bisector.map(|b| [b.x, b.y]),
            sample_rate_hz: Some(t.sample_rate_hz),
        })
        .collect();
    write_json(&a.out.join("metadata.json"), &metadata)?;
    log::info!("wrote {} trials to {}", out.len(), path.display());
    finish(&cfg, &a.out)?;
    Ok(())
}

fn cmd_fit(a: FitArgs) -> CliResult<()> {
    let mut cfg = load_config(a.opts.config.as_deref())?;
    cfg.command = "fit".into();
    cfg.input = Some(a.input.clone());
    apply_fit_options(&mut cfg, &a.opts)?;
    if a.trial_id.is_some() {
        cfg.trial_id = a.trial_id.clone();
    }
    if let Some((x, y)) = a.bisector {
        cfg.bisector = Some([x, y]);
    }
    if let Some((s, e)) = a.window {
        cfg.window = Some([s, e]);
    }

    let set = read_trials(&a.input, cfg.metadata.as_deref())?;
    let mut trial = select_trial(&set, cfg.trial_id.as_deref())?.clone();
    cfg.trial_id = Some(trial.trial_id.clone());
    if let Some([x, y]) = cfg.bisector {
        let n = (x * x + y * y).sqrt();
        if !(n > 0.0) {
            return Err(Error::InvalidDirection(x, y).into());
        }
        trial.bisector = Some(Point::new(x / n, y / n));
    }
    let prepared = prepare_trial(&trial, cfg.window.map(|[s, e]| (s, e)), &cfg.fit)?;

    let mut fits = Vec::new();
    for &strategy in &cfg.strategies {
        let seed = cfg.fit.row_seed(&trial.trial_id, strategy);
        fits.push(fit_trial(&prepared, strategy, cfg.fit.frame_policy, &cfg.fit, seed)?);
    }
    create_dir(&a.opts.out)?;
    write_result_rows(
        create_file(&a.opts.out.join("results.csv"))?,
        fits.iter()
            .flat_map(|f| f.results.iter())
            .map(|r| (trial.trial_id.as_str(), trial.crossing_angle_deg, r)),
    )?;
    if cfg.fit.trace {
        write_json(&a.opts.out.join("results.json"), &fits)?;
    }
    for f in &fits {
        let b = f.best();
        println!(
            "{} {}: gamma {:.3} deg, lambda {:.4} m, psi {:.4} rad, C/Cmax {:.4}",
            trial.trial_id, b.strategy, b.params.gamma_deg, b.params.lambda_m, b.params.psi_rad, b.c_norm
        );
    }
    finish(&cfg, &a.opts.out)?;
    Ok(())
}

fn cmd_batch(a: BatchArgs) -> CliResult<()> {
    let mut cfg = load_config(a.opts.config.as_deref())?;
    cfg.command = "batch".into();
    cfg.input = Some(a.input.clone());
    cfg.jobs = a.jobs;
    apply_fit_options(&mut cfg, &a.opts)?;
    let uses_sa = cfg.strategies.iter().any(|s| s.optimizer == Optimizer::Sa);
    let seeded = a.opts.seed.is_some() || cfg.fit.seed_from_trial_id || a.opts.config.is_some();
    if uses_sa && !seeded {
        return Err(Failure::Usage(
            "annealing strategies need --seed or --seed-from-trial-id".into(),
        ));
    }

    let set = read_trials(&a.input, cfg.metadata.as_deref())?;
    let result = run_batch(&set, &cfg.strategies, &cfg.fit, cfg.jobs);
    create_dir(&a.opts.out)?;
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            finish(&cfg, &a.opts.out)?;
            return Err(e.into());
        }
    };
    write_results(create_file(&a.opts.out.join("results.csv"))?, &out.table)?;
    write_errors(create_file(&a.opts.out.join("errors.csv"))?, &out.errors)?;
    if cfg.fit.trace {
        write_json(&a.opts.out.join("results.json"), &out)?;
    }
    log::info!("{} rows fitted, {} failed", out.table.len(), out.errors.len());
    if !out.errors.is_empty() {
        eprintln!("{} of {} rows failed; see errors.csv", out.errors.len(), out.errors.len() + out.table.len());
    }
    finish(&cfg, &a.opts.out)?;
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    cfg.command = "stats".into();
    cfg.input = Some(a.results.clone());
    cfg.output_dir = Some(a.out.clone());
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Failure::Usage(format!("--alpha {} outside (0, 1)", cfg.alpha)));
    }
    let file = File::open(&a.results).map_err(|e| Error::io(&a.results, e))?;
    let table = read_results(BufReader::new(file))?;
    let comparisons = strategy_comparison(&table, &OPTIMIZER_PAIRS, cfg.alpha)?;
    let tests = bisector_normal_test(&table, cfg.alpha);

    create_dir(&a.out)?;
    write_anova_csv(create_file(&a.out.join("anova.csv"))?, &comparisons)?;
    write_ttest_csv(create_file(&a.out.join("ttest.csv"))?, &tests)?;
    write_quantiles(
        create_file(&a.out.join("boxplot_quantiles.csv"))?,
        &table,
        &[Metric::CNorm, Metric::Gamma, Metric::Lambda],
    )?;
    write_quantiles(create_file(&a.out.join("timing_quantiles.csv"))?, &table, &[Metric::WallTime])?;
    let text = format!(
        "One-way ANOVA of C per crossing angle (* p < {alpha})\n{}\nOne-sample t-tests of gamma against 90 deg (* p < {alpha})\n{}",
        render_anova_table(&comparisons),
        render_ttest_table(&tests),
        alpha = cfg.alpha
    );
    let path = a.out.join("tables.txt");
    fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    print!("{text}");
    finish(&cfg, &a.out)?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    cfg.command = "synth".into();
    cfg.output_dir = Some(a.out.clone());
    let s = &mut cfg.synth;
    if let Some(angle) = a.angle {
        s.angles = vec![angle];
    }
    if let Some(angles) = &a.angles {
        s.angles = angles.clone();
    }
    if let Some(n) = a.trials_per_angle {
        s.trials_per_angle = n;
    }
    let c = &mut s.crossing;
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut c.speed_mps, a.speed);
    set(&mut c.duration_s, a.duration);
    set(&mut c.fs_hz, a.fs);
    set(&mut c.lateral_spacing_m, a.spacing);
    set(&mut c.wavelength_m, a.wavelength);
    set(&mut c.jitter_sd_m, a.jitter);
    if let Some(n) = a.n1 {
        c.n1 = n;
    }
    if let Some(n) = a.n2 {
        c.n2 = n;
    }
    if let Some(seed) = a.seed {
        c.seed = seed;
    }
    if s.angles.is_empty() || s.trials_per_angle == 0 {
        return Err(Failure::Usage("nothing to generate".into()));
    }

    #[derive(Serialize)]
    struct TruthRecord {
        trial_id: String,
        #[serde(flatten)]
        truth: GroundTruth,
    }
    let mut trials = Vec::new();
    let mut truths = Vec::new();
    for &angle in &s.angles {
        for k in 0..s.trials_per_angle {
            let spec = CrossingSpec {
                trial_id: if s.angles.len() == 1 && s.trials_per_angle == 1 {
                    format!("synth_{angle}")
                } else {
                    format!("synth_{angle}_{k:03}")
                },
                angle_deg: angle,
                seed: crate::rng::derive_seed(s.crossing.seed, &[angle.to_bits(), k as u64]),
                ..s.crossing.clone()
            };
            trials.push(generate_crossing_trial(&spec)?);
            truths.push(TruthRecord {
                trial_id: spec.trial_id.clone(),
                truth: spec.ground_truth(),
            });
        }
    }
    create_dir(&a.out)?;
    let set = TrialSet { trials };
    write_trials(create_file(&a.out.join("trial.csv"))?, &set)?;
    let metadata: Vec<TrialMetadata> = set
        .iter()
        .map(|t| TrialMetadata {
            trial_id: t.trial_id.clone(),
            bisector: t.bisector.map(|b| [b.x, b.y]),
            sample_rate_hz: Some(t.sample_rate_hz),
        })
        .collect();
    write_json(&a.out.join("metadata.json"), &metadata)?;
    if truths.len() == 1 {
        write_json(&a.out.join("ground_truth.json"), &truths[0])?;
    } else {
        write_json(&a.out.join("ground_truth.json"), &truths)?;
    }
    finish(&cfg, &a.out)?;
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    cfg.command = "oracle".into();
    cfg.input = Some(a.input.clone());
    cfg.output_dir = Some(a.out.clone());
    if a.metadata.is_some() {
        cfg.metadata = a.metadata.clone();
    }
    if a.trial_id.is_some() {
        cfg.trial_id = a.trial_id.clone();
    }
    if let Some(w) = a.wave {
        cfg.oracle.wave = w;
    }
    if let Some(r) = &a.resolution {
        cfg.oracle.resolution = r
            .as_slice()
            .try_into()
            .map_err(|_| Failure::Usage(format!("--resolution needs three counts, got {}", r.len())))?;
    }
    if a.frame_t.is_some() {
        cfg.oracle.frame_t = a.frame_t;
    }
    if let Some(v) = a.lambda_min {
        cfg.fit.bounds.lambda_m.0 = v;
    }
    if let Some(v) = a.lambda_max {
        cfg.fit.bounds.lambda_m.1 = v;
    }
    cfg.fit.bounds.validate()?;

    let set = read_trials(&a.input, cfg.metadata.as_deref())?;
    let trial = select_trial(&set, cfg.trial_id.as_deref())?;
    cfg.trial_id = Some(trial.trial_id.clone());
    let prepared = prepare_trial(trial, None, &cfg.fit)?;
    let t = match cfg.oracle.frame_t {
        Some(t) => t,
        None => {
            let (s, e) = prepared.window;
            let mid = prepared.trial.frame_times(s, e, 1.0 / prepared.trial.sample_rate_hz);
            mid[mid.len() / 2]
        }
    };
    cfg.oracle.frame_t = Some(t);
    let frame = prepared.trial.frame_at(t)?;
    let objective = FrameObjective::new(cfg.oracle.wave, &frame)?;
    let grid = grid_search(
        |x| objective.eval_slice(x),
        &cfg.fit.bounds.search_box(),
        &cfg.oracle.resolution,
        true,
    )?;
    create_dir(&a.out)?;
    write_surface_csv(
        create_file(&a.out.join("surface.csv"))?,
        grid.surface.as_ref().expect("surface requested"),
    )?;
    let best = WaveParams::from_slice(&grid.best.x);
    write_json(
        &a.out.join("best.json"),
        &serde_json::json!({
            "trial_id": trial.trial_id,
            "frame_t": t,
            "wave": cfg.oracle.wave,
            "params": best,
            "value": grid.best.value,
            "evaluations": grid.best.evaluations,
        }),
    )?;
    println!(
        "grid maximum {:.6} at gamma {:.3} deg, lambda {:.4} m, psi {:.4} rad",
        grid.best.value, best.gamma_deg, best.lambda_m, best.psi_rad
    );
    finish(&cfg, &a.out)?;
    Ok(())
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs the command line and returns the process exit code: 0 on
/// success, 1 on runtime errors, 2 on usage errors.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
