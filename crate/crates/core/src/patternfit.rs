//! Fitting strategies, per-frame and per-trial fits, and batch runs.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model_io::{crossing_window, estimate_bisector, rotate_trial, Frame, Trial, TrialSet};
use crate::optim::{nm_multistart, simulated_annealing, Bounds, NmOptions, OptimResult, SaSchedule, TraceEntry};
use crate::rng::{derive_seed, hash_str};
use crate::waveform::{canonicalize, FrameObjective, WaveKind, WaveParams, C_MAX};

/// Frames whose diameter is below this are rejected.
pub const DEGENERATE_DIAMETER_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Nm,
    Sa,
}

/// A waveform paired with an optimiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Strategy {
    pub wave: WaveKind,
    pub optimizer: Optimizer,
}

impl Strategy {
    pub const fn new(wave: WaveKind, optimizer: Optimizer) -> Self {
        Self { wave, optimizer }
    }

    /// The four combinations, in reporting order.
    pub const ALL: [Strategy; 4] = [
        Strategy::new(WaveKind::Sine, Optimizer::Nm),
        Strategy::new(WaveKind::Sine, Optimizer::Sa),
        Strategy::new(WaveKind::Square, Optimizer::Nm),
        Strategy::new(WaveKind::Square, Optimizer::Sa),
    ];

    pub fn index(self) -> u64 {
        Self::ALL.iter().position(|s| *s == self).unwrap() as u64
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = match self.optimizer {
            Optimizer::Nm => "nm",
            Optimizer::Sa => "sa",
        };
        write!(f, "{}+{}", self.wave.name(), opt)
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|st| st.to_string() == lower)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy `{s}` (expected one of sine+nm, sine+sa, square+nm, square+sa)"
                ))
            })
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum FramePolicy {
    Single { t: f64 },
    BestOverWindow { stride_s: f64 },
    PerFrameSeries { stride_s: f64 },
}

impl Default for FramePolicy {
    fn default() -> Self {
        FramePolicy::BestOverWindow { stride_s: 0.25 }
    }
}

/// The 18 simplex starts: gamma x lambda x psi = {30, 90, 150} x {1, 2, 4} x {0, pi}.
pub fn default_nm_starts() -> Vec<WaveParams> {
    let mut starts = Vec::with_capacity(18);
    for gamma in [30.0, 90.0, 150.0] {
        for lambda in [1.0, 2.0, 4.0] {
            for psi in [0.0, PI] {
                starts.push(WaveParams::new(gamma, lambda, psi));
            }
        }
    }
    starts
}

fn default_nm_options() -> NmOptions {
    NmOptions {
        initial_step: vec![15.0, 0.5, 0.5],
        tol: 1e-10,
        max_iter: 2000,
        trace: false,
    }
}

fn default_bisector_window() -> f64 {
    1.0
}

/// Everything a fit depends on besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub sa: SaSchedule,
    #[serde(default = "default_nm_options")]
    pub nm: NmOptions,
    #[serde(default = "default_nm_starts")]
    pub nm_starts: Vec<WaveParams>,
    #[serde(default)]
    pub frame_policy: FramePolicy,
    /// Seconds at the start of a trial used to estimate the bisector.
    #[serde(default = "default_bisector_window")]
    pub bisector_window_s: f64,
    /// Base seed of every annealing run.
    #[serde(default)]
    pub seed: u64,
    /// Derive annealing seeds from trial ids instead of `seed`.
    #[serde(default)]
    pub seed_from_trial_id: bool,
    #[serde(default)]
    pub trace: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            bounds: Bounds::default(),
            sa: SaSchedule::default(),
            nm: default_nm_options(),
            nm_starts: default_nm_starts(),
            frame_policy: FramePolicy::default(),
            bisector_window_s: default_bisector_window(),
            seed: 0,
            seed_from_trial_id: false,
            trace: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.sa.validate(3)?;
        if self.nm_starts.is_empty() {
            return Err(Error::Config("no simplex starting points".into()));
        }
        match self.frame_policy {
            FramePolicy::BestOverWindow { stride_s } | FramePolicy::PerFrameSeries { stride_s }
                if !(stride_s > 0.0) =>
            {
                Err(Error::Config(format!("frame stride {stride_s} s")))
            }
            _ => Ok(()),
        }
    }

    /// Short SHA-256 digest of the serialised configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Annealing seed for one (trial, strategy) row.
    pub fn row_seed(&self, trial_id: &str, strategy: Strategy) -> u64 {
        let base = if self.seed_from_trial_id {
            hash_str(trial_id)
        } else {
            derive_seed(self.seed, &[hash_str(trial_id)])
        };
        derive_seed(base, &[strategy.index()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub strategy: Strategy,
    /// Canonical parameters.
    pub params: WaveParams,
    /// `raw_value / 2`.
    pub c_norm: f64,
    pub raw_value: f64,
    pub frame_t: f64,
    pub evaluations: u64,
    pub iterations: u64,
    pub wall_time_s: f64,
    pub config_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

fn run_optimizer(strategy: Strategy, objective: &FrameObjective, config: &FitConfig, seed: u64) -> Result<OptimResult> {
    match strategy.optimizer {
        Optimizer::Sa => {
            let schedule = SaSchedule {
                seed,
                trace: config.trace,
                ..config.sa.clone()
            };
            simulated_annealing(|x| objective.eval_slice(x), &config.bounds.search_box(), &schedule)
        }
        Optimizer::Nm => {
            let (lo, hi) = config.bounds.lambda_m;
            // Outside the wavelength bounds the value is that of the nearest
            // admissible wavelength minus the distance to it.
            let penalised = |x: &[f64]| {
                let lambda = x[1].clamp(lo, hi);
                objective.eval(WaveParams::new(x[0], lambda, x[2])) - (x[1] - lambda).abs()
            };
            let starts: Vec<Vec<f64>> = config.nm_starts.iter().map(|p| p.to_vec()).collect();
            let options = NmOptions {
                trace: config.trace,
                ..config.nm.clone()
            };
            nm_multistart(penalised, &starts, &options)
        }
    }
}

/// Maximises the strategy's objective on one frame.
///
/// `seed` drives the annealer and is ignored by the simplex. The reported
/// parameters are canonical and `raw_value` is the objective re-evaluated
/// there; `wall_time_s` covers the optimiser call only.
pub fn fit_frame(frame: &Frame, strategy: Strategy, config: &FitConfig, seed: u64) -> Result<FitResult> {
    frame.check_groups()?;
    let diameter = frame.diameter();
    if diameter < DEGENERATE_DIAMETER_M {
        return Err(Error::DegenerateFrame { diameter });
    }
    let objective = FrameObjective::new(strategy.wave, frame)?;
    let opt = run_optimizer(strategy, &objective, config, seed)?;

    let (lo, hi) = config.bounds.lambda_m;
    let mut params = WaveParams::from_slice(&opt.x);
    params.lambda_m = params.lambda_m.clamp(lo, hi);
    let params = canonicalize(params)?;
    let raw_value = objective.eval(params);
    Ok(FitResult {
        strategy,
        params,
        c_norm: raw_value / C_MAX,
        raw_value,
        frame_t: frame.t,
        evaluations: opt.evaluations,
        iterations: opt.iterations,
        wall_time_s: opt.wall_time_s,
        config_fingerprint: config.fingerprint(),
        trace: opt.trace,
    })
}

/// A trial rotated into its bisector frame together with its fitting window.
#[derive(Debug, Clone)]
pub struct PreparedTrial {
    pub trial: Trial,
    pub window: (f64, f64),
}

/// Rotates `trial` onto its bisector (metadata, else estimated) and finds
/// the crossing window unless one is given.
pub fn prepare_trial(trial: &Trial, window: Option<(f64, f64)>, config: &FitConfig) -> Result<PreparedTrial> {
    let bisector = match trial.bisector {
        Some(b) => b,
        None => estimate_bisector(trial, config.bisector_window_s)?,
    };
    let rotated = rotate_trial(trial, bisector)?;
    let window = match window {
        Some(w) => w,
        None => crossing_window(&rotated)?,
    };
    Ok(PreparedTrial {
        trial: rotated,
        window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub frames_fitted: usize,
    pub median_gamma_deg: f64,
    pub median_lambda_m: f64,
    pub max_c_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFit {
    pub results: Vec<FitResult>,
    pub summary: TrialSummary,
    /// Frame window the results were drawn from.
    pub window: (f64, f64),
}

impl TrialFit {
    /// Result with the largest `c_norm`. Ties go to the frame nearest the
    /// middle of the window, then to the earlier frame.
    pub fn best(&self) -> &FitResult {
        let mid = 0.5 * (self.window.0 + self.window.1);
        self.results
            .iter()
            .reduce(|a, b| {
                let closer = (b.frame_t - mid).abs() < (a.frame_t - mid).abs();
                if b.c_norm > a.c_norm || (b.c_norm == a.c_norm && closer) {
                    b
                } else {
                    a
                }
            })
            .expect("a trial fit has at least one result")
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fits the frames of an already prepared trial selected by `policy`.
pub fn fit_trial(
    prepared: &PreparedTrial,
    strategy: Strategy,
    policy: FramePolicy,
    config: &FitConfig,
    seed: u64,
) -> Result<TrialFit> {
    let trial = &prepared.trial;
    let (start, end) = prepared.window;
    let times = match policy {
        FramePolicy::Single { t } => vec![t],
        FramePolicy::BestOverWindow { stride_s } | FramePolicy::PerFrameSeries { stride_s } => {
            trial.frame_times(start, end, stride_s)
        }
    };

    let mut fits = Vec::with_capacity(times.len());
    let mut last_err = None;
    for (i, &t) in times.iter().enumerate() {
        let frame = match trial.frame_at(t) {
            Ok(f) => f,
            Err(e) if times.len() > 1 => {
                log::debug!("trial {}: skipping frame at {t} s: {e}", trial.trial_id);
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let frame_seed = derive_seed(seed, &[i as u64]);
        fits.push(fit_frame(&frame, strategy, config, frame_seed)?);
    }
    if fits.is_empty() {
        return Err(last_err.unwrap_or(Error::NoCrossing));
    }

    let summary = TrialSummary {
        frames_fitted: fits.len(),
        median_gamma_deg: median(&mut fits.iter().map(|f| f.params.gamma_deg).collect::<Vec<_>>()),
        median_lambda_m: median(&mut fits.iter().map(|f| f.params.lambda_m).collect::<Vec<_>>()),
        max_c_norm: fits.iter().map(|f| f.c_norm).fold(f64::NEG_INFINITY, f64::max),
    };
    let window = match policy {
        FramePolicy::Single { t } => (t, t),
        _ => (start, end),
    };
    let mut out = TrialFit {
        results: fits,
        summary,
        window,
    };
    if let FramePolicy::BestOverWindow { .. } = policy {
        let best = out.best().clone();
        out.results = vec![best];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub trial_id: String,
    pub crossing_angle_deg: f64,
    pub result: FitResult,
}

/// One row per (trial, strategy).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyTable {
    rows: Vec<TableRow>,
}

impl StrategyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, row: TableRow) -> Result<()> {
        if self
            .rows
            .iter()
            .any(|r| r.trial_id == row.trial_id && r.result.strategy == row.result.strategy)
        {
            return Err(Error::Config(format!(
                "duplicate row for trial {} and strategy {}",
                row.trial_id, row.result.strategy
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, trial_id: &str, strategy: Strategy) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.trial_id == trial_id && r.result.strategy == strategy)
    }

    /// Distinct crossing angles in increasing order.
    pub fn angles(&self) -> Vec<f64> {
        let set: BTreeSet<u64> = self.rows.iter().map(|r| r.crossing_angle_deg.to_bits()).collect();
        let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn cell(&self, angle: f64, strategy: Strategy) -> impl Iterator<Item = &TableRow> {
        self.rows
            .iter()
            .filter(move |r| r.crossing_angle_deg == angle && r.result.strategy == strategy)
    }

    /// True when every trial has a row for each of `strategies`.
    pub fn is_complete(&self, strategies: &[Strategy]) -> bool {
        let trials: BTreeSet<&str> = self.rows.iter().map(|r| r.trial_id.as_str()).collect();
        trials
            .iter()
            .all(|t| strategies.iter().all(|&s| self.get(t, s).is_some()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub trial_id: String,
    pub crossing_angle_deg: f64,
    pub strategy: Strategy,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutput {
    pub table: StrategyTable,
    pub errors: Vec<RowError>,
    /// Per-row trial fits, kept when tracing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<TrialFit>,
}

/// Fits every trial with every strategy.
///
/// Rows run on a pool of `jobs` threads and are collected in (trial,
/// strategy) order; each row's annealing seed comes from
/// [`FitConfig::row_seed`], so the table does not depend on `jobs`.
/// Failed rows are reported in `errors`; the batch itself fails only when
/// no row succeeds.
pub fn run_batch(trials: &TrialSet, strategies: &[Strategy], config: &FitConfig, jobs: usize) -> Result<BatchOutput> {
    if trials.is_empty() {
        return Err(Error::NoTrials);
    }
    if strategies.is_empty() {
        return Err(Error::Config("no strategies".into()));
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let prepared: Vec<Result<PreparedTrial>> = pool.install(|| {
        trials
            .trials
            .par_iter()
            .map(|t| prepare_trial(t, None, config))
            .collect()
    });
    let jobs_list: Vec<(usize, Strategy)> = (0..trials.len())
        .flat_map(|i| strategies.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes: Vec<Result<TrialFit>> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|&(i, strategy)| {
                let prep = prepared[i].as_ref().map_err(|e| Error::InvalidTrial {
                    trial_id: trials.trials[i].trial_id.clone(),
                    message: e.to_string(),
                })?;
                let seed = config.row_seed(&trials.trials[i].trial_id, strategy);
                fit_trial(prep, strategy, config.frame_policy, config, seed)
            })
            .collect()
    });

    let mut out = BatchOutput {
        table: StrategyTable::new(),
        errors: Vec::new(),
        fits: Vec::new(),
    };
    for ((i, strategy), outcome) in jobs_list.into_iter().zip(outcomes) {
        let trial = &trials.trials[i];
        match outcome {
            Ok(fit) => {
                out.table.insert(TableRow {
                    trial_id: trial.trial_id.clone(),
                    crossing_angle_deg: trial.crossing_angle_deg,
                    result: fit.best().clone(),
                })?;
                if config.trace {
                    out.fits.push(fit);
                }
            }
            Err(e) => {
                log::warn!("trial {} with {strategy}: {e}", trial.trial_id);
                out.errors.push(RowError {
                    trial_id: trial.trial_id.clone(),
                    crossing_angle_deg: trial.crossing_angle_deg,
                    strategy,
                    message: e.to_string(),
                });
            }
        }
    }
    if out.table.is_empty() {
        return Err(Error::BatchFailed(out.errors.len()));
    }
    Ok(out)
}
