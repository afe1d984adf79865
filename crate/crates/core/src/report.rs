//! Result, error, summary and surface files.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::optim::GridSurface;
use crate::patternfit::{FitResult, RowError, Strategy, StrategyTable, TableRow};
use crate::stats::{CellTest, PairComparison};
use crate::waveform::{WaveParams, C_MAX};

pub const RESULT_HEADER: [&str; 11] = [
    "trial_id",
    "angle",
    "strategy",
    "gamma_deg",
    "lambda_m",
    "psi_rad",
    "c_norm",
    "evaluations",
    "wall_time_s",
    "frame_t",
    "config_fingerprint",
];

fn result_record(trial_id: &str, angle: f64, r: &FitResult) -> [String; 11] {
    [
        trial_id.to_string(),
        angle.to_string(),
        r.strategy.to_string(),
        r.params.gamma_deg.to_string(),
        r.params.lambda_m.to_string(),
        r.params.psi_rad.to_string(),
        r.c_norm.to_string(),
        r.evaluations.to_string(),
        r.wall_time_s.to_string(),
        r.frame_t.to_string(),
        r.config_fingerprint.clone(),
    ]
}

/// Writes one line per result; `rows` pairs each result with its trial id
/// and crossing angle.
pub fn write_result_rows<'a, W, I>(sink: W, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, f64, &'a FitResult)>,
{
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(RESULT_HEADER)?;
    for (id, angle, r) in rows {
        w.write_record(result_record(id, angle, r))?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}

pub fn write_results<W: Write>(sink: W, table: &StrategyTable) -> Result<()> {
    write_result_rows(
        sink,
        table
            .rows()
            .iter()
            .map(|r| (r.trial_id.as_str(), r.crossing_angle_deg, &r.result)),
    )
}

/// Reads a result CSV back into a table. Iteration counts and traces are
/// not stored in the CSV and come back as zero and `None`.
pub fn read_results<R: Read>(source: R) -> Result<StrategyTable> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name}")))
    };
    let idx: Vec<usize> = RESULT_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let mut table = StrategyTable::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line());
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k).trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("{} is not a number: {:?}", RESULT_HEADER[k], field(k)),
            })
        };
        let strategy: Strategy = field(2).parse().map_err(|e| Error::Parse {
            line,
            message: format!("{e}"),
        })?;
        let c_norm = num(6)?;
        let evaluations = field(7).trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("evaluations is not an integer: {:?}", field(7)),
        })?;
        table.insert(TableRow {
            trial_id: field(0).to_string(),
            crossing_angle_deg: num(1)?,
            result: FitResult {
                strategy,
                params: WaveParams::new(num(3)?, num(4)?, num(5)?),
                c_norm,
                raw_value: c_norm * C_MAX,
                frame_t: num(9)?,
                evaluations,
                iterations: 0,
                wall_time_s: num(8)?,
                config_fingerprint: field(10).to_string(),
                trace: None,
            },
        })?;
    }
    Ok(table)
}

pub fn write_errors<W: Write>(sink: W, errors: &[RowError]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["trial_id", "angle", "strategy", "message"])?;
    for e in errors {
        w.write_record([
            e.trial_id.clone(),
            e.crossing_angle_deg.to_string(),
            e.strategy.to_string(),
            e.message.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<errors>", e))?;
    Ok(())
}

pub fn write_anova_csv<W: Write>(sink: W, comparisons: &[PairComparison]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "angle",
        "first",
        "second",
        "f_stat",
        "df_between",
        "df_within",
        "p_value",
        "eta_sq",
        "ss_between",
        "ss_within",
        "mean_first",
        "mean_second",
        "significant",
        "error",
    ])?;
    for c in comparisons {
        let stats = match &c.outcome {
            Ok(r) => [
                r.f_stat.to_string(),
                r.df_between.to_string(),
                r.df_within.to_string(),
                r.p_value.to_string(),
                r.eta_sq.to_string(),
                r.ss_between.to_string(),
                r.ss_within.to_string(),
            ],
            Err(_) => Default::default(),
        };
        let mut record = vec![c.crossing_angle_deg.to_string(), c.first.to_string(), c.second.to_string()];
        record.extend(stats);
        record.extend([
            c.means[0].to_string(),
            c.means[1].to_string(),
            c.significant.to_string(),
            c.outcome.as_ref().err().cloned().unwrap_or_default(),
        ]);
        w.write_record(record)?;
    }
    w.flush().map_err(|e| Error::io("<anova>", e))?;
    Ok(())
}

pub fn write_ttest_csv<W: Write>(sink: W, tests: &[CellTest]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["angle", "strategy", "t_stat", "df", "p_value", "mean", "sd", "significant", "error"])?;
    for t in tests {
        let row = match &t.outcome {
            Ok(r) => [
                r.t_stat.to_string(),
                r.df.to_string(),
                r.p_value.to_string(),
                r.mean.to_string(),
                r.sd.to_string(),
                t.significant.to_string(),
                String::new(),
            ],
            Err(e) => {
                let mut row: [String; 7] = Default::default();
                row[5] = "false".into();
                row[6] = e.clone();
                row
            }
        };
        let mut record = vec![t.crossing_angle_deg.to_string(), t.strategy.to_string()];
        record.extend(row);
        w.write_record(record)?;
    }
    w.flush().map_err(|e| Error::io("<ttest>", e))?;
    Ok(())
}

/// Linearly interpolated quantile of sorted data (the usual "type 7").
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    CNorm,
    Gamma,
    Lambda,
    WallTime,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::CNorm, Metric::Gamma, Metric::Lambda, Metric::WallTime];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CNorm => "c_norm",
            Metric::Gamma => "gamma_deg",
            Metric::Lambda => "lambda_m",
            Metric::WallTime => "wall_time_s",
        }
    }

    fn value(self, r: &FitResult) -> f64 {
        match self {
            Metric::CNorm => r.c_norm,
            Metric::Gamma => r.params.gamma_deg,
            Metric::Lambda => r.params.lambda_m,
            Metric::WallTime => r.wall_time_s,
        }
    }
}

/// Box-plot summary (min, quartiles, max) of `metrics` per angle and strategy.
pub fn write_quantiles<W: Write>(sink: W, table: &StrategyTable, metrics: &[Metric]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["angle", "strategy", "metric", "n", "min", "q1", "median", "q3", "max"])?;
    for angle in table.angles() {
        for strategy in Strategy::ALL {
            for &metric in metrics {
                let mut v: Vec<f64> = table.cell(angle, strategy).map(|r| metric.value(&r.result)).collect();
                if v.is_empty() {
                    continue;
                }
                v.sort_by(f64::total_cmp);
                let mut record = vec![
                    angle.to_string(),
                    strategy.to_string(),
                    metric.name().to_string(),
                    v.len().to_string(),
                ];
                record.extend([0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&q| quantile(&v, q).to_string()));
                w.write_record(record)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<quantiles>", e))?;
    Ok(())
}

/// Objective maximised over the phase, on the grid's (gamma, lambda) nodes.
pub fn write_surface_csv<W: Write>(sink: W, surface: &GridSurface) -> Result<()> {
    let proj = surface.max_projection([0, 1]);
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["gamma_deg", "lambda_m", "c_max_over_psi"])?;
    for (gamma, row) in surface.axes[0].iter().zip(&proj) {
        for (lambda, value) in surface.axes[1].iter().zip(row) {
            w.write_record([gamma.to_string(), lambda.to_string(), value.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<surface>", e))?;
    Ok(())
}
