//! One-way ANOVA and one-sample t-tests over strategy tables.

mod special;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patternfit::{Optimizer, Strategy, StrategyTable};
use crate::waveform::{WaveKind, C_MAX};

pub use special::{f_upper_tail, ln_gamma, reg_inc_beta, student_t_two_sided};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Stripes perpendicular to the bisector have this orientation.
pub const BISECTOR_NORMAL_GAMMA_DEG: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaReport {
    pub f_stat: f64,
    pub df_between: u64,
    pub df_within: u64,
    pub p_value: f64,
    pub eta_sq: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub group_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestReport {
    pub t_stat: f64,
    pub df: u64,
    pub p_value: f64,
    pub mean: f64,
    pub sd: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaReport> {
    if groups.len() < 2 {
        return Err(Error::SampleSize(format!("{} group(s), need at least 2", groups.len())));
    }
    if let Some(g) = groups.iter().find(|g| g.as_ref().len() < 2) {
        return Err(Error::SampleSize(format!("group of size {}", g.as_ref().len())));
    }
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let all: Vec<f64> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    let grand = mean(&all);
    let group_means: Vec<f64> = groups.iter().map(|g| mean(g.as_ref())).collect();

    let ss_between: f64 = groups
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.as_ref().len() as f64 * (m - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.as_ref().iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    if ss_within == 0.0 {
        return Err(Error::ZeroVariance("no variance within groups".into()));
    }
    let df_between = (groups.len() - 1) as u64;
    let df_within = (n - groups.len()) as u64;
    let f_stat = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    Ok(AnovaReport {
        f_stat,
        df_between,
        df_within,
        p_value: f_upper_tail(f_stat, df_between as f64, df_within as f64)?,
        eta_sq: ss_between / (ss_between + ss_within),
        ss_between,
        ss_within,
        group_means,
    })
}

/// Two-sided one-sample t-test of `sample` against `mu0`.
pub fn one_sample_ttest(sample: &[f64], mu0: f64) -> Result<TTestReport> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleSize(format!("{n} value(s), need at least 2")));
    }
    let deviations: Vec<f64> = sample.iter().map(|v| v - mu0).collect();
    let d_mean = mean(&deviations);
    let var = deviations.iter().map(|d| (d - d_mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance("sample standard deviation is zero".into()));
    }
    let t_stat = d_mean / (sd / (n as f64).sqrt());
    let df = (n - 1) as u64;
    Ok(TTestReport {
        t_stat,
        df,
        p_value: student_t_two_sided(t_stat, df as f64)?,
        mean: d_mean + mu0,
        sd,
    })
}

/// The two comparisons reported per crossing angle: simplex against
/// annealing, once per waveform.
pub const OPTIMIZER_PAIRS: [(Strategy, Strategy); 2] = [
    (
        Strategy::new(WaveKind::Sine, Optimizer::Nm),
        Strategy::new(WaveKind::Sine, Optimizer::Sa),
    ),
    (
        Strategy::new(WaveKind::Square, Optimizer::Nm),
        Strategy::new(WaveKind::Square, Optimizer::Sa),
    ),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub crossing_angle_deg: f64,
    pub first: Strategy,
    pub second: Strategy,
    /// Mean maximised objective of `first` and `second`.
    pub means: [f64; 2],
    pub outcome: std::result::Result<AnovaReport, String>,
    pub significant: bool,
}

impl PairComparison {
    /// Mean maximised objective of `second` minus that of `first`.
    pub fn mean_difference(&self) -> f64 {
        self.means[1] - self.means[0]
    }
}

/// One ANOVA per angle and pair on the maximised objective values.
///
/// A pair that cannot be tested, for instance because both strategies
/// reached the same value on every trial, carries its error and does not
/// stop the others. A strategy missing from an angle is an error.
pub fn strategy_comparison(
    table: &StrategyTable,
    pairs: &[(Strategy, Strategy)],
    alpha: f64,
) -> Result<Vec<PairComparison>> {
    let mut out = Vec::new();
    for angle in table.angles() {
        for &(first, second) in pairs {
            let values = |s: Strategy| -> Result<Vec<f64>> {
                let v: Vec<f64> = table.cell(angle, s).map(|r| r.result.c_norm * C_MAX).collect();
                if v.is_empty() {
                    return Err(Error::IncompleteTable(format!("no {s} rows at {angle} degrees")));
                }
                Ok(v)
            };
            let (a, b) = (values(first)?, values(second)?);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let outcome = one_way_anova(&[&a, &b]).map_err(|e| e.to_string());
            out.push(PairComparison {
                crossing_angle_deg: angle,
                first,
                second,
                means: [mean(&a), mean(&b)],
                significant: matches!(&outcome, Ok(r) if r.p_value < alpha),
                outcome,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTest {
    pub crossing_angle_deg: f64,
    pub strategy: Strategy,
    pub outcome: std::result::Result<TTestReport, String>,
    pub significant: bool,
}

/// t-test of the fitted orientations against 90 degrees for every
/// (angle, strategy) cell present in the table. Cells that cannot be
/// tested carry their error and do not stop the others.
pub fn bisector_normal_test(table: &StrategyTable, alpha: f64) -> Vec<CellTest> {
    let mut out = Vec::new();
    for angle in table.angles() {
        for strategy in Strategy::ALL {
            let gammas: Vec<f64> = table.cell(angle, strategy).map(|r| r.result.params.gamma_deg).collect();
            if gammas.is_empty() {
                continue;
            }
            let outcome = one_sample_ttest(&gammas, BISECTOR_NORMAL_GAMMA_DEG).map_err(|e| e.to_string());
            let significant = matches!(&outcome, Ok(r) if r.p_value < alpha);
            out.push(CellTest {
                crossing_angle_deg: angle,
                strategy,
                outcome,
                significant,
            });
        }
    }
    out
}

fn star(significant: bool) -> &'static str {
    if significant {
        "*"
    } else {
        ""
    }
}

/// Plain-text layout of the ANOVA results: one line per angle and pair.
pub fn render_anova_table(comparisons: &[PairComparison]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8}  {:<22}  {:>18}  {:>9}  {:>10}",
        "angle", "strategies tested", "F-statistic", "p-value", "eta^2"
    );
    for c in comparisons {
        let (f, p, eta) = match &c.outcome {
            Ok(r) => (
                format!("F({},{})={:.3}", r.df_between, r.df_within, r.f_stat),
                format!("{:.3}{}", r.p_value, star(c.significant)),
                format!("{:.3e}", r.eta_sq),
            ),
            Err(_) => ("n/a".to_string(), "n/a".to_string(), "n/a".to_string()),
        };
        let _ = writeln!(
            s,
            "{:>8}  {:<22}  {:>18}  {:>9}  {:>10}",
            c.crossing_angle_deg,
            format!("{}, {}", c.first, c.second),
            f,
            p,
            eta
        );
    }
    s
}

/// Plain-text layout of the t-tests: angle rows, one column pair per strategy.
pub fn render_ttest_table(tests: &[CellTest]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:>8}", "angle");
    for st in Strategy::ALL {
        let _ = write!(s, "  {:>24}", st.to_string());
    }
    s.push('\n');
    let mut angles: Vec<f64> = tests.iter().map(|t| t.crossing_angle_deg).collect();
    angles.dedup();
    for angle in angles {
        let _ = write!(s, "{angle:>8}");
        for st in Strategy::ALL {
            let cell = tests
                .iter()
                .find(|t| t.crossing_angle_deg == angle && t.strategy == st)
                .map(|t| match &t.outcome {
                    Ok(r) => format!("t({})={:.3} p={:.3}{}", r.df, r.t_stat, r.p_value, star(t.significant)),
                    Err(_) => "n/a".to_string(),
                })
                .unwrap_or_else(|| "-".to_string());
            let _ = write!(s, "  {cell:>24}");
        }
        s.push('\n');
    }
    s
}
