use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{checked, OptimResult, SearchBox, TraceEntry};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Geometric cooling schedule and proposal widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaSchedule {
    pub t0: f64,
    pub alpha: f64,
    pub steps_per_temp: u64,
    pub t_min: f64,
    /// Proposal standard deviation per axis at temperature `t0`.
    pub step_scale: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub trace: bool,
}

impl Default for SaSchedule {
    /// Defaults for the `[gamma_deg, lambda_m, psi_rad]` wave fit.
    fn default() -> Self {
        Self {
            t0: 1.0,
            alpha: 0.95,
            steps_per_temp: 200,
            t_min: 1e-4,
            step_scale: vec![18.0, 0.5, 0.3],
            seed: 0,
            trace: false,
        }
    }
}

impl SaSchedule {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.t_min > 0.0 && self.t0 > self.t_min && self.t0.is_finite()) {
            return Err(Error::Config(format!(
                "annealing needs t0 > t_min > 0, got t0 = {}, t_min = {}",
                self.t0, self.t_min
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("cooling factor {} outside (0, 1)", self.alpha)));
        }
        if self.steps_per_temp == 0 {
            return Err(Error::Config("steps_per_temp must be positive".into()));
        }
        if self.step_scale.len() != dim || self.step_scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config(format!(
                "need {dim} positive step scales, got {:?}",
                self.step_scale
            )));
        }
        Ok(())
    }

    /// Number of temperature levels the schedule visits.
    pub fn levels(&self) -> u64 {
        let mut t = self.t0;
        let mut n = 0;
        while t > self.t_min {
            n += 1;
            t *= self.alpha;
        }
        n
    }
}

/// Maximises `obj` over `bounds` by simulated annealing.
///
/// The chain starts at a uniform random point. At temperature `T` each
/// coordinate moves by a Gaussian step of width `step_scale * T / t0`;
/// periodic axes wrap and the others reflect at the bounds. A move that
/// changes the value by `d` is accepted when `d >= 0`, otherwise with
/// probability `exp(d / T)`. After `steps_per_temp` proposals the
/// temperature is multiplied by `alpha`, until it no longer exceeds
/// `t_min`. The best point ever visited is returned. The whole run is a
/// function of the schedule's seed.
pub fn simulated_annealing<F>(obj: F, bounds: &SearchBox, schedule: &SaSchedule) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    bounds.validate()?;
    schedule.validate(bounds.dim())?;
    let started = Instant::now();
    let mut rng = SeededRng::new(schedule.seed);

    let mut current: Vec<f64> = bounds
        .axes
        .iter()
        .map(|a| a.fold(rng.uniform_in(a.lo, a.hi)))
        .collect();
    let mut current_value = checked(&current, obj(&current))?;
    let mut best = current.clone();
    let mut best_value = current_value;
    let mut evaluations = 1u64;
    let mut iterations = 0u64;
    let mut trace = schedule.trace.then(Vec::new);
    let mut proposal = current.clone();

    let mut temperature = schedule.t0;
    while temperature > schedule.t_min {
        let shrink = temperature / schedule.t0;
        for _ in 0..schedule.steps_per_temp {
            for ((p, &c), (axis, &scale)) in proposal
                .iter_mut()
                .zip(&current)
                .zip(bounds.axes.iter().zip(&schedule.step_scale))
            {
                *p = axis.fold(c + rng.normal() * scale * shrink);
            }
            let value = checked(&proposal, obj(&proposal))?;
            evaluations += 1;
            iterations += 1;
            let delta = value - current_value;
            if delta >= 0.0 || rng.uniform() < (delta / temperature).exp() {
                current.copy_from_slice(&proposal);
                current_value = value;
                if value > best_value {
                    best.copy_from_slice(&proposal);
                    best_value = value;
                }
            }
            if let Some(t) = trace.as_mut() {
                t.push(TraceEntry {
                    iteration: iterations,
                    current: current_value,
                    best: best_value,
                });
            }
        }
        temperature *= schedule.alpha;
    }

    Ok(OptimResult {
        x: best,
        value: best_value,
        evaluations,
        iterations,
        wall_time_s: started.elapsed().as_secs_f64(),
        trace,
    })
}
