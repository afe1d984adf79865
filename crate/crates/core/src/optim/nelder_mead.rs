use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{checked, OptimResult, TraceEntry};
use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmOptions {
    /// Offset of the initial simplex vertices along each axis; a single
    /// value applies to every axis.
    pub initial_step: Vec<f64>,
    /// Stop once best and worst vertex values differ by less than this.
    pub tol: f64,
    pub max_iter: u64,
    #[serde(default)]
    pub trace: bool,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            initial_step: vec![1.0],
            tol: 1e-12,
            max_iter: 5000,
            trace: false,
        }
    }
}

impl NmOptions {
    fn step(&self, axis: usize) -> f64 {
        match self.initial_step.len() {
            1 => self.initial_step[0],
            _ => self.initial_step[axis],
        }
    }
}

struct Vertex {
    x: Vec<f64>,
    /// Negated objective; the simplex minimises.
    cost: f64,
}

/// Maximises `obj` with the Nelder-Mead simplex method.
pub fn nelder_mead<F>(obj: F, x0: &[f64], options: &NmOptions) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    let k = x0.len();
    if k == 0 {
        return Err(Error::Config("empty starting point".into()));
    }
    if options.initial_step.len() != 1 && options.initial_step.len() != k {
        return Err(Error::Config(format!(
            "{} initial steps for {k} parameters",
            options.initial_step.len()
        )));
    }
    let started = Instant::now();
    let mut evaluations = 0u64;
    let mut eval = |x: Vec<f64>| -> Result<Vertex> {
        evaluations += 1;
        let v = checked(&x, obj(&x))?;
        Ok(Vertex { x, cost: -v })
    };

    let mut simplex = Vec::with_capacity(k + 1);
    simplex.push(eval(x0.to_vec())?);
    for i in 0..k {
        let mut x = x0.to_vec();
        x[i] += options.step(i);
        simplex.push(eval(x)?);
    }

    let mut trace = options.trace.then(Vec::new);
    let mut iterations = 0u64;
    loop {
        // Stable sort keeps earlier vertices first among equal costs.
        simplex.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        iterations += 1;
        if let Some(t) = trace.as_mut() {
            t.push(TraceEntry {
                iteration: iterations,
                current: -simplex[0].cost,
                best: -simplex[0].cost,
            });
        }
        let spread = simplex[k].cost - simplex[0].cost;
        if spread < options.tol || iterations > options.max_iter {
            break;
        }

        let mut centroid = vec![0.0; k];
        for v in &simplex[..k] {
            for (c, xi) in centroid.iter_mut().zip(&v.x) {
                *c += xi / k as f64;
            }
        }
        let toward = |from: &[f64], coeff: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, f)| c + coeff * (f - c))
                .collect()
        };

        let worst_cost = simplex[k].cost;
        let reflected = eval(toward(&simplex[k].x, -REFLECT))?;
        if reflected.cost < simplex[0].cost {
            let expanded = eval(toward(&reflected.x, EXPAND))?;
            simplex[k] = if expanded.cost < reflected.cost {
                expanded
            } else {
                reflected
            };
            continue;
        }
        if reflected.cost < simplex[k - 1].cost {
            simplex[k] = reflected;
            continue;
        }
        let contracted = if reflected.cost < worst_cost {
            let c = eval(toward(&reflected.x, CONTRACT))?;
            (c.cost <= reflected.cost).then_some(c)
        } else {
            let c = eval(toward(&simplex[k].x, CONTRACT))?;
            (c.cost < worst_cost).then_some(c)
        };
        match contracted {
            Some(c) => simplex[k] = c,
            None => {
                let best = simplex[0].x.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&v.x)
                        .map(|(b, xi)| b + SHRINK * (xi - b))
                        .collect();
                    *v = eval(x)?;
                }
            }
        }
    }

    let best = &simplex[0];
    Ok(OptimResult {
        x: best.x.clone(),
        value: -best.cost,
        evaluations,
        iterations,
        wall_time_s: started.elapsed().as_secs_f64(),
        trace,
    })
}

/// Runs [`nelder_mead`] from every start and keeps the best result.
///
/// Ties go to the earliest start. Evaluation counts and wall time are
/// summed over all runs; the trace is that of the winning run.
pub fn nm_multistart<F>(obj: F, starts: &[Vec<f64>], options: &NmOptions) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    if starts.is_empty() {
        return Err(Error::Config("no starting points".into()));
    }
    let mut best: Option<OptimResult> = None;
    let (mut evaluations, mut iterations, mut wall) = (0u64, 0u64, 0.0);
    for x0 in starts {
        let r = nelder_mead(&obj, x0, options)?;
        evaluations += r.evaluations;
        iterations += r.iterations;
        wall += r.wall_time_s;
        if best.as_ref().map_or(true, |b| r.value > b.value) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one start");
    best.evaluations = evaluations;
    best.iterations = iterations;
    best.wall_time_s = wall;
    Ok(best)
}
