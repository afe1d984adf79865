use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{checked, Axis, OptimResult, SearchBox};
use crate::error::{Error, Result};

pub const MAX_GRID_POINTS: u128 = 100_000_000;

/// Objective values on a Cartesian grid, last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSurface {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl GridSurface {
    /// Coordinates of the flat index `i`.
    pub fn point(&self, mut i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.axes.len()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            x[d] = axis[i % axis.len()];
            i /= axis.len();
        }
        x
    }

    /// Maximum over every axis except `keep`, which must list two axes.
    /// Rows follow `keep[0]`, columns `keep[1]`.
    pub fn max_projection(&self, keep: [usize; 2]) -> Vec<Vec<f64>> {
        let (a, b) = (keep[0], keep[1]);
        let mut out = vec![vec![f64::NEG_INFINITY; self.axes[b].len()]; self.axes[a].len()];
        let dims: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        for (i, &v) in self.values.iter().enumerate() {
            let mut rest = i;
            let mut idx = vec![0; dims.len()];
            for d in (0..dims.len()).rev() {
                idx[d] = rest % dims[d];
                rest /= dims[d];
            }
            let cell = &mut out[idx[a]][idx[b]];
            if v > *cell {
                *cell = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: OptimResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<GridSurface>,
}

/// Grid coordinates of one axis. Periodic axes get `n` points spaced by
/// `width / n` starting at `lo` (the upper end is the same point as `lo`);
/// closed axes get `n` evenly spaced points including both ends.
pub fn axis_points(axis: &Axis, n: usize) -> Vec<f64> {
    if axis.periodic {
        let step = axis.width() / n as f64;
        (0..n).map(|i| axis.lo + i as f64 * step).collect()
    } else {
        let step = axis.width() / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { axis.hi } else { axis.lo + i as f64 * step })
            .collect()
    }
}

/// Exhaustive maximisation over a Cartesian grid.
///
/// Ties go to the lexicographically smallest grid point. Slices along the
/// first axis are evaluated in parallel and reduced in axis order, so the
/// result does not depend on the thread count.
pub fn grid_search<F>(
    obj: F,
    bounds: &SearchBox,
    resolution: &[usize],
    keep_surface: bool,
) -> Result<GridResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    bounds.validate()?;
    if resolution.len() != bounds.dim() {
        return Err(Error::Config(format!(
            "{} grid resolutions for {} axes",
            resolution.len(),
            bounds.dim()
        )));
    }
    if let Some(r) = resolution.iter().find(|&&r| r < 2) {
        return Err(Error::Config(format!("grid resolution {r} below 2")));
    }
    let total: u128 = resolution.iter().map(|&r| r as u128).product();
    if total > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge(total));
    }
    let started = Instant::now();
    let axes: Vec<Vec<f64>> = bounds
        .axes
        .iter()
        .zip(resolution)
        .map(|(a, &n)| axis_points(a, n))
        .collect();
    let inner: usize = resolution[1..].iter().product();

    let slices: Vec<Result<(usize, f64, Option<Vec<f64>>)>> = (0..resolution[0])
        .into_par_iter()
        .map(|i0| {
            let mut x = vec![0.0; axes.len()];
            x[0] = axes[0][i0];
            let mut best = (0usize, f64::NEG_INFINITY);
            let mut values = keep_surface.then(|| Vec::with_capacity(inner));
            for j in 0..inner {
                let mut rest = j;
                for d in (1..axes.len()).rev() {
                    x[d] = axes[d][rest % axes[d].len()];
                    rest /= axes[d].len();
                }
                let v = checked(&x, obj(&x))?;
                if v > best.1 {
                    best = (j, v);
                }
                if let Some(vals) = values.as_mut() {
                    vals.push(v);
                }
            }
            Ok((i0 * inner + best.0, best.1, values))
        })
        .collect();

    let mut best_index = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    let mut surface_values = keep_surface.then(|| Vec::with_capacity(total as usize));
    for slice in slices {
        let (idx, v, values) = slice?;
        if v > best_value {
            best_index = idx;
            best_value = v;
        }
        if let (Some(all), Some(vals)) = (surface_values.as_mut(), values) {
            all.extend(vals);
        }
    }

    let surface = GridSurface {
        axes,
        values: surface_values.unwrap_or_default(),
    };
    let x = surface.point(best_index);
    Ok(GridResult {
        best: OptimResult {
            x,
            value: best_value,
            evaluations: total as u64,
            iterations: 1,
            wall_time_s: started.elapsed().as_secs_f64(),
            trace: None,
        },
        surface: keep_surface.then_some(surface),
    })
}
