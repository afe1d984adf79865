//! Derivative-free maximisers over a flat parameter vector.
//!
//! The optimisers know nothing about waves; they see a black-box
//! `Fn(&[f64]) -> f64` and a box of axes, some of which wrap around.

mod annealing;
mod grid;
mod nelder_mead;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annealing::{simulated_annealing, SaSchedule};
pub use grid::{axis_points, grid_search, GridResult, GridSurface, MAX_GRID_POINTS};
pub use nelder_mead::{nelder_mead, nm_multistart, NmOptions};

/// One coordinate of a search box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    /// Periodic axes wrap into `[lo, hi)`; the others reflect at both ends.
    pub periodic: bool,
}

impl Axis {
    pub const fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            periodic: false,
        }
    }

    pub const fn periodic(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            periodic: true,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Maps an arbitrary value back into the axis.
    pub fn fold(&self, v: f64) -> f64 {
        let w = self.width();
        if self.periodic {
            let r = (v - self.lo).rem_euclid(w);
            if r >= w {
                self.lo
            } else {
                self.lo + r
            }
        } else {
            let mut u = (v - self.lo).rem_euclid(2.0 * w);
            if u > w {
                u = 2.0 * w - u;
            }
            (self.lo + u).clamp(self.lo, self.hi)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        if self.periodic {
            v >= self.lo && v < self.hi
        } else {
            v >= self.lo && v <= self.hi
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub axes: Vec<Axis>,
}

impl SearchBox {
    pub fn new(axes: Vec<Axis>) -> Self {
        Self { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Config("search box has no axes".into()));
        }
        for (i, a) in self.axes.iter().enumerate() {
            if !(a.lo.is_finite() && a.hi.is_finite() && a.hi > a.lo) {
                return Err(Error::Config(format!(
                    "axis {i}: degenerate interval [{}, {}]",
                    a.lo, a.hi
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.axes.iter().zip(x).all(|(a, &v)| a.contains(v))
    }
}

/// Parameter bounds for the wave fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub gamma_deg: (f64, f64),
    pub lambda_m: (f64, f64),
    pub psi_rad: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            gamma_deg: (0.0, 180.0),
            lambda_m: (0.5, 10.0),
            psi_rad: (0.0, TAU),
        }
    }
}

impl Bounds {
    pub fn with_lambda(lambda_min: f64, lambda_max: f64) -> Self {
        Self {
            lambda_m: (lambda_min, lambda_max),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.lambda_m;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Config(format!("wavelength bounds [{lo}, {hi}]")));
        }
        self.search_box().validate()
    }

    /// `[gamma_deg, lambda_m, psi_rad]` with the two angles periodic.
    pub fn search_box(&self) -> SearchBox {
        SearchBox::new(vec![
            Axis::periodic(self.gamma_deg.0, self.gamma_deg.1),
            Axis::closed(self.lambda_m.0, self.lambda_m.1),
            Axis::periodic(self.psi_rad.0, self.psi_rad.1),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: u64,
    /// Value at the current point (annealer) or best vertex (simplex).
    pub current: f64,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
    pub iterations: u64,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

pub(crate) fn checked(x: &[f64], v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObjective(x.to_vec()))
    }
}
