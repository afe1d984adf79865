//! Oriented periodic waveforms and the group-contrast objective.
//!
//! A wave with orientation `gamma`, wavelength `lambda` and phase `psi` is a
//! function of the rotated coordinate `X = x sin(gamma) - y cos(gamma)`,
//! i.e. of the signed distance along the stripe normal. Stripes themselves
//! run along `(cos gamma, sin gamma)`.
//!
//! The objective rewards group 1 on crests and group 2 on troughs:
//!
//! ```text
//! C = sum_{g1} f / N1 - sum_{g2} f / N2        in [-2, 2]
//! ```

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_io::{Frame, Point};

/// Largest attainable objective value.
pub const C_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub gamma_deg: f64,
    pub lambda_m: f64,
    pub psi_rad: f64,
}

impl WaveParams {
    pub const fn new(gamma_deg: f64, lambda_m: f64, psi_rad: f64) -> Self {
        Self {
            gamma_deg,
            lambda_m,
            psi_rad,
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.gamma_deg, self.lambda_m, self.psi_rad]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Unit normal `n` with `X = n . p`.
    pub fn normal(self) -> Point {
        let g = self.gamma_deg.to_radians();
        Point::new(g.sin(), -g.cos())
    }

    /// Unit vector along the stripes.
    pub fn stripe_direction(self) -> Point {
        let g = self.gamma_deg.to_radians();
        Point::new(g.cos(), g.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WaveKind {
    Sine,
    Square,
}

impl WaveKind {
    pub const ALL: [WaveKind; 2] = [WaveKind::Sine, WaveKind::Square];

    pub fn name(self) -> &'static str {
        match self {
            WaveKind::Sine => "sine",
            WaveKind::Square => "square",
        }
    }

    #[inline]
    fn shape(self, phase: f64) -> f64 {
        let s = phase.sin();
        match self {
            WaveKind::Sine => s,
            WaveKind::Square => signum0(s),
        }
    }
}

/// Sign with `signum0(0) == 0`.
#[inline]
pub fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn rotated_coord(pos: Point, gamma_deg: f64) -> f64 {
    let g = gamma_deg.to_radians();
    pos.x * g.sin() - pos.y * g.cos()
}

pub fn eval_wave(kind: WaveKind, pos: Point, params: WaveParams) -> f64 {
    let x = rotated_coord(pos, params.gamma_deg);
    kind.shape(TAU * x / params.lambda_m + params.psi_rad)
}

/// Objective `C` (sine) or `C'` (square) of `params` on `frame`.
pub fn objective(kind: WaveKind, frame: &Frame, params: WaveParams) -> Result<f64> {
    frame.check_groups()?;
    Ok(FrameObjective::new(kind, frame)?.eval(params))
}

/// A frame prepared for repeated objective evaluation.
#[derive(Debug, Clone)]
pub struct FrameObjective {
    kind: WaveKind,
    g1: Vec<Point>,
    g2: Vec<Point>,
}

impl FrameObjective {
    pub fn new(kind: WaveKind, frame: &Frame) -> Result<Self> {
        frame.check_groups()?;
        Ok(Self {
            kind,
            g1: frame.g1.clone(),
            g2: frame.g2.clone(),
        })
    }

    pub fn kind(&self) -> WaveKind {
        self.kind
    }

    pub fn eval(&self, params: WaveParams) -> f64 {
        let g = params.gamma_deg.to_radians();
        let (sg, cg) = g.sin_cos();
        let k = TAU / params.lambda_m;
        let psi = params.psi_rad;
        let group_mean = |pts: &[Point]| {
            pts.iter()
                .map(|p| self.kind.shape(k * (p.x * sg - p.y * cg) + psi))
                .sum::<f64>()
                / pts.len() as f64
        };
        group_mean(&self.g1) - group_mean(&self.g2)
    }

    /// Evaluates a flat `[gamma_deg, lambda_m, psi_rad]` vector.
    pub fn eval_slice(&self, v: &[f64]) -> f64 {
        self.eval(WaveParams::from_slice(v))
    }
}

fn wrap(v: f64, period: f64) -> f64 {
    let r = v.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Reduces parameters to `gamma in [0, 180)`, `psi in [0, 2 pi)` without
/// changing the wave anywhere.
///
/// Turning the orientation by 180 degrees negates `X`, and
/// `sin(-u + psi) = sin(u + pi - psi)`, so each half turn removed from
/// `gamma` maps `psi` to `pi - psi`.
pub fn canonicalize(params: WaveParams) -> Result<WaveParams> {
    if !(params.lambda_m > 0.0) || !params.lambda_m.is_finite() {
        return Err(Error::InvalidWavelength(params.lambda_m));
    }
    let turns = (params.gamma_deg / 180.0).floor();
    let mut gamma = params.gamma_deg - 180.0 * turns;
    if !(0.0..180.0).contains(&gamma) {
        gamma = wrap(gamma, 180.0);
    }
    let odd = (turns.rem_euclid(2.0)) == 1.0;
    let psi = if odd { PI - params.psi_rad } else { params.psi_rad };
    Ok(WaveParams::new(gamma, params.lambda_m, wrap(psi, TAU)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn rotated_coordinate_cases() {
        assert!((rotated_coord(Point::new(1.0, 0.0), 90.0) - 1.0).abs() < EPS);
        assert!((rotated_coord(Point::new(0.0, 1.0), 0.0) + 1.0).abs() < EPS);
        let expected = 1.5 - 2.0 * 3f64.sqrt();
        assert!((rotated_coord(Point::new(3.0, 4.0), 30.0) - expected).abs() < EPS);
    }

    #[test]
    fn wave_values() {
        let p = WaveParams::new(90.0, 4.0, 0.0);
        assert_eq!(eval_wave(WaveKind::Sine, Point::new(0.0, 0.0), p), 0.0);
        assert!((eval_wave(WaveKind::Sine, Point::new(1.0, 0.0), p) - 1.0).abs() < EPS);
        assert!((eval_wave(WaveKind::Sine, Point::new(5.0, 0.0), p) - 1.0).abs() < EPS);
        assert_eq!(eval_wave(WaveKind::Square, Point::new(3.0, 0.0), p), -1.0);
        assert_eq!(eval_wave(WaveKind::Square, Point::new(0.0, 0.0), p), 0.0);
    }

    #[test]
    fn objective_bounds_and_hand_values() {
        let p = WaveParams::new(90.0, 4.0, 0.0);
        let perfect = Frame::new(0.0, vec![Point::new(1.0, 0.0)], vec![Point::new(3.0, 0.0)]);
        for kind in WaveKind::ALL {
            assert!((objective(kind, &perfect, p).unwrap() - 2.0).abs() < EPS);
        }
        let same = Frame::new(0.0, vec![Point::new(0.0, 0.0)], vec![Point::new(0.0, 0.0)]);
        assert_eq!(objective(WaveKind::Sine, &same, WaveParams::new(17.0, 1.3, 0.4)).unwrap(), 0.0);

        let f = Frame::new(
            0.0,
            vec![Point::new(1.0, 0.0), Point::new(0.0, 0.0)],
            vec![Point::new(3.0, 0.0)],
        );
        assert!((objective(WaveKind::Sine, &f, p).unwrap() - 1.5).abs() < EPS);
    }

    #[test]
    fn empty_group_rejected() {
        let f = Frame::new(0.0, vec![], vec![Point::new(3.0, 0.0)]);
        assert!(matches!(
            objective(WaveKind::Sine, &f, WaveParams::new(0.0, 1.0, 0.0)),
            Err(Error::GroupEmpty { group: 1 })
        ));
    }

    #[test]
    fn canonical_forms() {
        let p = WaveParams::new(90.0, 2.0, 0.0);
        assert_eq!(canonicalize(p).unwrap(), p);

        let c = canonicalize(WaveParams::new(45.0, 2.0, TAU + 0.1)).unwrap();
        assert_eq!(c.gamma_deg, 45.0);
        assert!((c.psi_rad - 0.1).abs() < EPS);

        let c = canonicalize(WaveParams::new(-30.0, 1.0, 0.0)).unwrap();
        assert!((c.gamma_deg - 150.0).abs() < EPS);
        assert!((0.0..TAU).contains(&c.psi_rad));

        assert!(matches!(
            canonicalize(WaveParams::new(0.0, 0.0, 0.0)),
            Err(Error::InvalidWavelength(_))
        ));
        assert!(canonicalize(WaveParams::new(0.0, -1.0, 0.0)).is_err());
    }

    #[test]
    fn canonical_form_evaluates_identically() {
        let mut rng = crate::rng::SeededRng::new(3);
        let raw = WaveParams::new(270.0, 2.0, 0.3);
        let c = canonicalize(raw).unwrap();
        assert!((c.gamma_deg - 90.0).abs() < EPS);
        for _ in 0..100 {
            let p = Point::new(rng.uniform_in(-10.0, 10.0), rng.uniform_in(-10.0, 10.0));
            assert!((eval_wave(WaveKind::Sine, p, raw) - eval_wave(WaveKind::Sine, p, c)).abs() < EPS);
        }
    }

    #[test]
    fn square_at_separable_configuration() {
        let p = WaveParams::new(90.0, 4.0, 0.0);
        let f = Frame::new(
            0.0,
            vec![Point::new(0.5, 0.0), Point::new(1.5, 2.0)],
            vec![Point::new(2.5, 0.0), Point::new(3.9, -1.0)],
        );
        assert_eq!(objective(WaveKind::Square, &f, p).unwrap(), 2.0);
        assert!(objective(WaveKind::Sine, &f, p).unwrap() < 2.0);
    }
}
