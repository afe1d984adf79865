//! Synthetic striped frames and crossing trials with known ground truth.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_io::{Frame, Group, Point, TrackSample, Trial};
use crate::rng::SeededRng;
use crate::waveform::{rotated_coord, WaveParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeSpec {
    pub gamma_deg: f64,
    pub lambda_m: f64,
    pub psi_rad: f64,
    pub n1: usize,
    pub n2: usize,
    pub jitter_sd_m: f64,
    /// Half-width of the square the points are placed in.
    pub extent_m: f64,
    pub seed: u64,
}

impl StripeSpec {
    pub fn params(&self) -> WaveParams {
        WaveParams::new(self.gamma_deg, self.lambda_m, self.psi_rad)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("stripe groups must be non-empty".into()));
        }
        if !(self.jitter_sd_m >= 0.0) || !self.jitter_sd_m.is_finite() {
            return Err(Error::Config(format!("jitter sd {}", self.jitter_sd_m)));
        }
        if !(self.lambda_m > 0.0) || !self.lambda_m.is_finite() {
            return Err(Error::InvalidWavelength(self.lambda_m));
        }
        if !(self.extent_m > 0.0) || !self.gamma_deg.is_finite() || !self.psi_rad.is_finite() {
            return Err(Error::Config("extent, orientation and phase must be finite, extent positive".into()));
        }
        Ok(())
    }
}

/// Ground truth written next to generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub gamma_deg: f64,
    pub lambda_m: f64,
    pub psi_rad: f64,
    pub seed: u64,
    pub jitter_sd_m: f64,
}

const MAX_ATTEMPTS_PER_POINT: usize = 10_000;

/// Places `n` points on the lines where the wave phase equals
/// `target + 2 pi k`, uniformly along them inside the box.
fn place_on_stripes(
    rng: &mut SeededRng,
    params: WaveParams,
    target_phase: f64,
    n: usize,
    extent: f64,
) -> Result<Vec<Point>> {
    let normal = params.normal();
    let lambda = params.lambda_m;
    // Rotated coordinate of the k = 0 line.
    let x0 = (target_phase - params.psi_rad) * lambda / (2.0 * PI);
    let inside = |p: Point| p.x.abs() <= extent && p.y.abs() <= extent;

    let reach = extent * (normal.x.abs() + normal.y.abs());
    let k_lo = ((-reach - x0) / lambda).ceil();
    let k_hi = ((reach - x0) / lambda).floor();
    if k_lo > k_hi {
        return Err(Error::EmptyGeneration { extent_m: extent });
    }

    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > MAX_ATTEMPTS_PER_POINT * n {
            return Err(Error::EmptyGeneration { extent_m: extent });
        }
        let p = Point::new(rng.uniform_in(-extent, extent), rng.uniform_in(-extent, extent));
        let x = rotated_coord(p, params.gamma_deg);
        let k = ((x - x0) / lambda).round();
        let snapped = p + normal * (x0 + k * lambda - x);
        if inside(snapped) {
            out.push(snapped);
        }
    }
    Ok(out)
}

/// Draws a frame whose first group sits on the crests and second group on
/// the troughs of the wave described by `spec`, then jitters every point.
pub fn generate_striped_frame(spec: &StripeSpec) -> Result<(Frame, WaveParams)> {
    spec.validate()?;
    let params = spec.params();
    let mut rng = SeededRng::new(spec.seed);
    let mut g1 = place_on_stripes(&mut rng, params, PI / 2.0, spec.n1, spec.extent_m)?;
    let mut g2 = place_on_stripes(&mut rng, params, 1.5 * PI, spec.n2, spec.extent_m)?;
    if spec.jitter_sd_m > 0.0 {
        for p in g1.iter_mut().chain(g2.iter_mut()) {
            p.x += spec.jitter_sd_m * rng.normal();
            p.y += spec.jitter_sd_m * rng.normal();
        }
    }
    Ok((Frame::new(0.0, g1, g2), params))
}

/// Two groups crossing at a given angle, laid out in staggered rows that
/// already form stripes perpendicular to the bisector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSpec {
    pub trial_id: String,
    pub angle_deg: f64,
    pub n1: usize,
    pub n2: usize,
    pub speed_mps: f64,
    pub duration_s: f64,
    pub fs_hz: f64,
    /// Distance between neighbours within a row.
    pub lateral_spacing_m: f64,
    /// Distance between consecutive rows of the same group.
    pub wavelength_m: f64,
    /// Standard deviation of each pedestrian's fixed offset from the lattice.
    pub jitter_sd_m: f64,
    pub seed: u64,
}

impl Default for CrossingSpec {
    fn default() -> Self {
        Self {
            trial_id: "synthetic".into(),
            angle_deg: 90.0,
            n1: 20,
            n2: 20,
            speed_mps: 1.2,
            duration_s: 20.0,
            fs_hz: 10.0,
            lateral_spacing_m: 1.0,
            wavelength_m: 2.0,
            jitter_sd_m: 0.0,
            seed: 0,
        }
    }
}

impl CrossingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_deg > 0.0 && self.angle_deg <= 180.0) {
            return Err(Error::Config(format!("crossing angle {} outside (0, 180]", self.angle_deg)));
        }
        if !(self.fs_hz > 0.0) || !self.fs_hz.is_finite() {
            return Err(Error::Config(format!("sampling rate {}", self.fs_hz)));
        }
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("both groups need pedestrians".into()));
        }
        for (name, v) in [
            ("speed", self.speed_mps),
            ("duration", self.duration_s),
            ("lateral spacing", self.lateral_spacing_m),
            ("wavelength", self.wavelength_m),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} {v}")));
            }
        }
        if !(self.jitter_sd_m >= 0.0) {
            return Err(Error::Config(format!("jitter sd {}", self.jitter_sd_m)));
        }
        Ok(())
    }

    /// Stripes of the lattice at the meeting time, in the bisector frame.
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            gamma_deg: 90.0,
            lambda_m: self.wavelength_m,
            psi_rad: 0.0,
            seed: self.seed,
            jitter_sd_m: self.jitter_sd_m,
        }
    }
}

/// Lattice positions at the meeting time for a group of `n`: rows at
/// `x = k lambda + offset`, odd rows shifted by half a spacing.
fn lattice(n: usize, lambda: f64, offset: f64, spacing: f64) -> Vec<Point> {
    let rows = (n as f64).sqrt().ceil() as usize;
    let per_row = n.div_ceil(rows);
    let x_shift = (rows / 2) as f64 * lambda;
    let y_shift = 0.5 * (per_row as f64 - 1.0) * spacing;
    (0..n)
        .map(|i| {
            let (k, j) = (i / per_row, i % per_row);
            let stagger = if k % 2 == 1 { 0.5 * spacing } else { 0.0 };
            Point::new(
                k as f64 * lambda + offset - x_shift,
                j as f64 * spacing + stagger - y_shift,
            )
        })
        .collect()
}

/// Generates a crossing trial whose groups meet at the origin half way
/// through, walking at `+-angle/2` to the +x bisector.
pub fn generate_crossing_trial(spec: &CrossingSpec) -> Result<Trial> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let half = (spec.angle_deg / 2.0).to_radians();
    let lambda = spec.wavelength_m;
    let mid = spec.duration_s / 2.0;
    let steps = (spec.duration_s * spec.fs_hz).round() as usize;

    let groups = [
        (Group::G1, spec.n1, 0.25 * lambda, Point::new(half.cos(), half.sin())),
        (Group::G2, spec.n2, 0.75 * lambda, Point::new(half.cos(), -half.sin())),
    ];
    let mut samples = Vec::with_capacity((spec.n1 + spec.n2) * (steps + 1));
    for (group, n, offset, heading) in groups {
        let velocity = heading * spec.speed_mps;
        for (i, home) in lattice(n, lambda, offset, spec.lateral_spacing_m).into_iter().enumerate() {
            let jitter = Point::new(spec.jitter_sd_m * rng.normal(), spec.jitter_sd_m * rng.normal());
            let id = format!("g{}_{i:03}", group.label());
            for s in 0..=steps {
                let t = s as f64 / spec.fs_hz;
                samples.push(TrackSample {
                    pedestrian_id: id.clone(),
                    group,
                    t,
                    pos: home + jitter + velocity * (t - mid),
                });
            }
        }
    }
    let mut trial = Trial::from_samples(spec.trial_id.clone(), spec.angle_deg, Some(spec.fs_hz), samples)?;
    trial.bisector = Some(Point::new(1.0, 0.0));
    Ok(trial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::crossing_window;
    use crate::waveform::{eval_wave, objective, WaveKind};

    fn spec() -> StripeSpec {
        StripeSpec {
            gamma_deg: 60.0,
            lambda_m: 2.0,
            psi_rad: 0.7,
            n1: 40,
            n2: 35,
            jitter_sd_m: 0.0,
            extent_m: 5.0,
            seed: 3,
        }
    }

    #[test]
    fn noiseless_frame_saturates_both_waves() {
        let (frame, truth) = generate_striped_frame(&spec()).unwrap();
        assert_eq!(frame.g1.len(), 40);
        assert_eq!(frame.g2.len(), 35);
        for p in frame.points() {
            assert!(p.x.abs() <= 5.0 && p.y.abs() <= 5.0);
        }
        for &p in &frame.g1 {
            assert_eq!(eval_wave(WaveKind::Square, p, truth), 1.0);
        }
        for &p in &frame.g2 {
            assert_eq!(eval_wave(WaveKind::Square, p, truth), -1.0);
        }
        assert_eq!(objective(WaveKind::Square, &frame, truth).unwrap(), 2.0);
        assert!((objective(WaveKind::Sine, &frame, truth).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_frame() {
        let mut s = spec();
        s.jitter_sd_m = 0.2;
        assert_eq!(generate_striped_frame(&s).unwrap(), generate_striped_frame(&s).unwrap());
        let mut t = s.clone();
        t.seed = 4;
        assert_ne!(generate_striped_frame(&s).unwrap().0, generate_striped_frame(&t).unwrap().0);
    }

    #[test]
    fn tiny_extent_is_empty() {
        let mut s = spec();
        s.gamma_deg = 90.0;
        s.psi_rad = 0.0;
        s.lambda_m = 100.0;
        s.extent_m = 1.0;
        assert!(matches!(generate_striped_frame(&s), Err(Error::EmptyGeneration { .. })));
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec();
        s.n2 = 0;
        assert!(generate_striped_frame(&s).is_err());
        let mut s = spec();
        s.lambda_m = 0.0;
        assert!(matches!(generate_striped_frame(&s), Err(Error::InvalidWavelength(_))));
        for angle in [0.0, -10.0, 181.0] {
            let c = CrossingSpec {
                angle_deg: angle,
                ..Default::default()
            };
            assert!(matches!(generate_crossing_trial(&c), Err(Error::Config(_))));
        }
    }

    #[test]
    fn headings_follow_the_angle() {
        let c = CrossingSpec {
            angle_deg: 90.0,
            ..Default::default()
        };
        let trial = generate_crossing_trial(&c).unwrap();
        for track in trial.tracks() {
            let d = track.positions[track.len() - 1] - track.positions[0];
            let heading = d.y.atan2(d.x).to_degrees();
            let expected = if track.group == Group::G1 { 45.0 } else { -45.0 };
            assert!((heading - expected).abs() < 1e-9, "{heading}");
        }
        assert_eq!(trial.bisector, Some(Point::new(1.0, 0.0)));
    }

    #[test]
    fn antiparallel_flows_use_x_bisector() {
        let c = CrossingSpec {
            angle_deg: 180.0,
            ..Default::default()
        };
        let trial = generate_crossing_trial(&c).unwrap();
        assert_eq!(trial.bisector, Some(Point::new(1.0, 0.0)));
        let g1 = trial.tracks().iter().find(|t| t.group == Group::G1).unwrap();
        let d = g1.positions[1] - g1.positions[0];
        assert!(d.x.abs() < 1e-12 && d.y > 0.0);
    }

    #[test]
    fn crossing_window_contains_meeting_time() {
        for angle in [30.0, 90.0, 180.0] {
            let c = CrossingSpec {
                angle_deg: angle,
                jitter_sd_m: 0.1,
                seed: 9,
                ..Default::default()
            };
            let trial = generate_crossing_trial(&c).unwrap();
            let (a, b) = crossing_window(&trial).unwrap();
            assert!(a <= 10.0 && 10.0 <= b, "{angle}: {a}..{b}");
        }
    }

    #[test]
    fn meeting_frame_matches_ground_truth() {
        let c = CrossingSpec::default();
        let trial = generate_crossing_trial(&c).unwrap();
        let frame = trial.frame_at(10.0).unwrap();
        let gt = c.ground_truth();
        let params = WaveParams::new(gt.gamma_deg, gt.lambda_m, gt.psi_rad);
        assert!((objective(WaveKind::Sine, &frame, params).unwrap() - 2.0).abs() < 1e-9);
    }
}
