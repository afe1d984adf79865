//! Trials, frames and trajectory ingestion.
//!
//! A [`Trial`] is one crossing-flow recording: every pedestrian's head track,
//! labelled with the group it walked in. Fitting works on [`Frame`]s, the
//! positions of both groups at one instant, usually after rotating the scene
//! so that the bisector of the two walking directions lies on the +x axis.

mod canonical_csv;
mod frames;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use canonical_csv::{parse_trials, write_trials, TrialFormat, CANONICAL_HEADER};
pub use frames::{crossing_window, estimate_bisector, rotate_to_bisector, rotate_trial};

/// Sampling rate assumed when a trial has no pedestrian with two samples
/// and no metadata says otherwise.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 120.0;

/// Relative tolerance on the spacing between consecutive samples.
const SPACING_TOLERANCE: f64 = 1e-2;

/// A 2D position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    G1,
    G2,
}

impl Group {
    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            1 => Some(Group::G1),
            2 => Some(Group::G2),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Group::G1 => 1,
            Group::G2 => 2,
        }
    }
}

/// One row of the canonical CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSample {
    pub pedestrian_id: String,
    pub group: Group,
    pub t: f64,
    pub pos: Point,
}

/// All samples of a single pedestrian, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub pedestrian_id: String,
    pub group: Group,
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the sample nearest to `t`, ties going to the earlier sample.
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        if self.times.is_empty() {
            return None;
        }
        let after = self.times.partition_point(|&s| s < t);
        if after == 0 {
            return Some(0);
        }
        if after == self.times.len() {
            return Some(after - 1);
        }
        let before = after - 1;
        if t - self.times[before] <= self.times[after] - t {
            Some(before)
        } else {
            Some(after)
        }
    }
}

/// Per-trial metadata, supplied as a JSON object or an array of objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetadata {
    pub trial_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisector: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
}

impl TrialMetadata {
    pub fn parse_json(text: &str) -> Result<Vec<TrialMetadata>> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            One(TrialMetadata),
            Many(Vec<TrialMetadata>),
        }
        Ok(match serde_json::from_str(text)? {
            OneOrMany::One(m) => vec![m],
            OneOrMany::Many(v) => v,
        })
    }
}

/// A single crossing-flow recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub trial_id: String,
    pub crossing_angle_deg: f64,
    pub sample_rate_hz: f64,
    /// Unit bisector direction in the recording frame, when known.
    pub bisector: Option<Point>,
    tracks: Vec<Track>,
}

impl Trial {
    /// Builds a trial from raw samples and checks its invariants.
    pub fn from_samples(
        trial_id: impl Into<String>,
        crossing_angle_deg: f64,
        sample_rate_hz: Option<f64>,
        samples: Vec<TrackSample>,
    ) -> Result<Self> {
        let trial_id = trial_id.into();
        let invalid = |message: String| Error::InvalidTrial {
            trial_id: trial_id.clone(),
            message,
        };

        let mut by_ped: BTreeMap<String, (Group, Vec<(f64, Point)>)> = BTreeMap::new();
        for s in samples {
            if !s.t.is_finite() || !s.pos.is_finite() {
                return Err(invalid(format!(
                    "non-finite sample for pedestrian {}",
                    s.pedestrian_id
                )));
            }
            let entry = by_ped
                .entry(s.pedestrian_id.clone())
                .or_insert_with(|| (s.group, Vec::new()));
            if entry.0 != s.group {
                return Err(invalid(format!(
                    "pedestrian {} appears in both groups",
                    s.pedestrian_id
                )));
            }
            entry.1.push((s.t, s.pos));
        }

        let mut tracks = Vec::with_capacity(by_ped.len());
        for (pedestrian_id, (group, mut rows)) in by_ped {
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateSample {
                    trial_id: trial_id.clone(),
                    pedestrian_id,
                    t: w[0].0,
                });
            }
            tracks.push(Track {
                pedestrian_id,
                group,
                times: rows.iter().map(|r| r.0).collect(),
                positions: rows.iter().map(|r| r.1).collect(),
            });
        }

        let trial = Trial {
            sample_rate_hz: match sample_rate_hz {
                Some(r) => r,
                None => infer_sample_rate(&tracks).unwrap_or(DEFAULT_SAMPLE_RATE_HZ),
            },
            trial_id,
            crossing_angle_deg,
            bisector: None,
            tracks,
        };
        trial.validate()?;
        Ok(trial)
    }

    pub(crate) fn from_tracks_unchecked(template: &Trial, tracks: Vec<Track>) -> Self {
        Trial {
            trial_id: template.trial_id.clone(),
            crossing_angle_deg: template.crossing_angle_deg,
            sample_rate_hz: template.sample_rate_hz,
            bisector: template.bisector,
            tracks,
        }
    }

    fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidTrial {
            trial_id: self.trial_id.clone(),
            message,
        };
        if !(self.crossing_angle_deg > 0.0 && self.crossing_angle_deg <= 180.0) {
            return Err(invalid(format!(
                "crossing angle {} outside (0, 180]",
                self.crossing_angle_deg
            )));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(invalid(format!("sample rate {}", self.sample_rate_hz)));
        }
        for g in [Group::G1, Group::G2] {
            if !self.tracks.iter().any(|tr| tr.group == g) {
                return Err(invalid(format!("group {} has no pedestrian", g.label())));
            }
        }
        let dt = 1.0 / self.sample_rate_hz;
        for tr in &self.tracks {
            for w in tr.times.windows(2) {
                let step = w[1] - w[0];
                if ((step - dt) / dt).abs() > SPACING_TOLERANCE {
                    return Err(invalid(format!(
                        "pedestrian {}: sample spacing {step} s at t = {} differs from 1/{} s",
                        tr.pedestrian_id, w[0], self.sample_rate_hz
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Samples ordered by (pedestrian_id, t).
    pub fn samples(&self) -> impl Iterator<Item = TrackSample> + '_ {
        self.tracks.iter().flat_map(|tr| {
            tr.times.iter().zip(&tr.positions).map(|(&t, &pos)| TrackSample {
                pedestrian_id: tr.pedestrian_id.clone(),
                group: tr.group,
                t,
                pos,
            })
        })
    }

    pub fn pedestrian_count(&self, group: Group) -> usize {
        self.tracks.iter().filter(|tr| tr.group == group).count()
    }

    /// First and last sample time over all pedestrians.
    pub fn time_span(&self) -> (f64, f64) {
        self.tracks.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), tr| {
            (
                lo.min(tr.times[0]),
                hi.max(*tr.times.last().expect("tracks are non-empty")),
            )
        })
    }

    /// Sample grid `t_start + k / sample_rate_hz` covering `[t_start, t_end]`.
    pub fn frame_times(&self, t_start: f64, t_end: f64, stride_s: f64) -> Vec<f64> {
        let step = stride_s.max(1.0 / self.sample_rate_hz);
        let n = ((t_end - t_start) / step + 1e-9).floor().max(0.0) as usize;
        (0..=n).map(|k| t_start + k as f64 * step).collect()
    }

    /// Positions of every pedestrian present at `t`.
    ///
    /// Each pedestrian contributes the sample nearest to `t` (ties go to the
    /// earlier sample) provided it lies within one sampling interval of `t`.
    pub fn frame_at(&self, t: f64) -> Result<Frame> {
        let reach = (1.0 / self.sample_rate_hz) * (1.0 + 1e-9);
        let mut frame = Frame {
            t,
            g1: Vec::new(),
            g2: Vec::new(),
        };
        for tr in &self.tracks {
            let Some(i) = tr.nearest_index(t) else { continue };
            if (tr.times[i] - t).abs() <= reach {
                match tr.group {
                    Group::G1 => frame.g1.push(tr.positions[i]),
                    Group::G2 => frame.g2.push(tr.positions[i]),
                }
            }
        }
        if frame.g1.is_empty() && frame.g2.is_empty() {
            return Err(Error::EmptyFrame { t });
        }
        frame.check_groups()?;
        Ok(frame)
    }

    /// Applies `f` to each pedestrian's coordinate series.
    pub fn map_tracks<F>(&self, mut f: F) -> Result<Trial>
    where
        F: FnMut(&Track) -> Result<Vec<Point>>,
    {
        let tracks = self
            .tracks
            .iter()
            .map(|tr| {
                Ok(Track {
                    positions: f(tr)?,
                    ..tr.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trial::from_tracks_unchecked(self, tracks))
    }

    pub fn apply_metadata(&mut self, meta: &TrialMetadata) -> Result<()> {
        if let Some([bx, by]) = meta.bisector {
            let n = bx.hypot(by);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidDirection(bx, by));
            }
            self.bisector = Some(Point::new(bx / n, by / n));
        }
        if let Some(rate) = meta.sample_rate_hz {
            self.sample_rate_hz = rate;
            self.validate()?;
        }
        Ok(())
    }
}

fn infer_sample_rate(tracks: &[Track]) -> Option<f64> {
    let mut steps: Vec<f64> = tracks
        .iter()
        .flat_map(|tr| tr.times.windows(2).map(|w| w[1] - w[0]))
        .collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_by(f64::total_cmp);
    Some(1.0 / steps[steps.len() / 2])
}

/// Positions of both groups at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub g1: Vec<Point>,
    pub g2: Vec<Point>,
}

impl Frame {
    pub fn new(t: f64, g1: Vec<Point>, g2: Vec<Point>) -> Self {
        Self { t, g1, g2 }
    }

    pub fn check_groups(&self) -> Result<()> {
        if self.g1.is_empty() {
            return Err(Error::GroupEmpty { group: 1 });
        }
        if self.g2.is_empty() {
            return Err(Error::GroupEmpty { group: 2 });
        }
        Ok(())
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.g1.iter().chain(&self.g2).copied()
    }

    /// Largest distance between any two positions.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<Point> = self.points().collect();
        let mut d: f64 = 0.0;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                d = d.max(p.distance(*q));
            }
        }
        d
    }

    /// Same positions with the group labels exchanged.
    pub fn swapped(&self) -> Frame {
        Frame::new(self.t, self.g2.clone(), self.g1.clone())
    }

    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Frame {
        Frame::new(
            self.t,
            self.g1.iter().map(|&p| f(p)).collect(),
            self.g2.iter().map(|&p| f(p)).collect(),
        )
    }
}

/// Trials of one input source, ordered by `trial_id`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
}

impl TrialSet {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn get(&self, trial_id: &str) -> Option<&Trial> {
        self.trials.iter().find(|t| t.trial_id == trial_id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trial> {
        self.trials.iter()
    }

    pub fn apply_metadata(&mut self, metadata: &[TrialMetadata]) -> Result<()> {
        for meta in metadata {
            if let Some(trial) = self.trials.iter_mut().find(|t| t.trial_id == meta.trial_id) {
                trial.apply_metadata(meta)?;
            } else {
                log::warn!("metadata for unknown trial {}", meta.trial_id);
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a TrialSet {
    type Item = &'a Trial;
    type IntoIter = std::slice::Iter<'a, Trial>;
    fn into_iter(self) -> Self::IntoIter {
        self.trials.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ped: &str, group: Group, t: f64, x: f64, y: f64) -> TrackSample {
        TrackSample {
            pedestrian_id: ped.into(),
            group,
            t,
            pos: Point::new(x, y),
        }
    }

    fn two_walkers() -> Trial {
        let mut s = Vec::new();
        for k in 0..10 {
            let t = k as f64 * 0.5;
            s.push(sample("a", Group::G1, t, t, 0.0));
            s.push(sample("b", Group::G2, t, 0.0, t));
        }
        Trial::from_samples("t", 90.0, None, s).unwrap()
    }

    #[test]
    fn sample_rate_is_inferred() {
        assert!((two_walkers().sample_rate_hz - 2.0).abs() < 1e-12);
    }

    #[test]
    fn frame_on_grid_point() {
        let f = two_walkers().frame_at(1.5).unwrap();
        assert_eq!(f.g1, vec![Point::new(1.5, 0.0)]);
        assert_eq!(f.g2, vec![Point::new(0.0, 1.5)]);
    }

    #[test]
    fn frame_midway_takes_earlier_sample() {
        let f = two_walkers().frame_at(1.25).unwrap();
        assert_eq!(f.g1, vec![Point::new(1.0, 0.0)]);
    }

    #[test]
    fn frame_before_recording_is_empty() {
        assert!(matches!(
            two_walkers().frame_at(-3.0),
            Err(Error::EmptyFrame { .. })
        ));
    }

    #[test]
    fn frame_with_one_group_missing() {
        let mut s = vec![sample("a", Group::G1, 0.0, 0.0, 0.0), sample("b", Group::G2, 5.0, 0.0, 0.0)];
        s.push(sample("a", Group::G1, 1.0, 0.0, 0.0));
        s.push(sample("b", Group::G2, 6.0, 0.0, 0.0));
        let trial = Trial::from_samples("t", 90.0, None, s).unwrap();
        assert!(matches!(trial.frame_at(0.0), Err(Error::GroupEmpty { group: 2 })));
    }

    #[test]
    fn zero_angle_rejected() {
        let s = vec![sample("a", Group::G1, 0.0, 0.0, 0.0), sample("b", Group::G2, 0.0, 1.0, 0.0)];
        assert!(Trial::from_samples("t", 0.0, None, s).is_err());
    }

    #[test]
    fn gap_in_track_rejected() {
        let s = vec![
            sample("a", Group::G1, 0.0, 0.0, 0.0),
            sample("a", Group::G1, 0.1, 0.0, 0.0),
            sample("a", Group::G1, 0.3, 0.0, 0.0),
            sample("b", Group::G2, 0.0, 1.0, 0.0),
            sample("b", Group::G2, 0.1, 1.0, 0.0),
            sample("b", Group::G2, 0.2, 1.0, 0.0),
        ];
        let err = Trial::from_samples("t", 30.0, None, s).unwrap_err();
        assert!(err.to_string().contains("spacing"), "{err}");
    }

    #[test]
    fn pedestrian_in_both_groups_rejected() {
        let s = vec![sample("a", Group::G1, 0.0, 0.0, 0.0), sample("a", Group::G2, 0.1, 1.0, 0.0)];
        assert!(Trial::from_samples("t", 30.0, None, s).is_err());
    }

    #[test]
    fn metadata_accepts_object_or_array() {
        let one = TrialMetadata::parse_json(r#"{"trial_id": "a", "bisector": [0, 2]}"#).unwrap();
        assert_eq!(one.len(), 1);
        let many =
            TrialMetadata::parse_json(r#"[{"trial_id": "a"}, {"trial_id": "b", "sample_rate_hz": 100}]"#)
                .unwrap();
        assert_eq!(many[1].sample_rate_hz, Some(100.0));

        let mut trial = two_walkers();
        trial.apply_metadata(&one[0]).unwrap();
        assert_eq!(trial.bisector, Some(Point::new(0.0, 1.0)));
    }
}
