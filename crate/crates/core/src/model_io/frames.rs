use super::{Frame, Group, Point, Trial};
use crate::error::{Error, Result};

const UNIT_TOLERANCE: f64 = 1e-9;
const MIN_DISPLACEMENT_M: f64 = 1e-6;

fn check_unit(dir: Point) -> Result<()> {
    let n = dir.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::InvalidDirection(dir.x, dir.y));
    }
    Ok(())
}

/// Rotation taking the unit vector `dir` onto (1, 0).
fn rotate(p: Point, dir: Point) -> Point {
    Point::new(dir.x * p.x + dir.y * p.y, -dir.y * p.x + dir.x * p.y)
}

/// Rotates every position so that `bisector_dir` becomes the +x axis.
pub fn rotate_to_bisector(frame: &Frame, bisector_dir: Point) -> Result<Frame> {
    check_unit(bisector_dir)?;
    Ok(frame.map_points(|p| rotate(p, bisector_dir)))
}

/// Rotates a whole trial into its bisector frame.
pub fn rotate_trial(trial: &Trial, bisector_dir: Point) -> Result<Trial> {
    check_unit(bisector_dir)?;
    let mut rotated = trial.map_tracks(|tr| {
        Ok(tr.positions.iter().map(|&p| rotate(p, bisector_dir)).collect())
    })?;
    rotated.bisector = Some(Point::new(1.0, 0.0));
    Ok(rotated)
}

/// Estimates the bisector of the two walking directions.
///
/// Each group's heading is the unit vector of its pedestrians' mean
/// displacement over the first `window_s` seconds of the trial; the bisector
/// is the normalised sum of the two headings. Exactly opposed headings have
/// no such sum, and the direction obtained by turning the group 1 heading
/// by -90 degrees is returned instead.
pub fn estimate_bisector(trial: &Trial, window_s: f64) -> Result<Point> {
    let (t0, _) = trial.time_span();
    let t_end = t0 + window_s;
    let heading = |group: Group| -> Result<Point> {
        let mut sum = Point::default();
        let mut count = 0usize;
        for tr in trial.tracks().iter().filter(|tr| tr.group == group) {
            let idx: Vec<usize> = (0..tr.len())
                .filter(|&i| tr.times[i] >= t0 && tr.times[i] <= t_end)
                .collect();
            if idx.len() < 2 {
                continue;
            }
            sum = sum + (tr.positions[*idx.last().unwrap()] - tr.positions[idx[0]]);
            count += 1;
        }
        if count == 0 {
            return Err(Error::DegenerateMotion(format!(
                "group {} has no pedestrian with two samples in the first {window_s} s",
                group.label()
            )));
        }
        let mean = sum * (1.0 / count as f64);
        let n = mean.norm();
        if n < MIN_DISPLACEMENT_M {
            return Err(Error::DegenerateMotion(format!(
                "group {} mean displacement {n} m",
                group.label()
            )));
        }
        Ok(mean * (1.0 / n))
    };
    let u1 = heading(Group::G1)?;
    let u2 = heading(Group::G2)?;
    let sum = u1 + u2;
    let n = sum.norm();
    if n < 1e-9 {
        return Ok(Point::new(u1.y, -u1.x));
    }
    Ok(sum * (1.0 / n))
}

fn bounding_box(points: &[Point]) -> (Point, Point) {
    points.iter().fold(
        (
            Point::new(f64::INFINITY, f64::INFINITY),
            Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), p| {
            (
                Point::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        },
    )
}

fn boxes_overlap(frame: &Frame) -> bool {
    let (lo1, hi1) = bounding_box(&frame.g1);
    let (lo2, hi2) = bounding_box(&frame.g2);
    lo1.x <= hi2.x && lo2.x <= hi1.x && lo1.y <= hi2.y && lo2.y <= hi1.y
}

/// Longest contiguous stretch of sample times during which the axis-aligned
/// bounding boxes of the two groups overlap. Ties go to the earliest stretch.
pub fn crossing_window(trial: &Trial) -> Result<(f64, f64)> {
    let (t0, t1) = trial.time_span();
    let times = trial.frame_times(t0, t1, 0.0);
    let mut best: Option<(f64, f64)> = None;
    let mut run_start: Option<f64> = None;
    let mut last = t0;
    let close = |start: f64, end: f64, best: &mut Option<(f64, f64)>| {
        if best.map_or(true, |(s, e)| end - start > e - s) {
            *best = Some((start, end));
        }
    };
    for &t in &times {
        let overlapping = matches!(trial.frame_at(t), Ok(f) if boxes_overlap(&f));
        match (overlapping, run_start) {
            (true, None) => run_start = Some(t),
            (false, Some(start)) => {
                close(start, last, &mut best);
                run_start = None;
            }
            _ => {}
        }
        last = t;
    }
    if let Some(start) = run_start {
        close(start, last, &mut best);
    }
    best.ok_or(Error::NoCrossing)
}
