use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{Group, Point, TrackSample, Trial, TrialSet};
use crate::error::{Error, Result};

pub const CANONICAL_HEADER: [&str; 7] = [
    "trial_id",
    "crossing_angle_deg",
    "pedestrian_id",
    "group",
    "t",
    "x",
    "y",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrialFormat {
    #[default]
    CanonicalCsv,
}

/// Reads every trial from `source`.
///
/// Columns are located by header name, so extra columns and any column
/// order are accepted. Trials come back sorted by `trial_id`.
pub fn parse_trials<R: Read>(source: R, format: TrialFormat) -> Result<TrialSet> {
    match format {
        TrialFormat::CanonicalCsv => parse_canonical(source),
    }
}

fn parse_canonical<R: Read>(source: R) -> Result<TrialSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(source);

    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) if is_empty_input(&e) => return Err(Error::NoTrials),
        Err(e) => return Err(e.into()),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::NoTrials);
    }
    let mut columns = [0usize; 7];
    for (slot, name) in columns.iter_mut().zip(CANONICAL_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}` in header")))?;
    }
    let [c_trial, c_angle, c_ped, c_group, c_t, c_x, c_y] = columns;

    let mut trials: BTreeMap<String, (f64, Vec<TrackSample>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let number = |col: usize, name: &str| -> Result<f64> {
            let raw = &record[col];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("column `{name}`: expected a finite number, found `{raw}`"),
                })
        };

        let trial_id = record[c_trial].to_string();
        let angle = number(c_angle, "crossing_angle_deg")?;
        let group_raw = &record[c_group];
        let group = group_raw
            .parse::<u8>()
            .ok()
            .and_then(Group::from_label)
            .ok_or_else(|| {
                Error::Schema(format!("line {line}: group label `{group_raw}` is not 1 or 2"))
            })?;
        let sample = TrackSample {
            pedestrian_id: record[c_ped].to_string(),
            group,
            t: number(c_t, "t")?,
            pos: Point::new(number(c_x, "x")?, number(c_y, "y")?),
        };

        let entry = trials
            .entry(trial_id.clone())
            .or_insert_with(|| (angle, Vec::new()));
        if entry.0 != angle {
            return Err(Error::Parse {
                line,
                message: format!(
                    "trial {trial_id}: crossing angle {angle} disagrees with earlier rows ({})",
                    entry.0
                ),
            });
        }
        entry.1.push(sample);
    }

    if trials.is_empty() {
        return Err(Error::NoTrials);
    }
    let trials = trials
        .into_iter()
        .map(|(id, (angle, samples))| Trial::from_samples(id, angle, None, samples))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialSet { trials })
}

fn is_empty_input(e: &csv::Error) -> bool {
    matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof)
}

/// Writes trials in canonical CSV, rows ordered by (trial, pedestrian, t).
///
/// Numbers use the shortest representation that parses back to the same
/// `f64`, so a write/parse cycle is lossless.
pub fn write_trials<W: Write>(sink: W, trials: &TrialSet) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(CANONICAL_HEADER)?;
    for trial in trials {
        let angle = trial.crossing_angle_deg.to_string();
        for s in trial.samples() {
            writer.write_record([
                trial.trial_id.as_str(),
                angle.as_str(),
                s.pedestrian_id.as_str(),
                if s.group == Group::G1 { "1" } else { "2" },
                &s.t.to_string(),
                &s.pos.x.to_string(),
                &s.pos.y.to_string(),
            ])?;
        }
    }
    writer.flush().map_err(|e| Error::io("<csv sink>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "trial_id,crossing_angle_deg,pedestrian_id,group,t,x,y\n";

    fn parse(text: &str) -> Result<TrialSet> {
        parse_trials(text.as_bytes(), TrialFormat::CanonicalCsv)
    }

    #[test]
    fn empty_input_has_no_trials() {
        assert!(matches!(parse(""), Err(Error::NoTrials)));
        assert!(matches!(parse(HEADER), Err(Error::NoTrials)));
    }

    #[test]
    fn minimal_trial() {
        let set = parse(&format!("{HEADER}a,90,p1,1,0,0,0\na,90,p2,2,0,1,1\n")).unwrap();
        assert_eq!(set.len(), 1);
        let trial = &set.trials[0];
        let f = trial.frame_at(0.0).unwrap();
        assert_eq!((f.g1.len(), f.g2.len()), (1, 1));
        assert_eq!(trial.frame_times(0.0, 0.0, 0.25), vec![0.0]);
    }

    #[test]
    fn duplicate_sample_rejected() {
        let text = format!("{HEADER}a,90,p1,1,0,0,0\na,90,p2,2,0,1,1\na,90,p1,1,0,0,0\n");
        assert!(matches!(parse(&text), Err(Error::DuplicateSample { .. })));
    }

    #[test]
    fn bad_group_is_schema_error() {
        let text = format!("{HEADER}a,90,p1,3,0,0,0\n");
        assert!(matches!(parse(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = format!("{HEADER}a,90,p1,1,0,0,0\na,90,p2,2,zero,1,1\n");
        match parse(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let short = format!("{HEADER}a,90,p1,1,0,0\n");
        assert!(matches!(parse(&short), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn missing_column_is_schema_error() {
        assert!(matches!(parse("trial_id,t,x,y\na,0,0,0\n"), Err(Error::Schema(_))));
    }

    #[test]
    fn columns_found_by_name() {
        let text = "x,y,t,group,pedestrian_id,crossing_angle_deg,trial_id,extra\n\
                    0,0,0,1,p1,60,a,z\n1,1,0,2,p2,60,a,z\n";
        let set = parse(text).unwrap();
        assert_eq!(set.trials[0].crossing_angle_deg, 60.0);
    }
}
