use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stripefit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stripefit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn without_wall_time(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let skip = header.iter().position(|h| *h == "wall_time_s").unwrap();
    lines
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, v)| v)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

#[test]
fn synth_ingest_batch_stats_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = stripefit(&[
        "synth", "--out", s(&d.join("synth")), "--angles", "60,90", "--trials-per-angle", "3",
        "--jitter", "0.1", "--seed", "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trial.csv", "metadata.json", "ground_truth.json", "resolved_config.json"] {
        assert!(d.join("synth").join(f).exists(), "{f}");
    }
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("synth/ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth.as_array().unwrap().len(), 6);

    let out = stripefit(&[
        "ingest", s(&d.join("synth/trial.csv")), "--out", s(&d.join("ingest")),
        "--metadata", s(&d.join("synth/metadata.json")), "--filter-cutoff-hz", "1.0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("ingest/trials.csv").exists());

    let out = stripefit(&[
        "batch", s(&d.join("ingest/trials.csv")), "--out", s(&d.join("batch")),
        "--metadata", s(&d.join("synth/metadata.json")), "--seed", "5", "--stride", "2",
        "--steps-per-temp", "40",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(without_wall_time(&d.join("batch/results.csv")).len(), 6 * 4);

    let out = stripefit(&["stats", s(&d.join("batch/results.csv")), "--out", s(&d.join("stats"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["anova.csv", "ttest.csv", "boxplot_quantiles.csv", "timing_quantiles.csv", "tables.txt"] {
        assert!(d.join("stats").join(f).exists(), "{f}");
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("One-way ANOVA"));

    let out = stripefit(&[
        "oracle", s(&d.join("synth/trial.csv")), "--out", s(&d.join("oracle")), "--trial-id", "synth_90_000",
        "--metadata", s(&d.join("synth/metadata.json")), "--resolution", "36,20,8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let surface = fs::read_to_string(d.join("oracle/surface.csv")).unwrap();
    assert_eq!(surface.lines().count(), 1 + 36 * 20);
    assert!(d.join("oracle/best.json").exists());
}

#[test]
fn resolved_config_reproduces_a_batch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(stripefit(&["synth", "--out", s(&d.join("synth")), "--angle", "90", "--seed", "1", "--jitter", "0.2"])
        .status
        .success());
    let input = d.join("synth/trial.csv");
    let first = stripefit(&[
        "batch", s(&input), "--out", s(&d.join("a")), "--strategy", "square+sa", "--strategy", "sine+nm",
        "--seed", "9", "--stride", "1", "--steps-per-temp", "30",
    ]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let again = stripefit(&[
        "batch", s(&input), "--config", s(&d.join("a/resolved_config.json")), "--out", s(&d.join("b")),
    ]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    let (a, b) = (without_wall_time(&d.join("a/results.csv")), without_wall_time(&d.join("b/results.csv")));
    assert_eq!(a.len(), 2);
    assert_eq!(a, b);
}

#[test]
fn fit_single_trial() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(stripefit(&["synth", "--out", s(&d.join("synth")), "--angle", "120", "--seed", "4"])
        .status
        .success());
    let out = stripefit(&[
        "fit", s(&d.join("synth/trial.csv")), "--out", s(&d.join("fit")), "--strategy", "square+nm",
        "--frame-policy", "single", "--frame-t", "10", "--bisector", "1,0", "--trace",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = without_wall_time(&d.join("fit/results.csv"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].contains("square+nm"));
    assert!(d.join("fit/results.json").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("C/Cmax 1.0000"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = stripefit(&["fit", s(&d.join("nope.csv")), "--out", s(&d.join("o"))]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!missing.stderr.is_empty());

    let bogus = stripefit(&["fit", s(&d.join("nope.csv")), "--out", s(&d.join("o")), "--strategy", "bogus"]);
    assert_eq!(bogus.status.code(), Some(2));
    assert_eq!(stripefit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(stripefit(&["--help"]).status.code(), Some(0));

    assert!(stripefit(&["synth", "--out", s(&d.join("synth")), "--angle", "90"]).status.success());
    let unseeded = stripefit(&["batch", s(&d.join("synth/trial.csv")), "--out", s(&d.join("b"))]);
    assert_eq!(unseeded.status.code(), Some(2));
}
