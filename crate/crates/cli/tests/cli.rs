use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lowlight-rppg");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_plan(dir: &Path, json: &str) -> String {
    let path = dir.join("plan.json");
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn invalid_method_is_usage_error() {
    let out = run(&["--input", ".", "--method", "chrom"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_usage_error() {
    assert_eq!(run(&[]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(run(&["--input", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn empty_dataset_root_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--input", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"method": ["nope"]}"#).unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn synth_mode_writes_deterministic_reports() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), r#"{"duration_s": 15, "width": 16, "height": 12, "illum_scales": [0.1, 1.0]}"#);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "--synth",
            &plan,
            "--enhance",
            "none,he",
            "--method",
            "green,pos",
            "--out",
            out_dir.to_str().unwrap(),
            "--jobs",
            "2",
            "--emit-spectrogram",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
        assert_eq!(String::from_utf8_lossy(&out.stdout), report);
        assert!(out_dir.join("iou.csv").is_file());
        let svgs = fs::read_dir(out_dir.join("spectrograms"))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
            .count();
        assert_eq!(svgs, 2 * 2 * 2);
        reports.push(report);
    }
    assert_eq!(reports[0], reports[1]);
    let lines: Vec<&str> = reports[0].lines().collect();
    assert_eq!(lines[0], "lux,method,enhancement,snr_db,mae_bpm,rmse_bpm,mean_iou,n_windows");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
}

#[test]
fn single_bright_recording_with_pos() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), r#"{"duration_s": 30, "width": 24, "height": 18}"#);
    let data = dir.path().join("data");
    let gen = run(&["--synth", &plan, "--input", data.to_str().unwrap(), "--method", "pos", "--enhance", "none", "--out", dir.path().join("gen").to_str().unwrap()]);
    assert_eq!(gen.status.code(), Some(0), "{}", String::from_utf8_lossy(&gen.stderr));

    let rec = fs::read_dir(&data).unwrap().next().unwrap().unwrap().path();
    let out_dir = dir.path().join("single");
    let out = run(&["--input", rec.to_str().unwrap(), "--method", "pos", "--enhance", "none", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[1], row[2]), ("pos", "none"));
    let mae: f64 = row[4].parse().unwrap();
    assert!(mae <= 1.0, "{report}");
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), r#"{"duration_s": 12, "width": 12, "height": 10}"#);
    let cfg = dir.path().join("cfg.json");
    let out_dir = dir.path().join("out");
    fs::write(
        &cfg,
        format!(r#"{{"method": ["ica"], "enhance": ["none"], "out": {:?}}}"#, out_dir.to_str().unwrap()),
    )
    .unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "--synth", &plan, "--method", "green"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(report.lines().skip(1).all(|l| l.contains(",green,none,")), "{report}");
}
