use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn herdlens(args: &[&str]) -> Output {
    herdlens_env(args, None)
}

fn herdlens_env(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_herdlens"));
    cmd.args(args).env_remove("HERDLENS_SEED");
    if let Some(s) = seed {
        cmd.env("HERDLENS_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(root).unwrap().to_path_buf(), fs::read(e.path()).unwrap()))
        .collect()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

#[test]
fn synth_motion_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("m");
    let o = herdlens(&["synth", "motion", "--vx", "3", "--vy", "4", "--out", &s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let listed = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(listed.contains("frames.jsonl") && listed.contains("truth.json"));
    assert!(data.join("motion/manifest.json").is_file());
    let truth = read_json(&data.join("truth.json"));
    assert_eq!(truth[0]["base_speed_px_per_s"], 15.0);
    let v = herdlens(&["validate", &s(&data)]);
    assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
}

#[test]
fn missing_required_parameter_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = herdlens(&["synth", "motion", "--vx", "3", "--out", &s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--vy"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = herdlens(&["analyze", "run", &s(dir.path()), "--out", &s(dir.path()), "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = herdlens(&["analyze", "dance", &s(dir.path()), "--out", &s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_seed_same_tree() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let o = herdlens(&["synth", "grazing", "--seed", "9", "--out", &s(&dir.path().join(name))]);
        assert!(o.status.success());
    }
    assert_eq!(tree(&dir.path().join("a")), tree(&dir.path().join("b")));
    let o = herdlens(&["synth", "grazing", "--seed", "10", "--out", &s(&dir.path().join("c"))]);
    assert!(o.status.success());
    assert_ne!(tree(&dir.path().join("a")), tree(&dir.path().join("c")));
}

#[test]
fn truncated_line_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert!(herdlens(&["synth", "motion", "--vx", "1", "--vy", "0", "--out", &s(&data)]).status.success());
    let frames = data.join("motion/frames.jsonl");
    let text = fs::read_to_string(&frames).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let cut = &lines[2][..lines[2].len() / 2];
    lines[2] = cut;
    fs::write(&frames, lines.join("\n") + "\n").unwrap();
    let o = herdlens(&["validate", &s(&data)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains(&format!("{}:3:", frames.display())), "{err}");
}

#[test]
fn bbox_out_of_bounds_is_invariant_violation() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert!(herdlens(&["synth", "motion", "--vx", "1", "--vy", "0", "--out", &s(&data)]).status.success());
    let frames = data.join("motion/frames.jsonl");
    let text = fs::read_to_string(&frames).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let mut v: Value = serde_json::from_str(line).unwrap();
        if i == 4 {
            v["detections"][0]["bbox"][0] = 630.0.into();
        }
        out.push_str(&serde_json::to_string(&v).unwrap());
        out.push('\n');
    }
    fs::write(&frames, out).unwrap();
    let o = herdlens(&["validate", &s(&data)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("InvariantViolation") && err.contains(":5:"), "{err}");
}

#[test]
fn grazing_without_imagery_fails_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("g");
    assert!(herdlens(&["synth", "grazing", "--out", &s(&data)]).status.success());
    fs::remove_dir_all(data.join("graze_herd_00/imagery")).unwrap();
    let out = dir.path().join("out");
    let o = herdlens(&["analyze", "graze", &s(&data), "--out", &s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MissingImagery"), "{}", stderr(&o));
    assert!(!out.join("report.json").exists());
    assert!(!out.exists() || tree(&out).is_empty());
}

#[test]
fn motion_set_yields_speed_section_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("m");
    assert!(herdlens(&["synth", "motion", "--vx", "3", "--vy", "4", "--out", &s(&data)]).status.success());
    let out = dir.path().join("out");
    let o = herdlens(&["analyze", "run", &s(&data), "--out", &s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out.join("report.json"));
    assert!(r.get("gait").is_none() && r.get("graze").is_none() && r.get("rest").is_none());
    let p = &r["speed"]["videos"]["motion"]["profile"];
    assert_eq!(p["mean_raw"], 15.0);
    assert_eq!(p["mean_normalized"], 15.0);
    assert!(out.join("series/speed.csv").is_file());
    assert!(out.join("plots/speed_motion.svg").is_file());
    let csv = fs::read_to_string(out.join("series/speed.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("video_id,step_index,t_seconds,raw_px_per_s,normalized"));
    assert_eq!(csv.lines().count(), 1 + 39);
}

#[test]
fn overrides_and_env_seed_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("r");
    assert!(herdlens(&["synth", "resting", "--out", &s(&data)]).status.success());
    let out = dir.path().join("out");
    let o = herdlens_env(
        &["analyze", "rest", &s(&data), "--out", &s(&out), "--kmeans-k", "5", "--n-neighbors", "15", "--min-dist", "0.05"],
        Some("77"),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out.join("report.json"));
    let c = &r["config"];
    assert_eq!(c["rest"]["cluster"]["k"], 5);
    assert_eq!(c["rest"]["embed"]["n_neighbors"], 15);
    assert_eq!(c["rest"]["embed"]["min_dist"], 0.05);
    assert_eq!(c["seed"], 77);
    assert_eq!(c["rest"]["embed"]["seed"], 77);
    assert_eq!(r["rest"]["views"]["front"]["k_used"], 5);

    // the flag wins over the environment
    let o = herdlens_env(&["analyze", "rest", &s(&data), "--out", &s(&out), "--seed", "3"], Some("77"));
    assert!(o.status.success());
    assert_eq!(read_json(&out.join("report.json"))["config"]["seed"], 3);
}

#[test]
fn defaults_match_documented_values() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("all");
    assert!(herdlens(&["synth", "all", "--out", &s(&data)]).status.success());
    let out = dir.path().join("out");
    assert!(herdlens(&["analyze", "all", &s(&data), "--out", &s(&out)]).status.success());
    let c = read_json(&out.join("report.json"))["config"].clone();
    assert_eq!(c["seed"], 42);
    assert_eq!(c["gait"]["embed"]["n_neighbors"], 20);
    assert_eq!(c["gait"]["embed"]["min_dist"], 0.1);
    assert_eq!(c["rest"]["embed"]["n_neighbors"], 50);
    assert_eq!(c["rest"]["embed"]["min_dist"], 0.01);
    assert_eq!(c["gait"]["cluster"]["k"], 10);
    assert_eq!(c["speed"]["norm_exponent"], 0.5);
    assert!(c["speed"].get("frame_stride").is_none());
    let bundled = read_json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json"));
    assert_eq!(c, bundled);
    for f in ["embeddings/gait.csv", "embeddings/rest_front.csv", "plots/gait_clusters.svg", "plots/rest_side.svg", "series/graze.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn config_echo_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("m");
    assert!(herdlens(&["synth", "gait", "--animals", "3", "--out", &s(&data)]).status.success());
    assert!(herdlens(&["synth", "motion", "--vx", "2", "--vy", "1", "--out", &s(&data)]).status.success());
    let a = dir.path().join("a");
    let o = herdlens(&["analyze", "run", &s(&data), "--out", &s(&a), "--seed", "5", "--kmeans-k", "3", "--frame-stride", "5", "--norm-exponent", "1.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b = dir.path().join("b");
    let o = herdlens(&["analyze", "run", &s(&data), "--out", &s(&b), "--config", &s(&a.join("report.json"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(tree(&a), tree(&b));
    let r = read_json(&a.join("report.json"));
    assert_eq!(r["config"]["speed"]["frame_stride"], 5);
    assert_eq!(r["config"]["gait"]["cluster_space"], "embedding");
    // stride 5 halves the time per step, doubling raw speed
    assert_eq!(r["speed"]["videos"]["motion"]["profile"]["steps"][0]["raw_px_per_s"].as_f64().unwrap(), 5f64.sqrt() * 30.0 / 5.0);
}

#[test]
fn report_show_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("g");
    assert!(herdlens(&["synth", "grazing", "--out", &s(&data)]).status.success());
    let out = dir.path().join("out");
    assert!(herdlens(&["analyze", "graze", &s(&data), "--out", &s(&out)]).status.success());
    let o = herdlens(&["report", "show", &s(&out)]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.contains("graze: 6 videos") && text.contains("single:") && text.contains("herd:"), "{text}");
    let o = herdlens(&["report", "show", &s(&dir.path().join("nope.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pose_space_clustering_is_selectable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("g");
    assert!(herdlens(&["synth", "gait", "--animals", "4", "--out", &s(&data)]).status.success());
    let out = dir.path().join("out");
    let o = herdlens(&["analyze", "run", &s(&data), "--out", &s(&out), "--cluster-space", "pose", "--kmeans-k", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out.join("report.json"));
    assert_eq!(r["config"]["gait"]["cluster_space"], "pose");
    assert_eq!(r["gait"]["cluster_space"], "pose");
    let animals = r["gait"]["animals"].as_object().unwrap();
    assert!(animals.values().all(|a| a["dominance_ratio"].as_f64().unwrap() >= 0.8));
}
