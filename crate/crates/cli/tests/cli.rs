use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn birdseye(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_birdseye")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = birdseye(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SPEC: &str = r#"
seed = 5
headway_s = [1.5, 3.0]

[[groups]]
direction = 1
class = "car"
count = 8
speed_mph_mean = 55.0
speed_mph_sd = 3.0

[[groups]]
direction = 2
class = "car"
count = 6
speed_mph_mean = 62.0
"#;

#[test]
fn staged_run_matches_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    fs::write(root.join("spec.toml"), SPEC).unwrap();
    let scene_dir = root.join("scene");
    ok(&["synth", "--spec", p(&root.join("spec.toml")), "--out", p(&scene_dir)]);
    let dets = scene_dir.join("detections.jsonl");
    let scene = scene_dir.join("scene.toml");

    let tracks = root.join("tracks");
    ok(&["track", "--detections", p(&dets), "--scene", p(&scene), "--tracker", "byte", "--out", p(&tracks)]);
    let model = root.join("model.toml");
    ok(&["calibrate", "--detections", p(&dets), "--scene", p(&scene), "--out", p(&model)]);
    let analysis = root.join("analysis");
    ok(&[
        "analyze",
        "--tracks",
        p(&tracks),
        "--calibration",
        p(&model),
        "--out",
        p(&analysis),
        "--real-counts",
        p(&scene_dir.join("real_counts.csv")),
    ]);

    let vehicles = fs::read_to_string(analysis.join("vehicles.csv")).unwrap();
    assert_eq!(vehicles.lines().count(), 1 + 14);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(analysis.join("summary.json")).unwrap()).unwrap();
    for row in summary["error_rates"].as_array().unwrap() {
        assert_eq!(row["error_rate_pct"], 0.0);
    }

    let metrics = ok(&["metrics", "--pred", p(&tracks), "--truth", p(&scene_dir.join("truth.json"))]);
    let m: serde_json::Value = serde_json::from_str(&metrics).unwrap();
    assert_eq!(m["id_switches"], 0);
    assert_eq!(m["truth_vehicles"], 14);

    // The one-shot run produces the same vehicle table.
    let run = root.join("run");
    ok(&["run", "--detections", p(&dets), "--scene", p(&scene), "--out", p(&run)]);
    assert_eq!(fs::read_to_string(run.join("vehicles.csv")).unwrap(), vehicles);
    assert!(run.join("diagnostics.json").exists());
}

#[test]
fn seed_flag_changes_the_scene() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    ok(&["--seed", "1", "synth", "--out", p(&a)]);
    ok(&["synth", "--seed", "2", "--out", p(&b)]);
    ok(&["synth", "--out", p(&c), "--seed", "1"]);
    let read = |d: &Path| fs::read(d.join("detections.jsonl")).unwrap();
    assert_ne!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
}

#[test]
fn bad_inputs_fail_with_context() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene.toml");
    fs::write(&scene, "schema_version = 9\n").unwrap();
    let dets = tmp.path().join("d.jsonl");
    fs::write(&dets, "{\"frame\":0,\"cls\":\"car\",\"bbox\":[1,2,3,4],\"score\":1.5}\n").unwrap();
    let out = birdseye(&["track", "--detections", p(&dets), "--scene", p(&scene), "--out", p(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("scene"));

    ok(&["synth", "--out", p(&tmp.path().join("s"))]);
    let good_scene = tmp.path().join("s").join("scene.toml");
    let out = birdseye(&["track", "--detections", p(&dets), "--scene", p(&good_scene), "--out", p(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let out = birdseye(&["track", "--detections", p(&dets), "--scene", p(&good_scene), "--tracker", "sort", "--out", p(tmp.path())]);
    assert!(!out.status.success());
}
