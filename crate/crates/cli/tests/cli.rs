use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cpf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpf"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let o = cpf(args, cwd);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn fails_with(args: &[&str], cwd: &Path, code: i32) -> String {
    let o = cpf(args, cwd);
    assert_eq!(o.status.code(), Some(code), "{args:?}");
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    err
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "--out", "s"];
    args.extend_from_slice(extra);
    ok(&args, dir);
    dir.join("s")
}

fn csv_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn frames_table_is_orthonormal_and_stable() {
    let d = tempfile::tempdir().unwrap();
    let a = ok(&["frames"], d.path());
    assert_eq!(a, ok(&["frames"], d.path()));
    let t: Value = serde_json::from_str(&a).unwrap();
    let rows = t["frames"].as_array().unwrap();
    assert_eq!(rows.len(), 16);
    let v = |r: &Value, k: &str| -> [f64; 3] {
        let a = r[k].as_array().unwrap();
        [0, 1, 2].map(|i| a[i].as_f64().unwrap())
    };
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    for r in rows {
        let (t, s, b) = (v(r, "twist"), v(r, "splay"), v(r, "bend"));
        assert!(dot(t, s).abs() + dot(t, b).abs() + dot(s, b).abs() < 3e-6);
        for x in [t, s, b] {
            assert!((dot(x, x) - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn missing_hand_model_is_a_data_error() {
    let d = tempfile::tempdir().unwrap();
    let err = fails_with(&["frames", "absent.json"], d.path(), 2);
    assert!(err.contains("absent.json"));
    fails_with(&["anchors", "absent.json"], d.path(), 2);
}

#[test]
fn anchors_match_frozen_fixture() {
    let d = tempfile::tempdir().unwrap();
    ok(&["anchors", "--out", "a"], d.path());
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/anchors.json");
    assert_eq!(json(d.path().join("a/anchors.json")), json(fixture));
}

#[test]
fn usage_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    fails_with(&["bogus"], d.path(), 1);
    fails_with(&["refine"], d.path(), 1);
    fails_with(&["synth"], d.path(), 1);
    fails_with(&["synth", "--out", "x", "--k-rpl", "-1"], d.path(), 1);
    fails_with(&["synth", "--out", "x", "--mode", "sideways"], d.path(), 1);
    fs::write(d.path().join("bad.json"), "{\"schema\": \"other/1\"}").unwrap();
    fails_with(&["synth", "--out", "x", "--config", "bad.json"], d.path(), 1);
}

#[test]
fn synth_is_byte_identical_and_contacts_exist() {
    let d = tempfile::tempdir().unwrap();
    let s = synth(d.path(), &["--seed", "4"]);
    let first = fs::read(s.join("scene_0004/initial_pose.json")).unwrap();
    let labels = json(s.join("scene_0004/labels.json"));
    assert!(labels["vc"].as_array().unwrap().iter().any(|v| v.as_f64() == Some(1.0)));
    let again = synth(&d.path().join("s"), &["--seed", "4"]);
    for f in [
        "scene.json",
        "initial_pose.json",
        "gt_pose.json",
        "labels.json",
        "object.obj",
        "anchors.json",
    ] {
        assert_eq!(
            fs::read(s.join("scene_0004").join(f)).unwrap(),
            fs::read(again.join("scene_0004").join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(first, fs::read(again.join("scene_0004/initial_pose.json")).unwrap());
}

#[test]
fn translation_perturbation_gives_fifteen_mm() {
    let d = tempfile::tempdir().unwrap();
    fs::write(
        d.path().join("cfg.json"),
        r#"{"schema": "cpf.pipeline/1", "synth": {"wrist_rotation_deg": 0.0}}"#,
    )
    .unwrap();
    synth(d.path(), &["--config", "cfg.json"]);
    let csv = ok(&["eval", "s/scene_0000/scene.json"], d.path());
    let rows = csv_rows(&csv);
    let mpvpe: f64 = rows[1][1].parse().unwrap();
    assert!((mpvpe - 15.0).abs() < 1e-6, "{mpvpe}");
}

#[test]
fn annotate_far_hand_has_no_contacts() {
    let d = tempfile::tempdir().unwrap();
    let s = synth(d.path(), &[]).join("scene_0000");
    let gt_path = s.join("gt_pose.json");
    let mut gt = json(&gt_path);
    let y = gt["hand"]["wrist"]["translation"][1].as_f64().unwrap();
    gt["hand"]["wrist"]["translation"][1] = Value::from(y + 300.0);
    fs::write(&gt_path, serde_json::to_string_pretty(&gt).unwrap()).unwrap();
    let out = ok(&["annotate", "s/scene_0000/scene.json"], d.path());
    assert_eq!(out.trim(), "scene_0000: 0 contact vertices");
    let labels = json(s.join("labels.json"));
    assert!(labels["vc"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
}

#[test]
fn refine_requires_labels() {
    let d = tempfile::tempdir().unwrap();
    let s = synth(d.path(), &[]).join("scene_0000/scene.json");
    let mut m = json(&s);
    m["labels"] = Value::Null;
    fs::write(&s, serde_json::to_string_pretty(&m).unwrap()).unwrap();
    let err = fails_with(&["refine", "s/scene_0000/scene.json", "--out", "r"], d.path(), 2);
    assert!(err.contains("annotate"));
    fails_with(&["refine", "s/none/scene.json", "--out", "r"], d.path(), 2);
}

#[test]
fn prediction_equal_to_ground_truth_scores_zero() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), &[]);
    fs::create_dir_all(d.path().join("p/scene_0000")).unwrap();
    fs::copy(
        d.path().join("s/scene_0000/gt_pose.json"),
        d.path().join("p/scene_0000/refined_pose.json"),
    )
    .unwrap();
    ok(
        &["eval", "s/scene_0000/scene.json", "--pred", "p", "--out", "e"],
        d.path(),
    );
    let rows = csv_rows(&fs::read_to_string(d.path().join("e/metrics.csv")).unwrap());
    assert_eq!(
        rows[0],
        [
            "sample",
            "hand_mpvpe_mm",
            "object_mpvpe_mm",
            "penetration_depth_mm",
            "intersection_volume_cm3",
            "disjointedness_mm",
            "simulation_displacement_mm"
        ]
    );
    assert_eq!(rows[1][1], "0.000000");
    assert_eq!(rows[1][2], "0.000000");
    let report = json(d.path().join("e/metrics.json"));
    assert_eq!(report["schema"], "cpf.metrics/1");
    assert!(report["simulation_displacement"].is_null());
}

#[test]
fn refine_outputs_do_not_depend_on_jobs() {
    let d = tempfile::tempdir().unwrap();
    fs::write(
        d.path().join("cfg.json"),
        r#"{"schema": "cpf.pipeline/1", "geo": {"iterations": 25}}"#,
    )
    .unwrap();
    synth(d.path(), &["--count", "2", "--config", "cfg.json"]);
    let scenes = ["s/scene_0000/scene.json", "s/scene_0001/scene.json"];
    for (out, jobs) in [("r1", "1"), ("r4", "4")] {
        let mut args = vec!["refine", "--config", "cfg.json", "--out", out, "--jobs", jobs];
        args.extend(scenes);
        ok(&args, d.path());
    }
    for scene in ["scene_0000", "scene_0001"] {
        for f in ["refined_pose.json", "trace.json", "hand.obj", "object.obj"] {
            let a = fs::read(d.path().join("r1").join(scene).join(f)).unwrap();
            let b = fs::read(d.path().join("r4").join(scene).join(f)).unwrap();
            assert_eq!(a, b, "{scene}/{f}");
        }
    }
    let trace = json(d.path().join("r1/scene_0000/trace.json"));
    assert_eq!(trace["entries"].as_array().unwrap().len(), 25);
    let pose = json(d.path().join("r1/scene_0000/refined_pose.json"));
    let init = json(d.path().join("s/scene_0000/initial_pose.json"));
    assert_eq!(pose["object"], init["object"]);
}
