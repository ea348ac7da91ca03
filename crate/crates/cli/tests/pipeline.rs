use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn insight(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_insight"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = insight(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn det(image: &str, class: &str, b: [f64; 4], conf: f64, source: &str, verdict: &str) -> String {
    format!(
        r#"{{"schema":"insight-det/1","image_id":"{image}","area_id":"area_1","class":"{class}","box2d":[{},{},{},{}],"confidence":{conf},"source":"{source}","verifier_verdict":"{verdict}"}}"#,
        b[0], b[1], b[2], b[3]
    )
}

#[test]
fn full_synthetic_run_writes_every_artifact() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path();
    for stage in ["synth", "ingest", "fuse", "filter", "graph", "export", "eval", "budget"] {
        ok(out, &[stage]);
        let prov = json(&out.join(stage).join("provenance.json"));
        assert_eq!(prov["stage"], stage);
        assert_eq!(prov["config_hash"].as_str().unwrap().len(), 64);
    }
    for f in [
        "synth/truth.json",
        "ingest/store.jsonl",
        "ingest/stats.json",
        "fuse/area_1/instances.json",
        "fuse/area_1/points.bin",
        "fuse/area_2/instances_sam3.json",
        "fuse/diagnostics.json",
        "fuse/summary.json",
        "filter/reduction.json",
        "graph/full.graphml",
        "graph/payload.json",
        "export/area_1/manifest.json",
        "export/area_2/coord.f32le",
        "eval/report.json",
        "budget/report.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report = json(&out.join("eval/report.json"));
    let acc = report["accuracy"]["overall"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let summary = json(&out.join("fuse/summary.json"));
    assert_eq!(summary["fragmentation"]["fused_overall"].as_f64(), Some(1.0));
    // default role is full: no view file besides the full graph
    assert!(!out.join("graph/ems.graphml").exists());
    let budget = json(&out.join("budget/report.json"));
    assert!(budget["compression"]["ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path();
    ok(out, &["synth"]);
    ok(out, &["ingest"]);
    ok(out, &["fuse"]);
    let first = fs::read(out.join("fuse/area_1/instances.json")).unwrap();
    let points = fs::read(out.join("fuse/area_1/points.bin")).unwrap();
    ok(out, &["fuse"]);
    assert_eq!(first, fs::read(out.join("fuse/area_1/instances.json")).unwrap());
    assert_eq!(points, fs::read(out.join("fuse/area_1/points.bin")).unwrap());
}

#[test]
fn role_flag_writes_view() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path();
    for s in ["synth", "ingest", "fuse"] {
        ok(out, &[s]);
    }
    ok(out, &["--role", "ems", "graph"]);
    assert!(out.join("graph/ems.graphml").is_file());
    let payload = json(&out.join("graph/payload.json"));
    assert_eq!(payload["views"].as_array().unwrap().len(), 2);
    ok(out, &["filter"]);
    ok(out, &["graph", "--filtered"]);
    ok(out, &["export", "--filtered"]);
}

#[test]
fn missing_raster_dir_exits_2() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path();
    ok(out, &["synth"]);
    ok(out, &["ingest"]);
    let cfg = write_config(out, r#"{"paths": {"rasters": "/nonexistent/rasters"}}"#);
    assert_eq!(code(&insight(out, &["--config", &cfg, "fuse"])), 2);
}

#[test]
fn missing_raster_file_is_a_diagnostic() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path();
    ok(out, &["synth"]);
    ok(out, &["ingest"]);
    let victim = fs::read_dir(out.join("synth/rasters")).unwrap().next().unwrap().unwrap().path();
    fs::remove_file(victim).unwrap();
    ok(out, &["fuse"]);
    let diags = json(&out.join("fuse/diagnostics.json"));
    assert!(!diags.as_array().unwrap().is_empty());
}

#[test]
fn exit_codes_for_bad_invocations() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path();
    assert_eq!(code(&insight(out, &["--jobs", "0", "synth"])), 1);
    assert_eq!(code(&insight(out, &["--config", "/nonexistent.json", "synth"])), 2);
    let bad = write_config(out, r#"{"plausibility": {"tau": 2.0}}"#);
    assert_eq!(code(&insight(out, &["--config", &bad, "synth"])), 1);
    let unknown = write_config(out, r#"{"no_such_field": 1}"#);
    assert_eq!(code(&insight(out, &["--config", &unknown, "synth"])), 1);
    assert_eq!(code(&insight(out, &["no-such-command"])), 1);
    assert_eq!(code(&insight(out, &["fuse"])), 2);
    assert_eq!(code(&insight(out, &["eval"])), 2);
}

#[test]
fn duplicate_pair_across_files_is_collapsed() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("dets");
    fs::create_dir(&dir).unwrap();
    let a = [
        det("img_0", "door", [0.0, 0.0, 10.0, 10.0], 0.9, "sam3", "unverified"),
        det("img_0", "aed", [50.0, 50.0, 60.0, 60.0], 0.8, "sam3", "unverified"),
    ];
    let b = [
        det("img_0", "door", [1.0, 0.0, 11.0, 10.0], 0.7, "yoloe", "unverified"),
        det("img_1", "door", [0.0, 0.0, 10.0, 10.0], 0.7, "yoloe", "unverified"),
    ];
    fs::write(dir.join("a.jsonl"), a.join("\n")).unwrap();
    fs::write(dir.join("b.jsonl"), b.join("\n")).unwrap();
    let out = t.path().join("out");
    let cfg = write_config(t.path(), &format!(r#"{{"paths": {{"detections": ["{}"]}}}}"#, dir.display()));
    ok(&out, &["--config", &cfg, "ingest"]);
    let store = fs::read_to_string(out.join("ingest/store.jsonl")).unwrap();
    assert_eq!(store.lines().count(), 3);
    let stats = json(&out.join("ingest/stats.json"));
    assert_eq!(stats["totals"]["dedup_removed"], 1);
    assert_eq!(stats["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn empty_inputs_give_empty_store() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("dets");
    fs::create_dir(&dir).unwrap();
    fs::write(dir.join("empty.jsonl"), "").unwrap();
    let out = t.path().join("out");
    let cfg = write_config(t.path(), &format!(r#"{{"paths": {{"detections": ["{}"]}}}}"#, dir.display()));
    ok(&out, &["--config", &cfg, "ingest"]);
    assert_eq!(fs::read(out.join("ingest/store.jsonl")).unwrap(), b"");
    let stats = json(&out.join("ingest/stats.json"));
    assert_eq!(stats["totals"]["raw_records"], 0);
    assert!(stats["totals"]["survival_pct"].is_null());
}

#[test]
fn ingest_statistics_match_hand_count() {
    let t = tempfile::tempdir().unwrap();
    let file = t.path().join("dets.jsonl");
    let lines = [
        det("img_0", "door", [0.0, 0.0, 10.0, 10.0], 0.9, "sam3", "accepted"),
        // suppressed by the line above
        det("img_0", "door", [0.0, 0.0, 10.0, 9.0], 0.6, "sam3", "unverified"),
        // below the sam3 gate
        det("img_0", "window", [20.0, 0.0, 30.0, 10.0], 0.1, "sam3", "unverified"),
        // verifier veto
        det("img_0", "aed", [40.0, 0.0, 50.0, 10.0], 0.95, "sam3", "rejected"),
        // unknown class: loader rejection
        det("img_0", "toaster", [0.0, 0.0, 1.0, 1.0], 0.9, "sam3", "unverified"),
        // OCR hit far from any visual exit sign
        det("img_0", "exit_sign", [200.0, 200.0, 240.0, 220.0], 0.5, "ocr", "unverified"),
        det("img_1", "fire_extinguisher", [0.0, 0.0, 40.0, 40.0], 0.5, "yoloe", "unverified"),
    ];
    fs::write(&file, lines.join("\n")).unwrap();
    let out = t.path().join("out");
    let cfg = write_config(t.path(), &format!(r#"{{"paths": {{"detections": ["{}"]}}}}"#, file.display()));
    ok(&out, &["--config", &cfg, "ingest"]);
    let s = json(&out.join("ingest/stats.json"));
    let tot = &s["totals"];
    assert_eq!(tot["files"], 1);
    assert_eq!(tot["raw_records"], 6);
    assert_eq!(tot["loader_rejected"], 1);
    assert_eq!(tot["below_gate"], 1);
    assert_eq!(tot["verifier_rejected"], 1);
    assert_eq!(tot["verifier_accepted"], 1);
    assert_eq!(tot["dedup_removed"], 1);
    assert_eq!(tot["kept"], 3);
    assert_eq!(tot["survival_pct"].as_f64().unwrap(), 50.0);
    assert_eq!(s["inputs"][0]["rejected"][0]["line"], 5);
    assert_eq!(s["ocr"]["ocr_total"], 1);
    assert_eq!(s["ocr"]["exclusive_total"], 1);
    // door 100 px, OCR box 800 px, extinguisher 1600 px; threshold 1024
    assert_eq!(s["small_object_fraction"]["door"].as_f64(), Some(1.0));
    assert_eq!(s["small_object_fraction"]["fire_extinguisher"].as_f64(), Some(0.0));
    assert!(s["small_object_fraction"]["aed"].is_null());
}

#[test]
fn mismatched_frames_fail_eval() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path();
    let cfg = write_config(out, r#"{"export": {"frame": "camera"}}"#);
    for s in ["synth", "ingest", "fuse", "export"] {
        ok(out, &["--config", &cfg, s]);
    }
    let o = insight(out, &["--config", &cfg, "eval"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("coordinate frames differ"));
}

#[test]
fn budget_grid_from_config_sizes() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path();
    ok(out, &["budget"]);
    let r = json(&out.join("budget/report.json"));
    let rows = r["formatted"].as_array().unwrap();
    assert_eq!(rows[0][0], "191.3 h");
    assert_eq!(rows[1][0], "33.6 s");
    assert_eq!(rows[2][0], "14.4 s");
    assert_eq!(rows[3][0], "6.4 s");
    assert_eq!(rows[1][2], "1.3 s");
    assert_eq!(r["rows"][2]["cells"][0]["fits"], true);
    assert_eq!(r["rows"][1]["cells"][0]["fits"], false);
    assert!(r["compression"].is_null());
}
