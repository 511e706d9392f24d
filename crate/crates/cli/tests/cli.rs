use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rdoa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdoa"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run rdoa")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rdoa(dir, args);
    assert!(
        out.status.success(),
        "rdoa {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Free-field room, short segments.
const ANECHOIC: &str = r#"
[experiment]
segment_samples = 8192
interferences = 2
[experiment.room]
dimensions = [5.0, 4.0, 3.5]
t60 = 0.0
air_length = 256
fs = 16000.0
"#;

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn simulate_writes_expected_wav() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "c.toml",
        &ANECHOIC.replace("interferences = 2", "interferences = 2\nmic_count = 6"),
    );
    ok(d.path(), &["simulate", "--config", "c.toml", "--out", "a"]);
    let r = hound::WavReader::open(d.path().join("a/signals.wav")).unwrap();
    let spec = r.spec();
    assert_eq!(spec.channels, 6);
    assert_eq!(spec.sample_rate, 16_000);
    assert_eq!(
        (spec.bits_per_sample, spec.sample_format),
        (32, hound::SampleFormat::Float)
    );
    // Two segments plus the tail of the last analysis window.
    assert_eq!(r.duration(), 2 * 8192 + 512);
    let meta = json(&d.path().join("a/signals.json"));
    assert_eq!(meta["channels"], 6);
    assert_eq!(meta["interference_deg"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_is_deterministic_given_seed() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.toml", ANECHOIC);
    for (out, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        ok(
            d.path(),
            &["simulate", "--config", "c.toml", "--seed", seed, "--out", out],
        );
    }
    let read = |p: &str| fs::read(d.path().join(p)).unwrap();
    assert_eq!(read("a/signals.wav"), read("b/signals.wav"));
    assert_eq!(read("a/signals.json"), read("b/signals.json"));
    assert_ne!(read("a/signals.wav"), read("c/signals.wav"));
}

#[test]
fn default_room_renders() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["simulate", "--out", "a"]);
    let meta = json(&d.path().join("a/signals.json"));
    assert_eq!(meta["channels"], 12);
    assert_eq!(meta["scenario"]["room"]["t60"], 0.15);
    assert_eq!(
        meta["scenario"]["room"]["dimensions"],
        serde_json::json!([5.0, 4.0, 3.5])
    );
}

#[test]
fn scenario_file_reproduces_drawn_scenario() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.toml", ANECHOIC);
    ok(d.path(), &["simulate", "--config", "c.toml", "--out", "a"]);
    let meta = json(&d.path().join("a/signals.json"));
    fs::create_dir(d.path().join("cfg")).unwrap();
    write(d.path(), "cfg/scenario.json", &meta["scenario"].to_string());
    write(
        d.path(),
        "cfg/c.toml",
        &format!("scenario = \"scenario.json\"\n{ANECHOIC}"),
    );
    ok(d.path(), &["simulate", "--config", "cfg/c.toml", "--out", "b"]);
    let read = |p: &str| fs::read(d.path().join(p)).unwrap();
    assert_eq!(read("a/signals.wav"), read("b/signals.wav"));
}

#[test]
fn json_config_is_accepted() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "c.json",
        r#"{"experiment": {"mic_count": 5, "room": {"dimensions": [5, 4, 3.5], "t60": 0, "air_length": 128, "fs": 8000}}}"#,
    );
    ok(d.path(), &["simulate", "--config", "c.json", "--out", "a"]);
    let spec = hound::WavReader::open(d.path().join("a/signals.wav")).unwrap().spec();
    assert_eq!((spec.channels, spec.sample_rate), (5, 8000));
}

#[test]
fn estimate_anechoic_single_source_within_grid_step() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "c.toml",
        &ANECHOIC.replace("interferences = 2", "interferences = 0\nbeamformers = [\"ds\", \"sbsp\", \"mvdr\", \"intersection\"]\nmeans = [\"riemannian\", \"euclidean\", \"log_euclidean\"]"),
    );
    ok(d.path(), &["simulate", "--config", "c.toml", "--out", "a"]);
    ok(
        d.path(),
        &[
            "estimate",
            "--config",
            "c.toml",
            "--input",
            "a/signals.wav",
            "--out",
            "e",
        ],
    );
    let report = json(&d.path().join("e/estimate.json"));
    let est = report["estimates"].as_array().unwrap();
    // Three means times three beamformers, plus the intersection once.
    assert_eq!(est.len(), 10);
    for e in est {
        let err = e["doa_error_deg"].as_f64().unwrap();
        assert!(err <= 0.5, "{} {}: error {err}", e["mean_kind"], e["beamformer"]);
    }
    let pattern = csv_rows(&d.path().join("e/pattern.csv"));
    assert_eq!(pattern.len(), 10 * 281);
    assert_eq!(csv_rows(&d.path().join("e/metrics.csv")).len(), 10);
    assert!(report["means"]["riemannian"]["re"].is_array());
}

#[test]
fn estimate_two_interferences_riemannian_ds_beats_euclidean() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["simulate", "--seed", "3", "--out", "a"]);
    ok(
        d.path(),
        &[
            "estimate",
            "--input",
            "a/signals.wav",
            "--beamformer",
            "ds",
            "--out",
            "e",
        ],
    );
    let report = json(&d.path().join("e/estimate.json"));
    let sir = |mean: &str| {
        report["metrics"]
            .as_array()
            .unwrap()
            .iter()
            .find(|m| m["mean_kind"] == mean)
            .unwrap()["mean_output_sir_db"]
            .as_f64()
            .unwrap()
    };
    assert!(
        sir("riemannian") > sir("euclidean"),
        "{} vs {}",
        sir("riemannian"),
        sir("euclidean")
    );
}

#[test]
fn estimate_streaming_emits_one_estimate_per_segment() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.toml", ANECHOIC);
    ok(d.path(), &["simulate", "--config", "c.toml", "--out", "a"]);
    ok(
        d.path(),
        &[
            "estimate",
            "--config",
            "c.toml",
            "--input",
            "a/signals.wav",
            "--streaming",
            "--out",
            "s",
        ],
    );
    // 2 × 8192 samples at hop 512 give 32 frames, two segments of 16.
    let rows = csv_rows(&d.path().join("s/streaming.csv"));
    assert_eq!(rows.len(), 2 * 2);
    assert_eq!(&rows[0][0], "ds");
    assert_eq!(&rows[1][1], "2");
    assert_eq!(json(&d.path().join("s/estimate.json"))["mode"], "streaming");
    let bad = rdoa(
        d.path(),
        &[
            "estimate",
            "--config",
            "c.toml",
            "--input",
            "a/signals.wav",
            "--streaming",
            "--mean",
            "euclidean",
        ],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn estimate_rejects_channel_mismatch() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.toml", ANECHOIC);
    ok(d.path(), &["simulate", "--config", "c.toml", "--out", "a"]);
    let mut meta = json(&d.path().join("a/signals.json"));
    meta["scenario"]["array"]["positions"].as_array_mut().unwrap().pop();
    write(d.path(), "m.json", &meta.to_string());
    let out = rdoa(
        d.path(),
        &["estimate", "--input", "a/signals.wav", "--metadata", "m.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channels"));
}

#[test]
fn verify_example1_passes_with_report() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["verify", "--suite", "example1", "--out", "v"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("sqrt(13)"));
    let report = json(&d.path().join("v/verify.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["suites"][0]["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_config_exits_with_error_code() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.toml", "[sweep]\nsnr = [1]\n");
    assert_eq!(
        rdoa(d.path(), &["simulate", "--config", "c.toml"]).status.code(),
        Some(2)
    );
    assert_eq!(rdoa(d.path(), &["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn two_point_sweep_row_count() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "c.toml",
        &format!("{ANECHOIC}[sweep]\ninput_sir_db = [-6, 0]\nmonte_carlo = 3\n"),
    );
    ok(d.path(), &["sweep", "--config", "c.toml", "--out", "s"]);
    // 2 points × 2 beamformers × 2 means.
    let summary = csv_rows(&d.path().join("s/summary.csv"));
    assert_eq!(summary.len(), 2 * 2 * 2);
    assert!(summary.iter().all(|r| &r[5] == "3"));
    assert_eq!(csv_rows(&d.path().join("s/trials.csv")).len(), 2 * 3 * 4);
}
