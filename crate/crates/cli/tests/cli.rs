use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seglep::pipeline::PipelineConfig;
use seglep::raster::{
    load_label_map, save_contour_map, save_image, save_semantic_map, write_label_map, LabelMap,
};
use seglep::synth::{scene, Scene, SceneSpec};
use serde_json::Value;

fn seglep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seglep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_scene(seed: u64) -> Scene {
    let spec = SceneSpec {
        width: 20,
        height: 16,
        shapes: 2,
        ..Default::default()
    };
    scene(&spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Writes image.ppm, semmap.bin (+ json), contour.bin and gt/truth.pgm.
fn write_sample(dir: &Path, sc: &Scene) {
    fs::create_dir_all(dir.join("gt")).unwrap();
    save_image(&sc.image, dir.join("image.ppm")).unwrap();
    save_semantic_map(&sc.semantic, dir.join("semmap.bin")).unwrap();
    save_contour_map(&sc.contour, dir.join("contour.bin")).unwrap();
    write_label_map(&sc.truth, dir.join("gt/truth.pgm")).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn segment_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = small_scene(1);
    write_sample(tmp.path(), &sc);
    let out_dir = tmp.path().join("out");
    let out = seglep(&[
        "segment",
        "--image",
        s(&tmp.path().join("image.ppm")),
        "--semmap",
        s(&tmp.path().join("semmap.bin")),
        "--contour",
        s(&tmp.path().join("contour.bin")),
        "--lambda",
        "0.5",
        "--emit-semantic",
        "--emit-overlay",
        "--out-dir",
        s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let labels = load_label_map(out_dir.join("labels.pgm")).unwrap();
    assert_eq!(labels, labels.connected_components());
    let summary: Value =
        serde_json::from_slice(&fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["regions"], labels.region_count());
    assert_eq!(summary["lambda"], 0.5);
    assert!(summary["timings"]["merge_ms"].is_number());
    let total: u64 = summary["groups"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(total as usize, labels.region_count());
    assert!(load_label_map(out_dir.join("semantic.pgm"))
        .unwrap()
        .labels()
        .iter()
        .all(|&c| c < 3));
    assert!(out_dir.join("overlay.ppm").exists());
}

#[test]
fn segment_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    write_sample(tmp.path(), &small_scene(2));
    let out = seglep(&["segment", "--image", s(&tmp.path().join("image.ppm"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = seglep(&[
        "segment",
        "--image",
        s(&tmp.path().join("missing.ppm")),
        "--semmap",
        s(&tmp.path().join("semmap.bin")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.ppm"));

    // Semantic map from a differently sized scene.
    let other = tempfile::tempdir().unwrap();
    let mut sc = small_scene(3);
    sc.image = seglep::raster::RasterImage::from_fn(5, 5, |_, _| [0, 0, 0]);
    save_image(&sc.image, other.path().join("image.ppm")).unwrap();
    let out = seglep(&[
        "segment",
        "--image",
        s(&other.path().join("image.ppm")),
        "--semmap",
        s(&tmp.path().join("semmap.bin")),
        "--out-dir",
        s(other.path()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn lambda_zero_keeps_the_pixel_grid() {
    let tmp = tempfile::tempdir().unwrap();
    write_sample(tmp.path(), &small_scene(4));
    let out = seglep(&[
        "segment",
        "--image",
        s(&tmp.path().join("image.ppm")),
        "--semmap",
        s(&tmp.path().join("semmap.bin")),
        "--lambda",
        "0",
        "--out-dir",
        s(tmp.path()),
    ]);
    assert_eq!(code(&out), 0);
    let labels = load_label_map(tmp.path().join("labels.pgm")).unwrap();
    assert_eq!(labels.region_count(), 20 * 16);
}

fn run_hierarchy(dir: &Path, out_dir: &Path, extra: &[&str]) -> Output {
    let (image, semmap, contour) = (
        dir.join("image.ppm"),
        dir.join("semmap.bin"),
        dir.join("contour.bin"),
    );
    let mut args = vec![
        "hierarchy",
        "--image",
        s(&image),
        "--semmap",
        s(&semmap),
        "--contour",
        s(&contour),
        "--out-dir",
        s(out_dir),
    ];
    args.extend_from_slice(extra);
    seglep(&args)
}

fn nested(fine: &LabelMap, coarse: &LabelMap) -> bool {
    let mut parent = std::collections::HashMap::new();
    fine.labels()
        .iter()
        .zip(coarse.labels())
        .all(|(f, c)| *parent.entry(*f).or_insert(*c) == *c)
}

#[test]
fn hierarchy_exports_nested_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    write_sample(tmp.path(), &small_scene(5));
    let out_dir = tmp.path().join("h");
    let out = run_hierarchy(tmp.path(), &out_dir, &["--levels", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let index: Value =
        serde_json::from_slice(&fs::read(out_dir.join("sweep.json")).unwrap()).unwrap();
    let levels = index["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 3);
    let maps: Vec<LabelMap> = levels
        .iter()
        .map(|l| load_label_map(out_dir.join(l["file"].as_str().unwrap())).unwrap())
        .collect();
    for w in maps.windows(2) {
        assert!(nested(&w[0], &w[1]));
    }
    assert!(out_dir.join("ucm.bin").exists());
    let events = fs::read_to_string(out_dir.join("events.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 20 * 16 - 1);

    let out = seglep(&["hierarchy", "--image", "", "--semmap", "x.bin"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn identical_runs_write_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    write_sample(tmp.path(), &small_scene(6));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run_hierarchy(tmp.path(), &a, &["--levels", "4"])), 0);
    assert_eq!(code(&run_hierarchy(tmp.path(), &b, &["--levels", "4"])), 0);
    for name in [
        "ucm.bin",
        "events.jsonl",
        "sweep.json",
        "level_000.pgm",
        "level_003.pgm",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn eval_scores_and_rejects_ragged_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = small_scene(7);
    write_sample(tmp.path(), &sc);
    // A second annotator that lumps everything together.
    write_label_map(
        &LabelMap::constant(20, 16, 0),
        tmp.path().join("gt/zz_flat.pgm"),
    )
    .unwrap();
    let truth = tmp.path().join("gt/truth.pgm");
    let gt_dir = tmp.path().join("gt");
    let only_truth = tmp.path().join("gt1");
    fs::create_dir(&only_truth).unwrap();
    fs::copy(&truth, only_truth.join("truth.pgm")).unwrap();

    let out = seglep(&["eval", "--pred", s(&truth), "--gt-dir", s(&only_truth)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let sc0 = &report["images"][0]["scores"][0];
    assert_eq!(sc0["covering"], 1.0);
    assert_eq!(sc0["pri"], 1.0);
    assert_eq!(sc0["voi"], 0.0);
    assert_eq!(sc0["boundary"]["f"], 1.0);

    let out = seglep(&[
        "eval",
        "--pred",
        s(&truth),
        "--gt-dir",
        s(&gt_dir),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("pred,threshold,covering"));
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .skip(2)
        .map(|v| v.parse().unwrap())
        .collect();
    // Perfect against one annotator, not against the flat one.
    assert!(row[0] < 1.0 && row[1] < 1.0 && row[2] > 0.0);
    // Precision is against the union of annotators, so stays perfect.
    assert_eq!(row[3], 1.0);

    let h = tmp.path().join("h");
    assert_eq!(code(&run_hierarchy(tmp.path(), &h, &["--levels", "3"])), 0);
    let out = seglep(&[
        "eval",
        "--pred",
        s(&h.join("sweep.json")),
        "--gt-dir",
        s(&gt_dir),
        "--pred",
        s(&truth),
        "--gt-dir",
        s(&gt_dir),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshold grid"));
}

#[test]
fn calibrate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let train = tmp.path().join("train");
    for i in 0..2 {
        write_sample(&train.join(format!("s{i}")), &small_scene(10 + i));
    }
    let space = tmp.path().join("space.json");
    fs::write(
        &space,
        r#"{"params": [["w_s", [0, 1, 2]], ["beta", [0, 0.5]]]}"#,
    )
    .unwrap();
    let cfg_path = tmp.path().join("fitted.json");
    let trace = tmp.path().join("trace.csv");
    let out = seglep(&[
        "calibrate",
        "--train",
        s(&train),
        "--space",
        s(&space),
        "--levels",
        "8",
        "--out",
        s(&cfg_path),
        "--trace",
        s(&trace),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    let score = summary["score"].as_f64().unwrap();
    assert!(fs::read_to_string(&trace)
        .unwrap()
        .starts_with("step,param"));
    let cfg = PipelineConfig::load(&cfg_path).unwrap();
    assert!(cfg.engine.lambda_stop.is_some());

    // Segmenting each sample with the fitted config reproduces the score.
    let mut args = vec!["eval".to_string()];
    for i in 0..2 {
        let dir = train.join(format!("s{i}"));
        let out_dir = tmp.path().join(format!("seg{i}"));
        let out = seglep(&[
            "segment",
            "--image",
            s(&dir.join("image.ppm")),
            "--semmap",
            s(&dir.join("semmap.bin")),
            "--contour",
            s(&dir.join("contour.bin")),
            "--config",
            s(&cfg_path),
            "--out-dir",
            s(&out_dir),
        ]);
        assert_eq!(code(&out), 0);
        args.extend([
            "--pred".into(),
            s(&out_dir.join("labels.pgm")).into(),
            "--gt-dir".into(),
            s(&dir.join("gt")).into(),
        ]);
    }
    let out = seglep(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let replayed = report["summary"]["covering"]["ods"].as_f64().unwrap();
    assert!((replayed - score).abs() < 1e-12, "{replayed} vs {score}");

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = seglep(&["calibrate", "--train", s(&empty), "--out", s(&cfg_path)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn overlay_and_thread_setting() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = small_scene(8);
    write_sample(tmp.path(), &sc);
    let out_path = tmp.path().join("o.ppm");
    let out = seglep(&[
        "overlay",
        "--image",
        s(&tmp.path().join("image.ppm")),
        "--labels",
        s(&tmp.path().join("gt/truth.pgm")),
        "--out",
        s(&out_path),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out_path.exists());

    let out = Command::new(env!("CARGO_BIN_EXE_seglep"))
        .args(["overlay", "--image", "a", "--labels", "b", "--out", "c"])
        .env("SEGLEP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let out = Command::new(env!("CARGO_BIN_EXE_seglep"))
        .args([
            "eval",
            "--pred",
            s(&tmp.path().join("gt/truth.pgm")),
            "--gt-dir",
            s(&tmp.path().join("gt")),
        ])
        .env("SEGLEP_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}
