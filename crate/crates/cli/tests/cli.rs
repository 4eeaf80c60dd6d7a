use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use occ3d::io::{read_grid, read_mask, write_grid};
use occ3d::pipeline::{keyframe_dir, KEYFRAME_FILES};
use occ3d::synth::scenes;
use occ3d::{GridPreset, MaskKind, OccGrid};
use serde_json::Value;

fn occ3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occ3d"))
        .args(args)
        .output()
        .expect("spawn occ3d")
}

fn ok_json(args: &[&str]) -> Value {
    let out = occ3d(args);
    assert!(
        out.status.success(),
        "occ3d {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small moving-object scene written through `--script`.
fn small_scene(root: &Path) -> std::path::PathBuf {
    let script = scenes::moving_object(3, 1.0);
    let script_path = root.join("script.json");
    fs::write(&script_path, serde_json::to_vec(&script).unwrap()).unwrap();
    let scene = root.join("scene");
    ok_json(&["gen-synth", "--script", s(&script_path), "--gt", "--out", s(&scene)]);
    scene
}

#[test]
fn inspect_presets() {
    let v = ok_json(&["inspect"]);
    assert_eq!(v["grid"]["dims"], serde_json::json!([200, 200, 32]));
    let v = ok_json(&["--grid-preset", "nuscenes", "inspect"]);
    assert_eq!(v["grid"]["dims"], serde_json::json!([200, 200, 16]));
}

#[test]
fn invalid_voxel_size_exits_2() {
    let out = occ3d(&["--voxel-size", "0.3", "inspect"]);
    assert_eq!(out.status.code(), Some(2));
    let out = occ3d(&["--voxel-size", "-1", "inspect"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_threads_exits_2() {
    assert_eq!(occ3d(&["--threads", "0", "inspect"]).status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(occ3d(&["inspect", "--bogus"]).status.code(), Some(2));
}

#[test]
fn missing_scene_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = occ3d(&["pipeline", "--scene", s(&tmp.path().join("nope")), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn corrupt_grid_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("g.oc3g");
    write_grid(&path, &OccGrid::unobserved(GridPreset::Waymo.spec())).unwrap();
    let mut bytes = fs::read(&path).unwrap();
    bytes[100] ^= 1;
    fs::write(&path, bytes).unwrap();
    assert_eq!(occ3d(&["inspect", s(&path)]).status.code(), Some(3));
}

#[test]
fn generate_run_and_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = small_scene(tmp.path());
    let info = ok_json(&["inspect", s(&scene)]);
    assert_eq!(info["frames"], 3);
    assert_eq!(info["keyframes"], serde_json::json!([0, 1, 2]));

    let out = tmp.path().join("labels");
    let run = ok_json(&["pipeline", "--scene", s(&scene), "--out", s(&out)]);
    assert_eq!(run["keyframes"].as_array().unwrap().len(), 3);
    let provenance: Value = serde_json::from_slice(&fs::read(out.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(provenance["config_sha256"], run["config_sha256"]);

    let kf = keyframe_dir(&out, 0);
    for f in KEYFRAME_FILES {
        assert!(kf.join(f).is_file(), "{f} missing");
    }
    assert_eq!(read_mask(&kf.join(KEYFRAME_FILES[3])).unwrap().kind(), MaskKind::Joint);

    let pred = kf.join(KEYFRAME_FILES[0]);
    let mask = kf.join(KEYFRAME_FILES[3]);
    let self_eval = ok_json(&["evaluate", "--pred", s(&pred), "--gt", s(&pred), "--mask", s(&mask), "--scene", s(&scene)]);
    assert_eq!(self_eval["miou"], 1.0);

    let gt = keyframe_dir(&scene.join("gt"), 0).join(KEYFRAME_FILES[0]);
    let vs_gt = ok_json(&["evaluate", "--pred", s(&pred), "--gt", s(&gt), "--mask", s(&mask), "--ontology", "waymo"]);
    let vehicle = &vs_gt["classes"][1];
    assert_eq!(vehicle["name"], "vehicle");
    assert!(vehicle["iou"].as_f64().unwrap() > 0.5, "{vs_gt}");

    // a non-joint mask is a usage error
    let lidar = kf.join(KEYFRAME_FILES[1]);
    let bad = occ3d(&["evaluate", "--pred", s(&pred), "--gt", s(&gt), "--mask", s(&lidar)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn staged_commands_match_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = small_scene(tmp.path());
    let full = tmp.path().join("full");
    ok_json(&["pipeline", "--scene", s(&scene), "--out", s(&full)]);

    let agg = tmp.path().join("agg");
    let meta = ok_json(&["aggregate", "--scene", s(&scene), "--keyframe", "1", "--out", s(&agg)]);
    assert_eq!(meta["frame_index"], 1);
    assert!(meta["points"].as_u64().unwrap() > 0);

    let vox = tmp.path().join("vox.oc3g");
    ok_json(&["voxelize", "--input", s(&agg), "--out", s(&vox)]);
    let vis = tmp.path().join("vis");
    ok_json(&["visibility", "--input", s(&agg), "--scene", s(&scene), "--out", s(&vis)]);

    let reference = keyframe_dir(&full, 1);
    let pre = read_grid(&vox).unwrap();
    let staged = read_grid(&vis.join(KEYFRAME_FILES[0])).unwrap();
    let direct = read_grid(&reference.join(KEYFRAME_FILES[0])).unwrap();
    assert_eq!(staged.occupied_indices(), pre.occupied_indices());
    // the staged cloud went through an f32 payload, so returns on a voxel
    // boundary may land one cell over
    let a: std::collections::HashSet<usize> = staged.occupied_indices().into_iter().collect();
    let b: std::collections::HashSet<usize> = direct.occupied_indices().into_iter().collect();
    let iou = a.intersection(&b).count() as f64 / a.union(&b).count() as f64;
    assert!(iou > 0.5, "iou {iou}");
}

#[test]
fn inspect_reports_file_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = small_scene(tmp.path());
    let out = tmp.path().join("labels");
    ok_json(&["pipeline", "--scene", s(&scene), "--out", s(&out)]);
    let kf = keyframe_dir(&out, 0);
    assert_eq!(ok_json(&["inspect", s(&kf.join(KEYFRAME_FILES[0]))])["kind"], "grid");
    assert_eq!(ok_json(&["inspect", s(&kf.join(KEYFRAME_FILES[1]))])["kind"], "lidar_mask");
    assert_eq!(ok_json(&["inspect", s(&scene.join("frames/000000.oc3s"))])["kind"], "points");
}

#[test]
fn builtin_requires_a_source() {
    let tmp = tempfile::tempdir().unwrap();
    let out = occ3d(&["gen-synth", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}
