//! End-to-end smoke tests for the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

use racewalk_core::pose::KEYPOINT_COUNT;
use racewalk_core::pose_metrics::GroundTruthPose;

fn racewalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_racewalk"))
        .args(args)
        .output()
        .expect("spawning racewalk")
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    let cycles = root.join("cycles.csv");
    let models = root.join("models");

    let out = racewalk(&[
        "synth",
        "--out-dir",
        path_str(&data),
        "--walkers",
        "3",
        "--samples-per-class",
        "3",
        "--seed",
        "5",
    ]);
    assert_success(&out, "synth");
    assert_eq!(std::fs::read_dir(data.join("keypoints")).unwrap().count(), 27);

    let out = racewalk(&[
        "process",
        "--input-dir",
        path_str(&data.join("keypoints")),
        "--labels",
        path_str(&data.join("labels.csv")),
        "--out",
        path_str(&cycles),
    ]);
    assert_success(&out, "process");
    let report_path = root.join("cycles.report.json");
    assert!(report_path.exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["kept"], 27);
    assert_eq!(report["config"]["outlier_sd_mult"], 3.0);

    // Reprocessing the same inputs is byte-identical.
    let first = std::fs::read(&cycles).unwrap();
    let out = racewalk(&[
        "process",
        "--input-dir",
        path_str(&data.join("keypoints")),
        "--labels",
        path_str(&data.join("labels.csv")),
        "--out",
        path_str(&cycles),
    ]);
    assert_success(&out, "reprocess");
    assert_eq!(std::fs::read(&cycles).unwrap(), first);

    let out = racewalk(&[
        "train",
        "--cycles",
        path_str(&cycles),
        "--fault",
        "bk",
        "--out-dir",
        path_str(&models),
    ]);
    assert_success(&out, "train");
    let model_paths: Vec<_> = std::fs::read_dir(&models)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(model_paths.len(), 3); // one fold per walker

    let metrics_csv = root.join("metrics.csv");
    let metrics_json = root.join("metrics.json");
    let out = racewalk(&[
        "eval",
        "--cycles",
        path_str(&cycles),
        "--fault",
        "bk",
        "--out-csv",
        path_str(&metrics_csv),
        "--out-json",
        path_str(&metrics_json),
    ]);
    assert_success(&out, "eval");
    let table = std::fs::read_to_string(&metrics_csv).unwrap();
    assert_eq!(table.lines().count(), 4); // header + 3 walkers

    let cat_csv = root.join("importance_categories.csv");
    let frame_csv = root.join("importance_frames.csv");
    let mut args = vec!["importance"];
    let model_strs: Vec<String> = model_paths
        .iter()
        .map(|p| p.to_str().unwrap().to_string())
        .collect();
    args.extend(model_strs.iter().map(|s| s.as_str()));
    args.extend([
        "--out-category",
        path_str(&cat_csv),
        "--out-frames",
        path_str(&frame_csv),
    ]);
    let out = racewalk(&args);
    assert_success(&out, "importance");
    assert_eq!(std::fs::read_to_string(&cat_csv).unwrap().lines().count(), 10);
    assert_eq!(std::fs::read_to_string(&frame_csv).unwrap().lines().count(), 19);
}

#[test]
fn pose_eval_reports_perfect_scores_for_identical_poses() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    let out = racewalk(&[
        "synth",
        "--out-dir",
        path_str(&data),
        "--walkers",
        "2",
        "--samples-per-class",
        "1",
        "--noise-sigma",
        "0",
    ]);
    assert_success(&out, "synth");
    let pred = data.join("keypoints/A_normal_000.json");
    let seq = racewalk::formats::read_keypoint_file(&pred).unwrap();

    // Ground truth equal to the prediction, all keypoints visible.
    let poses: Vec<GroundTruthPose> = seq
        .frames
        .iter()
        .map(|p| {
            let mut keypoints = [(0.0, 0.0); KEYPOINT_COUNT];
            for (i, k) in p.keypoints().iter().enumerate() {
                keypoints[i] = (k.x, k.y);
            }
            GroundTruthPose {
                keypoints,
                visibility: [1; KEYPOINT_COUNT],
                scale: 100.0,
            }
        })
        .collect();
    let gt = root.join("gt.json");
    racewalk::formats::write_ground_truth_file(&gt, &seq.video_id, &poses).unwrap();

    let out = racewalk(&["pose-eval", "--pred", path_str(&pred), "--gt", path_str(&gt)]);
    assert_success(&out, "pose-eval");
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("pose-eval prints JSON");
    assert_eq!(report["mean_oks"], 1.0);
    assert_eq!(report["map"], 1.0);
}

#[test]
fn fatal_errors_exit_with_code_two() {
    let out = racewalk(&[
        "process",
        "--input-dir",
        "/nonexistent",
        "--labels",
        "/nonexistent.csv",
        "--out",
        "/tmp/never.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = racewalk(&["train", "--cycles", "/nonexistent.csv", "--fault", "bk", "--out-dir", "/tmp"]);
    assert_eq!(out.status.code(), Some(2));
}
