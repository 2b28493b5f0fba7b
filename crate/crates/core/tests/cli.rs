//! End-to-end checks of the binary: output formats and the stable exit-code
//! contract (0 ok, 2 parse/config, 3 out-of-workspace, 4 eval input,
//! 5 timeout).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uamkit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uamkit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn iou_identical_boxes_is_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "1.0,2.0,4.0,2.0,0.3\n").unwrap();
    let out = uamkit(&["iou", "a.csv", "a.csv"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "1.000000\n");
}

#[test]
fn iou_disjoint_boxes_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "0,0,2,1,0\n").unwrap();
    fs::write(dir.path().join("b.csv"), "100,100,2,1,0.5\n").unwrap();
    let out = uamkit(&["iou", "a.csv", "b.csv", "--mode", "exact"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0.000000\n");
}

#[test]
fn iou_approx_quarter_turn_is_half() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("a.json"),
        "{\"cx\":0,\"cy\":0,\"w\":3,\"h\":3,\"theta\":0}\n",
    )
    .unwrap();
    fs::write(dir.path().join("b.csv"), "0,0,3,3,1.5707963267948966\n").unwrap();
    let out = uamkit(&["iou", "a.json", "b.csv", "--mode", "approx"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0.500000\n");
}

#[test]
fn iou_degrees_flag_converts_theta() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "0,0,4,2,0\n").unwrap();
    fs::write(dir.path().join("b.csv"), "0,0,4,2,90\n").unwrap();
    let out = uamkit(
        &["iou", "a.csv", "b.csv", "--mode", "exact", "--degrees"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0.333333\n");
}

#[test]
fn iou_parse_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "not,a,box\n").unwrap();
    let out = uamkit(&["iou", "a.csv", "a.csv"], dir.path());
    assert_eq!(code(&out), 2);
    let out = uamkit(&["iou", "missing.csv", "missing.csv"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn ik_full_extension_prints_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let out = uamkit(
        &["ik", "--l1", "1", "--l2", "1", "--x", "2", "--y", "0"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0.000000000 0.000000000\n");
}

#[test]
fn ik_unreachable_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = uamkit(
        &["ik", "--l1", "1", "--l2", "1", "--x", "3", "--y", "0"],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn ik_output_satisfies_forward_kinematics() {
    let dir = tempfile::tempdir().unwrap();
    let out = uamkit(
        &[
            "ik", "--l1", "0.25", "--l2", "0.18", "--x", "0.05", "--y", "-0.35",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut parts = text.split_whitespace();
    let theta1: f64 = parts.next().unwrap().parse().unwrap();
    let theta2: f64 = parts.next().unwrap().parse().unwrap();
    let x = 0.25 * theta1.cos() + 0.18 * (theta1 + theta2).cos();
    let y = 0.25 * theta1.sin() + 0.18 * (theta1 + theta2).sin();
    assert!((x - 0.05).abs() < 1e-8, "{x}");
    assert!((y + 0.35).abs() < 1e-8, "{y}");
}

#[test]
fn ik_degrees_flag_converts_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = uamkit(
        &[
            "ik",
            "--l1",
            "1",
            "--l2",
            "1",
            "--x",
            "0",
            "--y",
            "2",
            "--degrees",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "90.000000000 0.000000000\n");
}

#[test]
fn eval_perfect_detections_score_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("gt.csv"), "5,5,4,2,0.1\n30,8,6,3,0.9\n").unwrap();
    fs::write(
        dir.path().join("det.csv"),
        "5,5,4,2,0.1,0,0.9\n30,8,6,3,0.9,0,0.8\n",
    )
    .unwrap();
    let out = uamkit(
        &[
            "eval", "--dets", "det.csv", "--gts", "gt.csv", "--iou", "0.5",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "1.000000\n");
}

#[test]
fn eval_no_detections_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("gt.csv"), "5,5,4,2,0.1\n").unwrap();
    fs::write(dir.path().join("det.csv"), "# none\n").unwrap();
    let out = uamkit(
        &["eval", "--dets", "det.csv", "--gts", "gt.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0.000000\n");
}

#[test]
fn eval_without_ground_truth_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("gt.csv"), "# empty\n").unwrap();
    fs::write(dir.path().join("det.csv"), "5,5,4,2,0.1,0,0.9\n").unwrap();
    let out = uamkit(
        &["eval", "--dets", "det.csv", "--gts", "gt.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 4);
}

#[test]
fn eval_accepts_iou_threshold_alias() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("gt.csv"), "5,5,4,2,0.1\n").unwrap();
    fs::write(dir.path().join("det.csv"), "5,5,4,2,0.1,0,0.9\n").unwrap();
    let out = uamkit(
        &[
            "eval",
            "--dets",
            "det.csv",
            "--gts",
            "gt.csv",
            "--iou-threshold",
            "0.7",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "1.000000\n");
}

const SCENARIO: &str = "\
[target]
position = [1.2, 0.0, 0.05]
yaw = 0.6
";

#[test]
fn simulate_nominal_scenario_succeeds_and_writes_logs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mission.toml"), SCENARIO).unwrap();
    let out = uamkit(
        &[
            "simulate",
            "--config",
            "mission.toml",
            "--seed",
            "9",
            "--log-out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("\"success\": true"));
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(csv.starts_with("time,phase,x,y,z,yaw,err_x,err_y,err_z,theta1,theta2,theta3,p_b\n"));
    assert!(csv.contains(",done,"));
    let json = fs::read_to_string(dir.path().join("run.json")).unwrap();
    assert_eq!(json, stdout(&out));
}

#[test]
fn simulate_same_seed_reproduces_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mission.toml"), SCENARIO).unwrap();
    let args = [
        "simulate",
        "--config",
        "mission.toml",
        "--seed",
        "4",
        "--log-out",
        "x",
    ];
    let first = uamkit(&args, dir.path());
    let csv_a = fs::read_to_string(dir.path().join("x.csv")).unwrap();
    let second = uamkit(&args, dir.path());
    let csv_b = fs::read_to_string(dir.path().join("x.csv")).unwrap();
    assert_eq!(code(&first), 0);
    assert_eq!(code(&second), 0);
    assert_eq!(stdout(&first), stdout(&second));
    assert_eq!(csv_a, csv_b);
}

#[test]
fn simulate_short_time_cap_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mission.toml"), "time_cap = 0.1\n").unwrap();
    let out = uamkit(&["simulate", "--config", "mission.toml"], dir.path());
    assert_eq!(code(&out), 5);
    assert!(stdout(&out).contains("\"timed_out\""));
}

#[test]
fn simulate_bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("mission.toml"),
        "[waypoints]\ngrasp_point = [9.0, 0.0]\n",
    )
    .unwrap();
    let out = uamkit(&["simulate", "--config", "mission.toml"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn workspace_map_contains_both_zones() {
    let dir = tempfile::tempdir().unwrap();
    let out = uamkit(&["workspace", "--resolution", "0.02"], dir.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("x,y,zone,reachable\n"));
    assert!(text.contains("strong,true"));
    assert!(text.contains("weak,true"));
}

#[test]
fn anchors_one_box_gives_nine_identical_shapes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("boxes.csv"), "10,10,20,8,0.4\n").unwrap();
    let out = uamkit(
        &["anchors", "--boxes", "boxes.csv", "--seed", "1"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let shapes = parsed["shapes"].as_array().unwrap();
    assert_eq!(shapes.len(), 9);
    for shape in shapes {
        assert_eq!(shape[0].as_f64().unwrap(), 20.0);
        assert_eq!(shape[1].as_f64().unwrap(), 8.0);
    }
}

#[test]
fn unknown_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = uamkit(
        &[
            "ik", "--l1", "1", "--l2", "1", "--x", "1", "--y", "0", "--warp",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}
