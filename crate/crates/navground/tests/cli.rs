use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use navground::cli;

fn data(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel).display().to_string()
}

fn run_with_input(args: &[&str], input: &str) -> (u8, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["navground"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut Cursor::new(input.as_bytes()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn run(args: &[&str]) -> (u8, String, String) {
    run_with_input(args, "")
}

fn out_dir() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    (dir, out)
}

fn ppm_count(dir: &Path) -> usize {
    fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "ppm")).count()
}

#[test]
fn simulate_writes_the_bundle() {
    let (_tmp, out) = out_dir();
    let (code, stdout, err) = run(&["--out", out.to_str().unwrap(), "simulate", &data("scenes/meeting_room.json")]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("8 snapshots, 13 objects"));
    assert!(stdout.contains("Mean Error (m)"));
    assert_eq!(ppm_count(&out), 8);
    let snaps: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("snapshots.json")).unwrap()).unwrap();
    assert_eq!(snaps["snapshots"].as_array().map(Vec::len), Some(8));
    let map: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("online_map.json")).unwrap()).unwrap();
    assert_eq!(map["objects"].as_array().map(Vec::len), Some(13));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("error_report.json")).unwrap()).unwrap();
    assert!(report["mean"].as_f64().unwrap() >= report["min"].as_f64().unwrap());
    let ppm = fs::read(out.join("snapshot_1.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n160 120\n255\n"));
    assert_eq!(ppm.len(), 15 + 160 * 120 * 3);
}

#[test]
fn simulate_honours_omega() {
    let (_tmp, out) = out_dir();
    let (code, stdout, _) = run(&["--omega", "4", "--out", out.to_str().unwrap(), "simulate", &data("scenes/office.json")]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("4 snapshots"));
    assert_eq!(ppm_count(&out), 4);
    let snaps: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("snapshots.json")).unwrap()).unwrap();
    let headings: Vec<f64> = snaps["snapshots"].as_array().unwrap().iter().map(|s| s["heading_deg"].as_f64().unwrap()).collect();
    for w in headings.windows(2) {
        assert!(((w[1] - w[0]).rem_euclid(360.0) - 90.0).abs() < 1e-9, "{headings:?}");
    }
}

#[test]
fn simulate_show_map_prints_footprints() {
    let (_tmp, out) = out_dir();
    let (code, stdout, _) = run(&["--show-map", "--out", out.to_str().unwrap(), "simulate", &data("scenes/office.json")]);
    assert_eq!(code, 0);
    assert!(stdout.lines().filter(|l| l.starts_with('.') || l.starts_with('#')).count() > 100);
}

#[test]
fn simulate_rejects_a_missing_pose() {
    let (code, _, err) = run(&["simulate", &data("scenes/office.json"), "--pose", "3"]);
    assert_eq!(code, 2);
    assert!(err.contains("snapshot point 3"));
}

#[test]
fn evaluate_bundled_dataset() {
    let (_tmp, out) = out_dir();
    let (code, stdout, err) = run(&["--out", out.to_str().unwrap(), "evaluate", &data("visdia.json")]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("Type-A") && stdout.contains("Type-B"));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("space,case,SR_or_AR,AS_or_NS,T"));
    assert!(csv.lines().any(|l| l == "overall,type-B,1.000,1.000,1.000"));
    for l in csv.lines().skip(1) {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 5, "{l}");
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["items"].as_array().map(Vec::len), Some(25));
    assert_eq!(json["weights"]["ar"], 0.6);
}

#[test]
fn evaluate_with_other_weights() {
    let (_tmp, out) = out_dir();
    let (code, _, _) = run(&["--weights", "0.5,0.5,0.5,0.5", "--out", out.to_str().unwrap(), "evaluate", &data("visdia.json")]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["weights"]["sr"], 0.5);
}

#[test]
fn evaluate_replays_a_canned_transcript() {
    let (_tmp, out) = out_dir();
    let transcript = data("transcripts/cafeteria_high_chair.json");
    let args = ["--grounder", "canned", "--transcript", &transcript, "--out", out.to_str().unwrap(), "evaluate", &data("visdia_canned.json")];
    let (code, _, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["items"][0]["alpha"], 3);
    assert_eq!(json["items"][0]["resolved_id"], "chair7");
}

#[test]
fn evaluate_error_codes() {
    assert_eq!(run(&["evaluate", "/nonexistent/visdia.json"]).0, 3);
    assert_eq!(run(&["--weights", "1,1,1,1", "evaluate", &data("visdia.json")]).0, 2);
    assert_eq!(run(&["--grounder", "remote", "evaluate", &data("visdia.json")]).0, 2);
    assert_eq!(run(&["--grounder", "canned", "evaluate", &data("visdia.json")]).0, 2);
    assert_eq!(run(&["--omega", "0", "evaluate", &data("visdia.json")]).0, 2);
    // Ids in the dataset follow the default sweep; another sweep renames objects.
    assert_eq!(run(&["--omega", "4", "evaluate", &data("visdia.json")]).0, 3);
    assert_eq!(run(&["frobnicate"]).0, 2);
}

#[test]
fn config_file_is_read_and_flags_win() {
    let (tmp, out) = out_dir();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "omega = 4\nseed = 3\n[camera]\nwidth_px = 80\nheight_px = 60\n").unwrap();
    let (code, stdout, _) = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "simulate", &data("scenes/office.json")]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("4 snapshots"));
    assert!(fs::read(out.join("snapshot_1.ppm")).unwrap().starts_with(b"P6\n80 60\n255\n"));
    let (code, stdout, _) =
        run(&["--config", cfg.to_str().unwrap(), "--omega", "6", "--out", out.to_str().unwrap(), "simulate", &data("scenes/office.json")]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("6 snapshots"));
    fs::write(&cfg, "omgea = 4\n").unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "simulate", &data("scenes/office.json")]).0, 2);
}

#[test]
fn ground_resolves_and_plans() {
    let input = "action go to; type chair; attr color=black\nnearest_to door\n";
    let (code, stdout, err) = run_with_input(&["ground", &data("scenes/meeting_room.json"), "--pose", "1"], input);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("D1> It could be"));
    assert!(stdout.contains("D2> The chair is labeled as chair1"));
    assert!(stdout.contains("mission 1: go to chair1"));
    assert!(stdout.contains("path: "));
}

#[test]
fn ground_skips_bad_lines() {
    let input = "type chair\naction go to; type whiteboard\n";
    let (code, stdout, _) = run_with_input(&["ground", &data("scenes/meeting_room.json")], input);
    assert_eq!(code, 0);
    assert!(stdout.contains("D1> ! "));
    assert!(stdout.contains("mission 1: go to whiteboard1"));
}

#[test]
fn ground_fails_after_k_max_turns() {
    let input = "action go to; type chair\ntype chair\ntype chair\n";
    let (code, _, err) = run_with_input(&["--k-max", "3", "ground", &data("scenes/meeting_room.json")], input);
    assert_eq!(code, 5);
    assert!(err.contains("k_max = 3"));
}

#[test]
fn ground_fails_when_input_ends() {
    let (code, _, _) = run_with_input(&["ground", &data("scenes/meeting_room.json")], "action go to; type chair\n");
    assert_eq!(code, 5);
}

#[test]
fn plan_prints_path_and_overlay() {
    let (code, stdout, _) = run(&["plan", &data("scenes/office.json"), "--start", "10,10", "--goal", "12,13"]);
    assert_eq!(code, 0);
    // Two diagonal steps and one straight step.
    assert!(stdout.starts_with("path: 4 cells, cost 3.828"), "{stdout}");
    let cells = stdout.lines().nth(1).unwrap();
    assert!(cells.starts_with("(10,10) ") && cells.ends_with(" (12,13)"));
    assert!(stdout.contains('*'));
}

#[test]
fn plan_error_codes() {
    assert_eq!(run(&["plan", &data("scenes/office.json"), "--goal", "1000,1"]).0, 2);
    assert_eq!(run(&["plan", &data("scenes/office.json"), "--goal", "x"]).0, 2);
    assert_eq!(run(&["plan", "/nonexistent/scene.json", "--goal", "1,1"]).0, 3);
}
