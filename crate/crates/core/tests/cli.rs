use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oomdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oomdp"))
        .args(args)
        .env_remove("OOMDP_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_owned()
}

#[test]
fn learn_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = oomdp(&["learn", "--map", "taxi5", "--episodes", "5", "--seed", "2", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert!(model.get("failures").is_some());
    let episodes = fs::read_to_string(dir.path().join("episodes.jsonl")).unwrap();
    assert_eq!(episodes.lines().count(), 5);
    for line in episodes.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some("episode,steps,reward,unknown_predictions,converged"));
    assert_eq!(summary.lines().count(), 6);
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = oomdp(&["learn", "--map", "warehouse8", "--episodes", "6", "--seed", "5", "--out", &out_arg(d.path())]);
        assert!(o.status.success());
    }
    for f in ["model.json", "episodes.jsonl", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_reports_the_learning_curve() {
    let o = oomdp(&["eval", "--map", "taxi5", "--episodes", "20", "--seed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let value = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_owned()))
            .unwrap_or_else(|| panic!("{key} missing in\n{text}"))
    };
    assert_eq!(value("mispredictions "), "0");
    assert_eq!(value("kwik_bound "), "17");
    assert_eq!(value("kwik_violations "), "0");
    assert_eq!(value("optimal_steps "), value("final_steps "));
    assert!(value("converged_episode ").parse::<usize>().unwrap() <= 20);
    assert!(text.lines().any(|l| l.starts_with("unknown_count ")));
}

#[test]
fn plan_replays_a_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert!(oomdp(&["learn", "--map", "taxi5", "--episodes", "15", "--seed", "3", "--out", &out]).status.success());
    let model = dir.path().join("model.json");
    let plan_dir = dir.path().join("plan");
    let o = oomdp(&["plan", "--model", model.to_str().unwrap(), "--map", "taxi5", "--seed", "3", "--out", plan_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(plan_dir.join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[3], "0");
    assert_eq!(row[4], "true");
}

#[test]
fn localize_writes_trace_and_scans() {
    let dir = tempfile::tempdir().unwrap();
    let o = oomdp(&["localize", "--map", "maze", "--steps", "4", "--beams", "8", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(dir.path().join("pose_trace.csv")).unwrap();
    assert_eq!(
        trace.lines().next(),
        Some("t,true_x,true_y,true_theta,est_x,est_y,est_theta,n_particles,modes,rmse")
    );
    assert_eq!(trace.lines().count(), 6);
    let scan = fs::read_to_string(dir.path().join("scan_004.csv")).unwrap();
    assert_eq!(scan.lines().count(), 9);
}

#[test]
fn map_canonicalizes() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("messy.map");
    fs::write(&src, "% demo\nA.#  \r\n.BD\n\n").unwrap();
    let out_dir = dir.path().join("canon");
    let o = oomdp(&["map", "--map", src.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "A.#\n.BD\n");
    assert_eq!(fs::read_to_string(out_dir.join("messy.map")).unwrap(), "A.#\n.BD\n");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "map = taxi5\nepisodes = 9\nseed = 4\n").unwrap();
    let o = oomdp(&["learn", "--config", cfg.to_str().unwrap(), "--episodes", "3", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn bad_input_exit_codes() {
    assert_eq!(oomdp(&["learn", "--episodes", "x"]).status.code(), Some(1));
    assert_eq!(oomdp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(oomdp(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.map");
    fs::write(&bad, "A.D\n.x.\n").unwrap();
    let o = oomdp(&["map", "--map", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2:2"));
}
