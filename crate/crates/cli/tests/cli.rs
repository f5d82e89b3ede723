use std::path::PathBuf;
use std::process::{Command, Output};

fn critlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critlab")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("critlab-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generate_is_reproducible_and_loadable() {
    let a = critlab(&["generate", "--n", "200", "--d", "2", "--seed", "5"]);
    let b = critlab(&["generate", "--n", "200", "--d", "2", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let dir = scratch("gen");
    let path = dir.join("g.txt");
    std::fs::write(&path, &a.stdout).unwrap();
    let o = critlab(&["saw-count", "--graph", path.to_str().unwrap(), "--vertex", "0", "--max-len", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("length,count\n0,1\n"));
}

#[test]
fn effective_config_is_printed() {
    let o = critlab(&["generate", "--n", "10"]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("effective config"));
    assert!(err.contains("\"n\": 10"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = scratch("cfg");
    let path = dir.join("c.json");
    std::fs::write(&path, r#"{"saw-count": {"max_len": 3, "typo": 1}}"#).unwrap();
    let o = critlab(&["--config", path.to_str().unwrap(), "saw-count", "--n", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let o = critlab(&["scaling-study", "--n-grid", "1,4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[1]"));
    let o = critlab(&["spectra", "--n", "3", "--d", "1.5", "--chain", "X9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = scratch("override");
    let path = dir.join("c.json");
    std::fs::write(&path, r#"{"saw-count": {"n": 30, "max_len": 2}}"#).unwrap();
    let o = critlab(&["--config", path.to_str().unwrap(), "saw-count", "--max-len", "4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 6);
}

#[test]
fn resource_limit_exits_with_three() {
    let o = critlab(&["susceptibility", "--n", "40", "--d", "2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn weitz_and_spectra_on_a_small_model() {
    let dir = scratch("model");
    let path = dir.join("m.json");
    std::fs::write(&path, r#"{"n": 2, "edges": [[0, 1, 0.5]]}"#).unwrap();
    let m = path.to_str().unwrap();
    let o = critlab(&["weitz-check", "--model", m, "--v", "0", "--y", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = critlab(&["--json", "spectra", "--model", m, "--chain", "X1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let gap = v["gap"].as_f64().unwrap();
    assert!((gap - (1.0 - 0.5f64.tanh())).abs() < 1e-12);
}

#[test]
fn compare_suite_dump_replays() {
    let dir = scratch("compare");
    let out = dir.join("rows.csv");
    let o = critlab(&["--out", out.to_str().unwrap(), "compare-suite", "--n", "4", "--seeds", "2", "--beta", "0.2,critical"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(&out).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2);
    let again = critlab(&["compare-suite", "--n", "4", "--seeds", "2", "--beta", "0.2,critical"]);
    assert_eq!(rows, stdout(&again));

    let mut report: serde_json::Value = {
        let o = critlab(&["--json", "compare-suite", "--n", "4", "--seeds", "1", "--beta", "0.2"]);
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let first = report["reports"][0].take();
    let dump = dir.join("dump.json");
    std::fs::write(&dump, serde_json::to_string(&first).unwrap()).unwrap();
    let o = critlab(&["--json", "compare-suite", "--replay", dump.to_str().unwrap()]);
    assert!(o.status.success());
    let replayed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["projection_margin", "acceleration_margin", "block_margin", "embedding_mismatch"] {
        let (a, b) = (first[key].as_f64().unwrap(), replayed[key].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-12, "{key}: {a} vs {b}");
    }
}

#[test]
fn scaling_study_csv_is_byte_identical() {
    let args = ["scaling-study", "--n-grid", "4,6", "--seeds", "2", "--beta", "critical", "--master-seed", "9"];
    let a = critlab(&args);
    let b = critlab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("n,seed,graph_seed,edges,statistic,value\n"));
}

#[test]
fn chen_eldan_instances_pass() {
    let o = critlab(&["chen-eldan", "--m", "3", "--instances", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn simulate_writes_a_trajectory_log() {
    let dir = scratch("sim");
    let log = dir.join("traj.bin");
    let o = critlab(&[
        "simulate", "--n", "3", "--d", "1.5", "--beta", "0.4", "--chain", "X2", "--a", "1", "--rate-a", "3",
        "--t-end", "0.7", "--replicas", "20000", "--log", log.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::metadata(&log).unwrap().len() > 0);
    let rows: Vec<(f64, f64)> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[1], f[2])
        })
        .collect();
    let tv: f64 = rows.iter().map(|(e, h)| (e - h).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.03, "tv {tv}");
}

#[test]
fn verify_structure_reports_json() {
    let o = critlab(&["verify-structure", "--n", "3000", "--seed", "2"]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.get("properties").is_some() && v.get("no_tangle").is_some());
}
