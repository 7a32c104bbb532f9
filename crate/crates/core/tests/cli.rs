//! Exit-code contract, artifacts and replay of the `cbilab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cbilab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cbilab"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("CBILAB_THREADS", n),
        None => cmd.env_remove("CBILAB_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn run_with(dir: &Path, name: &str, body: &str, threads: Option<&str>) -> Output {
    let out = dir.join(name);
    let cfg = dir.join(format!("{name}.toml"));
    let text = format!("output = {:?}\n{body}", out.to_str().unwrap());
    fs::write(&cfg, text).unwrap();
    cbilab(&["run", cfg.to_str().unwrap()], threads)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const PROP1: &str = "experiment = \"verify-prop1\"\nt_list = [100.0, 1000.0, 10000.0]\n";

#[test]
fn version_and_catalogue() {
    let v = cbilab(&["version"], None);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("cbilab "));
    let l = cbilab(&["list-presets"], None);
    assert_eq!(l.status.code(), Some(0));
    let text = String::from_utf8_lossy(&l.stdout);
    assert!(text.lines().any(|line| line.starts_with("log_immigration ") && line.contains(" Log ")));
    assert!(text.lines().any(|line| line.starts_with("sublog ") && line.contains("Sub-log (no convergence)")));
}

#[test]
fn prop1_passes_and_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let o = run_with(dir.path(), "prop1", PROP1, None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("verify-prop1 t=")).count(), 3);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("prop1/report.json")).unwrap()).unwrap();
    for key in ["experiment", "params", "rows", "verdict"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert_eq!(report["verdict"], true);
    let rows: Vec<f64> = report["rows"].as_array().unwrap().iter().map(|r| r["discrepancy"].as_f64().unwrap()).collect();
    assert!(rows.windows(2).all(|w| w[1] < w[0]));
    let table = fs::read_to_string(dir.path().join("prop1/table.csv")).unwrap();
    assert!(table.starts_with("t,discrepancy,n,tolerance"));
    assert!(!table.contains('\r'));
}

#[test]
fn failed_verdict_exits_two() {
    let dir = TempDir::new().unwrap();
    let o = run_with(dir.path(), "strict", &format!("{PROP1}max_final = 1e-12\n"), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("verdict: FAIL"));
}

#[test]
fn errors_exit_one_with_distinct_messages() {
    let dir = TempDir::new().unwrap();
    let unknown = run_with(
        dir.path(),
        "unknown",
        "experiment = \"fastjump\"\nt_list = [10.0]\n[immigration]\npreset = \"no_such_preset\"\n",
        None,
    );
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).contains("unknown mechanism preset"));

    let invalid = run_with(
        dir.path(),
        "invalid",
        "experiment = \"fastjump\"\nt_list = [10.0]\n[immigration]\npreset = \"log_immigration\"\nparams = { c = -2.0 }\n",
        None,
    );
    assert_eq!(invalid.status.code(), Some(1));
    assert!(stderr(&invalid).contains("invalid parameter"));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = dir.path().join("blocked.toml");
    fs::write(&cfg, format!("output = {:?}\n{PROP1}", blocker.join("out").to_str().unwrap())).unwrap();
    let blocked = cbilab(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(blocked.status.code(), Some(1));
    assert!(stderr(&blocked).contains("cannot create output directory"));

    let malformed = run_with(dir.path(), "malformed", "experiment = [\n", None);
    assert_eq!(malformed.status.code(), Some(1));
    assert!(stderr(&malformed).contains("config error"));

    let missing = cbilab(&["run", dir.path().join("absent.toml").to_str().unwrap()], None);
    assert_eq!(missing.status.code(), Some(1));

    let bad_threads = run_with(dir.path(), "threads", PROP1, Some("zero"));
    assert_eq!(bad_threads.status.code(), Some(1));
    assert!(stderr(&bad_threads).contains("CBILAB_THREADS"));
}

#[test]
fn tables_replay_across_thread_caps() {
    let dir = TempDir::new().unwrap();
    let body = "experiment = \"verify-subordinator\"\nn = 2000\nt_list = [10.0, 20.0]\ns_grid = [0.5, 1.0]\n\
                joint = [0.5, 1.0]\nseed = 21\n[immigration]\npreset = \"log_immigration\"\n";
    let tables: Vec<String> = ["1", "4"]
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let name = format!("replay{k}");
            let o = run_with(dir.path(), &name, body, Some(n));
            assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
            fs::read_to_string(dir.path().join(name).join("table.csv")).unwrap()
        })
        .collect();
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn simulate_writes_samples() {
    let dir = TempDir::new().unwrap();
    let o = run_with(
        dir.path(),
        "sim",
        "experiment = \"simulate\"\nn = 500\nt_list = [0.5, 1.0]\n[simulate]\nprocess = \"cbi\"\n\
         [branching]\npreset = \"feller\"\n[immigration]\npreset = \"exponential_immigration\"\n",
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stderr(&o), String::from_utf8_lossy(&o.stdout));
    let samples = fs::read_to_string(dir.path().join("sim/samples.csv")).unwrap();
    assert!(samples.starts_with("stream,time,value\n"));
    assert_eq!(samples.lines().count(), 1 + 500 * 2);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = cbilab::cli::ExperimentConfig::load(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 5);
}
