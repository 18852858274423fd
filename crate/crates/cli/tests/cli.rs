use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bikelane"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL: &str = "synth_grid = 6x6\nsynth_trajectories = 300\nsynth_mean_length = 4\nseed = 3\nbudget_km = 3\n";

fn small_config(dir: &Path) {
    fs::write(dir.join("run.cfg"), SMALL).unwrap();
}

/// Two adjacent segments with precise coordinates, and two trips.
fn two_segments(dir: &Path) {
    fs::write(
        dir.join("net.csv"),
        "s1,100,10,113.54012345678901 22.27031234567891;113.5411 22.2704\n\
         s2,200,100,113.5411 22.2704;113.54234567890123 22.27000000000001\n\
         NEIGHBORS\ns1,s2\n",
    )
    .unwrap();
    fs::write(
        dir.join("trips.csv"),
        "t1,2017-03-01 08:00:00,113.54,22.27,[s1 s2]\nt2,2017-03-01 09:00:00,113.54,22.27,[s1]\n",
    )
    .unwrap();
    fs::write(dir.join("two.cfg"), "network = net.csv\ntrajectories = trips.csv\nalgo = greedy\n").unwrap();
}

#[test]
fn zero_budget_gives_empty_plan() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    let o = run(d.path(), &["solve", "--config", "run.cfg", "--set", "algo=greedy", "--set", "budget=0", "--set", "out=o"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let plan = json(&d.path().join("o/plan.json"));
    assert_eq!(plan["selected"], Value::Array(vec![]));
    assert_eq!(plan["objective"], 0.0);
    assert_eq!(plan["cost"].as_f64().unwrap().to_bits(), 0.0f64.to_bits());
}

#[test]
fn choice_model_without_routes_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    let o = run(d.path(), &["solve", "--config", "run.cfg", "--set", "model=gu-choice", "--set", "algo=exact"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("routes"));
    assert!(!d.path().join("out").exists());
}

#[test]
fn unknown_key_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    let o = run(d.path(), &["solve", "--config", "run.cfg", "--set", "alpah=1.2"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpah"));
}

#[test]
fn reported_gap_matches_bound_and_objective() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    for (algo, widen) in [("lagrangian", "false"), ("lagrangian", "true"), ("exact", "false")] {
        let out = format!("out={algo}{widen}");
        let o = run(
            d.path(),
            &["solve", "--config", "run.cfg", "--set", &format!("algo={algo}"), "--set", &format!("widen={widen}"), "--set", &out],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let plan = json(&d.path().join(format!("{algo}{widen}/plan.json")));
        let (z, ub, gap) = (
            plan["objective"].as_f64().unwrap(),
            plan["bound"].as_f64().unwrap(),
            plan["gap"].as_f64().unwrap(),
        );
        assert!(z <= ub + 1e-9 * ub);
        assert!((gap - (ub - z) / ub).abs() <= 1e-12, "{algo}: gap {gap}");
        assert!(plan["cost"].as_f64().unwrap() <= plan["budget"].as_f64().unwrap() + 1e-6);
        assert!(d.path().join(format!("{algo}{widen}/timing.json")).exists());
    }
}

#[test]
fn interrupted_exact_run_keeps_its_bound() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    let o = run(d.path(), &["solve", "--config", "run.cfg", "--set", "algo=exact", "--set", "time_limit=0.001", "--set", "out=o"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let plan = json(&d.path().join("o/plan.json"));
    assert_eq!(plan["status"], "interrupted");
    assert!(plan["bound"].as_f64().unwrap() >= plan["objective"].as_f64().unwrap());
}

#[test]
fn sweep_writes_one_directory_per_cell() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    let o = run(
        d.path(),
        &["sweep", "--config", "run.cfg", "--set", "out=s", "--grid", "alpha=1.02,1.1", "--grid", "budget_km=2,3", "--jobs", "2"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = d.path().join("s");
    let mut plans = 0;
    let mut csvs = 0;
    for e in fs::read_dir(&s).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            assert!(p.join("plan.json").exists());
            plans += 1;
        } else if p.file_name().unwrap() == "sweep.csv" {
            csvs += 1;
        }
    }
    assert_eq!((plans, csvs), (4, 1));
    let table = fs::read_to_string(s.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("cell,alpha,budget_km,status,objective,bound,gap,cost,"));
    assert_eq!(rows.len(), 5);
}

#[test]
fn sweep_collapses_duplicate_values() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    let o = run(
        d.path(),
        &["sweep", "--config", "run.cfg", "--set", "out=s", "--set", "algo=greedy", "--grid", "alpha=1.1,1.1", "--grid", "budget_km=2"],
    );
    assert_eq!(code(&o), 0);
    let dirs = fs::read_dir(d.path().join("s")).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(dirs, 1);
}

#[test]
fn sweep_reports_failed_cells() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    let o = run(
        d.path(),
        &["sweep", "--config", "run.cfg", "--set", "out=s", "--set", "algo=exact", "--grid", "time_limit=0.001,60"],
    );
    assert_eq!(code(&o), 3);
    let table = fs::read_to_string(d.path().join("s/sweep.csv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("time_limit-0.001,0.001,interrupted,")));
    assert!(table.lines().any(|l| l.starts_with("time_limit-60,60,optimal,")));
}

#[test]
fn export_flags_selected_segments_and_keeps_coordinates() {
    let d = tempfile::tempdir().unwrap();
    two_segments(d.path());
    for (budget, expect) in [("10", [true, false]), ("0", [false, false])] {
        let out = format!("out=b{budget}");
        let o = run(d.path(), &["solve", "--config", "two.cfg", "--set", &format!("budget={budget}"), "--set", &out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let plan = format!("b{budget}/plan.json");
        let geo = format!("b{budget}.geojson");
        let o = run(d.path(), &["export", "--config", "two.cfg", "--plan", &plan, "--out", &geo]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let doc = json(&d.path().join(&geo));
        assert_eq!(doc["type"], "FeatureCollection");
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), 2);
        let flags: Vec<bool> = features.iter().map(|f| f["properties"]["selected"].as_bool().unwrap()).collect();
        assert_eq!(flags, expect);
        let first = &features[0]["geometry"]["coordinates"][0];
        assert_eq!(first[0].as_f64().unwrap().to_bits(), 113.54012345678901f64.to_bits());
        assert_eq!(first[1].as_f64().unwrap().to_bits(), 22.27031234567891f64.to_bits());
        let last = &features[1]["geometry"]["coordinates"][1];
        assert_eq!(last[0].as_f64().unwrap().to_bits(), 113.54234567890123f64.to_bits());
        assert_eq!(last[1].as_f64().unwrap().to_bits(), 22.27000000000001f64.to_bits());
    }
}

#[test]
fn metrics_compares_plans() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    for (algo, out) in [("greedy", "out=g"), ("lagrangian", "out=l")] {
        let o = run(d.path(), &["solve", "--config", "run.cfg", "--set", &format!("algo={algo}"), "--set", out]);
        assert_eq!(code(&o), 0);
    }
    let o = run(d.path(), &["metrics", "--config", "run.cfg", "--plan", "g/plan.json", "--plan", "l/plan.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\nplan,n_lanes,"));
    assert!(text.contains("label,coverage_change_pct,"));
    assert!(text.lines().any(|l| l.starts_with("l/plan.json,")));
}

#[test]
fn synth_and_ingest_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["synth", "--out", "data", "--grid", "4x4", "--trajectories", "50", "--ods", "2", "--stock-days", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["network.csv", "trajectories.csv", "routes.csv", "stock.csv"] {
        assert!(d.path().join("data").join(f).exists(), "{f}");
    }
    let o = run(
        d.path(),
        &["ingest", "--network", "data/network.csv", "--trajectories", "data/trajectories.csv", "--out", "norm"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(d.path().join("data/network.csv")).unwrap(),
        fs::read_to_string(d.path().join("norm/network.csv")).unwrap()
    );
    let o = run(
        d.path(),
        &[
            "decensor",
            "--network",
            "data/network.csv",
            "--trajectories",
            "data/trajectories.csv",
            "--stock",
            "data/stock.csv",
            "--horizon-days",
            "3",
            "--out",
            "dec",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.path().join("dec/decensor.csv").exists());
}

#[test]
fn solve_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    for out in ["out=a", "out=b"] {
        assert_eq!(code(&run(d.path(), &["solve", "--config", "run.cfg", "--set", "widen=true", "--set", out])), 0);
    }
    for f in ["plan.json", "report.csv"] {
        assert_eq!(fs::read(d.path().join("a").join(f)).unwrap(), fs::read(d.path().join("b").join(f)).unwrap(), "{f}");
    }
}
