use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn aggmin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggmin"))
        .args(args)
        .current_dir(cwd)
        .env_remove("AGGMIN_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn cantor_figure_case_passes_and_lists_outputs() {
    let t = tempfile::tempdir().unwrap();
    let o = aggmin(&["cantor", "12", "5", "4", "--out", "c"], t.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&t.path().join("c"));
    let outs: Vec<String> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    for f in ["verification.json", "profile.csv", "profile.svg"] {
        assert!(outs.iter().any(|o| o.ends_with(f)), "{f} missing from {outs:?}");
    }
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("c/verification.json")).unwrap()).unwrap();
    assert!(v["steady_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["gate"]["pass"], false);
    assert!(v["min_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn cantor_gate_example_and_bad_parameters() {
    let t = tempfile::tempdir().unwrap();
    let o = aggmin(&["cantor", "100", "35", "3", "--out", "ok"], t.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("ok/verification.json")).unwrap()).unwrap();
    assert_eq!(v["gate"]["pass"], true);

    let o = aggmin(&["cantor", "3.5", "5", "2", "--out", "bad"], t.path());
    assert_eq!(code(&o), 2);
    assert!(!t.path().join("bad/manifest.json").exists());

    write(t.path(), "probes.json", "[0.0]");
    let o = aggmin(&["cantor", "12", "5", "2", "--probes", "probes.json", "--out", "p"], t.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_missing_config_names_the_path() {
    let t = tempfile::tempdir().unwrap();
    let o = aggmin(&["simulate", "--config", "no/such.json", "--out", "s"], t.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no/such.json"));
    assert!(!t.path().join("s/manifest.json").exists());
}

#[test]
fn single_particle_trajectory_is_constant() {
    let t = tempfile::tempdir().unwrap();
    write(
        t.path(),
        "one.json",
        r#"{"spec": {"family": "power_law", "a": 2.0, "b": 1.0, "d": 2}, "n": 1, "dt": 0.1,
            "t_final": 1.0, "init": {"kind": "explicit", "points": [[0.25, 0.5]]}, "snapshot_stride": 1}"#,
    );
    let o = aggmin(&["simulate", "--config", "one.json", "--out", "s"], t.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(t.path().join("s/trajectory.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 11);
    for row in &rows {
        assert_eq!((&row[2], &row[3]), ("0.25", "0.5"));
    }
    assert_eq!(manifest(&t.path().join("s"))["command"], "simulate");
}

#[test]
fn simulate_is_idempotent() {
    let t = tempfile::tempdir().unwrap();
    write(
        t.path(),
        "small.json",
        r#"{"spec": {"family": "hier_gauss", "d": 2, "alpha": 3.0, "lambda": 0.15, "c_w": 0.25,
                     "k_trunc": 5, "c2": 0.2},
            "n": 40, "dt": 0.01, "t_final": 0.5, "init": {"kind": "uniform_box", "lo": [0.0], "hi": [0.5]},
            "snapshot_stride": 10}"#,
    );
    for dir in ["a", "b"] {
        let o = aggmin(&["simulate", "--config", "small.json", "--seed", "7", "--out", dir], t.path());
        assert_eq!(code(&o), 0);
    }
    for f in ["trajectory.csv", "energy.csv", "steps.csv", "final.csv", "summary.json", "final.svg"] {
        let a = fs::read(t.path().join("a").join(f)).unwrap();
        let b = fs::read(t.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    assert_eq!(manifest(&t.path().join("a"))["seed"], 7);
}

#[test]
fn blow_up_exits_3() {
    let t = tempfile::tempdir().unwrap();
    write(
        t.path(),
        "b.json",
        r#"{"spec": {"family": "power_law", "a": 2.0, "b": 1.0, "d": 1}, "n": 2, "dt": 0.01,
            "t_final": 10.0, "init": {"kind": "explicit", "points": [[0.0], [0.1]]}, "blowup_bound": 0.3}"#,
    );
    let o = aggmin(&["simulate", "--config", "b.json", "--out", "s"], t.path());
    assert_eq!(code(&o), 3);
    assert!(!t.path().join("s/manifest.json").exists());
}

#[test]
fn flic_cases() {
    let t = tempfile::tempdir().unwrap();
    let o = aggmin(&["flic", "--out", "f"], t.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let w: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("f/witnesses.json")).unwrap()).unwrap();
    let w = w.as_array().unwrap();
    assert_eq!(w.len(), 2);
    for r in w {
        assert_eq!(r["found"], true);
        assert_eq!(r["verified"], true);
        assert!(r["energy"].as_f64().unwrap() < 0.0);
    }
    assert!(t.path().join("f/witness_1.csv").exists());

    write(t.path(), "riesz.json", r#"{"family": "riesz_quad", "d": 2, "alpha": 3.0, "c2": 0.2}"#);
    let o = aggmin(&["flic", "--config", "riesz.json", "--out", "r"], t.path());
    assert_eq!(code(&o), 0);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("r/windows.json")).unwrap()).unwrap();
    assert!(s["windows"].as_array().unwrap().is_empty());

    write(t.path(), "bad.json", "{\"family\": ");
    let o = aggmin(&["flic", "--config", "bad.json", "--out", "x"], t.path());
    assert_eq!(code(&o), 2);
}

fn records(dir: &Path) -> Vec<serde_json::Value> {
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    r["records"].as_array().unwrap().clone()
}

fn record<'a>(rs: &'a [serde_json::Value], op: &str) -> &'a serde_json::Value {
    rs.iter().find(|r| r["op"] == op).unwrap()
}

#[test]
fn analyze_mirrors_fractal_examples() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "pairs.csv", "x0,x1\n0,0\n0.001,0\n10,0\n10,0.0012\n");
    write(t.path(), "cfg.json", r#"{"base_scale": 20.0, "ratio_hint": 0.15, "deltas": []}"#);
    let o = aggmin(&["analyze", "pairs.csv", "--config", "cfg.json", "--out", "p"], t.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rs = records(&t.path().join("p"));
    let layers = &record(&rs, "hierarchy_layers")["residuals"]["report"]["layers"];
    let counts: Vec<u64> = layers.as_array().unwrap().iter().map(|l| l["clusters"].as_u64().unwrap()).collect();
    assert_eq!(counts, vec![2, 4]);

    let line: String = (0..20).map(|i| format!("{i},0\n")).collect();
    write(t.path(), "line.csv", &format!("x,y\n{line}"));
    let o = aggmin(&["analyze", "line.csv", "--out", "l"], t.path());
    assert_eq!(code(&o), 0);
    let rs = records(&t.path().join("l"));
    assert_eq!(record(&rs, "isolated_points")["pass"], true);

    write(t.path(), "outlier.csv", &format!("x,y\n{line}29,0\n"));
    write(t.path(), "gap.json", r#"{"gap_factor": 5.0, "deltas": []}"#);
    let o = aggmin(&["analyze", "outlier.csv", "--config", "gap.json", "--out", "o"], t.path());
    assert_eq!(code(&o), 0);
    let rs = records(&t.path().join("o"));
    assert_eq!(record(&rs, "isolated_points")["residuals"]["indices"], serde_json::json!([20]));
}

#[test]
fn analyze_reads_the_last_snapshot_of_a_trajectory() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "traj.csv", "t,particle,x0,x1\n0,0,5,5\n0,1,6,6\n1,0,0,0\n1,1,1,0\n1,2,0,1\n");
    let o = aggmin(&["analyze", "traj.csv", "--out", "a"], t.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rs = records(&t.path().join("a"));
    assert_eq!(record(&rs, "box_dimension")["params"]["n"], 3);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_aggmin"))
        .args(["cantor", "12", "5", "1", "--out", "c"])
        .current_dir(t.path())
        .env("AGGMIN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
