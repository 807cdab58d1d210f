use std::path::Path;
use std::process::{Command, Output};

use curvkit_cli::{Command as Cmd, Dim, InputSource, RunConfig, Suite};
use serde_json::Value;

fn curvkit(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_curvkit"));
    cmd.args(args).env_remove("CURVKIT_SEED");
    if let Some(s) = seed_env {
        cmd.env("CURVKIT_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn hypercube_vertices_report_two_thirds() {
    let out = curvkit(&["curv-vertex", "--gen", "hypercube:3", "--n", "inf"], None);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], "curvkit-report/1");
    let vertices = r["results"]["vertices"].as_array().unwrap();
    assert_eq!(vertices.len(), 8);
    for v in vertices {
        assert!((v["k"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-8);
    }
    assert_eq!(r["chain_stats"]["size"], 8);
}

#[test]
fn verify_holds_on_the_square() {
    let out = curvkit(&["verify", "--gen", "hypercube:2", "--suite", "all", "--seed", "1"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    let reports = r["results"]["reports"].as_array().unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|x| x["verdict"] != "violated"));
    assert!(reports.iter().all(|x| x["preconditions"].is_array()));
    assert_eq!(r["results"]["violated"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_suites_partition_the_reports() {
    let names = |suite: &str| -> Vec<String> {
        let out = curvkit(&["verify", "--gen", "cycle:6", "--suite", suite, "--trials", "20", "--starts", "4"], None);
        assert_eq!(out.status.code(), Some(0));
        report(&out)["results"]["reports"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x["name"].as_str().unwrap().to_string())
            .collect()
    };
    let all = names("all");
    let mut parts: Vec<String> = ["heat", "spectral", "diameter"].iter().flat_map(|s| names(s)).collect();
    let mut all_sorted = all.clone();
    all_sorted.sort();
    parts.sort();
    assert_eq!(parts, all_sorted);
    assert!(names("diameter").iter().all(|n| n.contains("diameter")));
}

#[test]
fn false_curvature_bound_is_an_exact_violation() {
    let out = curvkit(
        &[
            "verify",
            "--gen",
            "hypercube:2",
            "--suite",
            "heat",
            "--mean",
            "arithmetic",
            "--assume-k",
            "5",
            "--trials",
            "30",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(4));
    let r = report(&out);
    assert_eq!(r["results"]["exact_violation"], true);
}

#[test]
fn zeros_on_an_open_mean_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let chain = write(dir.path(), "chain.json", r#"{"states":["a","b","c"],"Q":[[0,1,0],[0.5,0,0.5],[0,1,0]]}"#);
    let out = curvkit(&["curv-measure", "--in", &chain, "--mean", "logarithmic", "--rho", "[1, 0, 1]"], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("domain"), "{err}");
    // the same measure is fine for the arithmetic mean
    let ok = curvkit(&["curv-measure", "--in", &chain, "--rho", "[1, 0, 1]"], None);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn invalid_inputs_exit_with_two() {
    assert_eq!(curvkit(&["curv-vertex", "--gen", "hypercube:x"], None).status.code(), Some(2));
    assert_eq!(curvkit(&["curv-vertex", "--gen", "cycle:5", "--n", "-1"], None).status.code(), Some(2));
    assert_eq!(curvkit(&["no-such-command"], None).status.code(), Some(2));
    assert_eq!(curvkit(&["curv-vertex"], None).status.code(), Some(2));
    assert_eq!(curvkit(&["curv-vertex", "--in", "/nonexistent/chain.json"], None).status.code(), Some(2));
    assert_eq!(curvkit(&["spectrum", "--gen", "cycle:5"], Some("abc")).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"states":["a","b"],"Q":[[0,0.9],[1,0]]}"#);
    let out = curvkit(&["curv-vertex", "--in", &bad], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stochastic"));
    assert_eq!(curvkit(&["--help"], None).status.code(), Some(0));
}

#[test]
fn edge_list_input() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = write(dir.path(), "square.tsv", "# a 4-cycle\n00\t01\n01\t11\n11\t10\n10\t00\n");
    let out = curvkit(&["curv-vertex", "--in", &tsv], None);
    assert_eq!(out.status.code(), Some(0));
    assert!((report(&out)["results"]["min"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn reports_are_deterministic_and_seed_env_wins() {
    let args = ["curv-entropic", "--gen", "cycle:5", "--starts", "6", "--seed", "3"];
    let a = curvkit(&[&args[..], &["--jobs", "1"]].concat(), None);
    let b = curvkit(&[&args[..], &["--jobs", "4"]].concat(), None);
    assert_eq!(a.status.code(), Some(0));
    // the config echoes --jobs nowhere, so the reports must match byte for byte
    assert_eq!(a.stdout, b.stdout);
    let c = curvkit(&args, Some("9"));
    assert_eq!(report(&c)["config"]["seed"], 9);
    assert_eq!(report(&a)["config"]["seed"], 3);
}

#[test]
fn gen_round_trips_through_a_chain_file() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("c.json");
    let out = curvkit(&["gen", "--gen", "random-regular:3:8:4", "--chain-out", chain.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let generated = report(&out)["results"]["chain"].clone();
    let back = curvkit(&["spectrum", "--in", chain.to_str().unwrap()], None);
    assert_eq!(back.status.code(), Some(0));
    assert_eq!(report(&back)["chain_stats"]["size"], 8);
    assert_eq!(generated["states"].as_array().unwrap().len(), 8);
}

#[test]
fn profile_csv_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let out_path = dir.path().join("r.json");
    let out = curvkit(
        &[
            "curv-measure",
            "--gen",
            "cycle:6",
            "--rho",
            "dirac:0",
            "--n-grid",
            "1,2,inf",
            "--csv",
            csv.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,s,k");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("inf,0,"), "{text}");
    assert!(lines[3].starts_with("1,1,"), "{text}");
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["results"]["profile"]["points"].as_array().unwrap().len(), 3);
}

#[test]
fn remaining_commands_run() {
    let cases: [(&[&str], &str); 5] = [
        (&["optimal-sets", "--gen", "cycle:7"], "facets"),
        (&["heat", "--gen", "path:4", "--t", "0.5,1"], "kernels"),
        (&["mixing", "--gen", "hypercube:3"], "mixing_time"),
        (&["dgamma", "--gen", "hypercube:1", "--x", "0", "--y", "1"], "value"),
        (&["cheeger", "--gen", "complete:4"], "upper"),
    ];
    for (args, key) in cases {
        let out = curvkit(args, None);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!report(&out)["results"][key].is_null(), "{args:?}");
    }
    let d = report(&curvkit(&["dgamma", "--gen", "hypercube:1", "--x", "0", "--y", "1"], None));
    assert!((d["results"]["value"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-8);
    let facets = report(&curvkit(&["optimal-sets", "--gen", "cycle:7"], None))["results"]["facets"].clone();
    assert_eq!(facets.as_array().unwrap().len(), 7);
    assert_eq!(facets[0], serde_json::json!(["0", "1", "2"]));
}

#[test]
fn run_config_round_trips_through_json() {
    let mut cfg = RunConfig::new(Cmd::CurvMeasure, InputSource::Generator { spec: "cycle:5".into() });
    cfg.n = Dim(2.5);
    cfg.rho = Some("dirac:1".into());
    cfg.profile = Some(vec![Dim(1.0), Dim(f64::INFINITY)]);
    cfg.suite = Suite::Spectral;
    cfg.pair = Some(("0".into(), "2".into()));
    let back = RunConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    let inf = RunConfig::new(Cmd::Verify, InputSource::File { path: "x.json".into() });
    assert!(inf.to_json().contains("\"inf\""));
    assert_eq!(RunConfig::from_json(&inf.to_json()).unwrap(), inf);
    assert!(RunConfig::from_json(r#"{"command":"verify"}"#).is_err());
    let minimal = RunConfig::from_json(
        r#"{"command":"spectrum","input":{"kind":"generator","spec":"cycle:5"},"mean":"arithmetic","n":"inf","seed":0}"#,
    )
    .unwrap();
    assert_eq!(minimal.tolerances, curvkit_cli::Tolerances::default());
}

#[test]
fn run_returns_exit_codes_in_process() {
    assert_eq!(curvkit_cli::run(["curvkit", "gen", "--gen", "path:3", "--out", "/nonexistent/dir/r.json"]), 2);
    let e = curvkit_cli::CliError::Curv(curvkit::CurvError::NumericalFailure("x".into()));
    assert_eq!(e.exit_code(), 3);
}
