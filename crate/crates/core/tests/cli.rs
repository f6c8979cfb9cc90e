use std::path::Path;
use std::process::Command;

use loo_gp::cli::{run, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("loo-gp").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn simulate_then_fit_writes_versioned_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.csv");
    let (code, _, err) = call(&["simulate", "--n", "30", "--rho", "0.3,0.5", "--noise", "0.01", "--seed", "3", "--out", &data]);
    assert_eq!(code, EXIT_OK, "{err}");
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("x1,x2,z\n"));
    assert_eq!(text.lines().count(), 31);
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(format!("{data}.json")).unwrap()).unwrap();
    assert_eq!(sidecar["schema_version"], 1);
    assert_eq!(sidecar["command"][1], "simulate");

    let fit = p(dir.path(), "fit.json");
    let (code, _, err) = call(&["fit", "--data", &data, "--criterion", "crps", "--kernel", "se", "--seed", "1", "--noise", "0.01", "--out", &fit]);
    assert_eq!(code, EXIT_OK, "{err}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["fit"]["criterion"], "crps");
    assert_eq!(doc["fit"]["params"]["length_scales"].as_array().unwrap().len(), 2);
}

#[test]
fn fit_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.csv");
    assert_eq!(call(&["simulate", "--n", "20", "--rho", "0.4", "--noise", "0.05", "--seed", "9", "--out", &data]).0, EXIT_OK);
    let args = ["fit", "--data", data.as_str(), "--criterion", "mle", "--noise", "0.05", "--seed", "4"];
    let (c1, o1, _) = call(&args);
    let (c2, o2, _) = call(&args);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    assert_eq!(o1, o2);
}

#[test]
fn missing_data_is_a_usage_error() {
    let (code, _, err) = call(&["fit", "--criterion", "crps"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--data") && err.contains("Usage"), "{err}");
}

#[test]
fn unknown_flag_and_bad_values_are_usage_errors() {
    assert_eq!(call(&["design", "--n", "5", "--d", "1", "--out", "x.csv", "--bogus"]).0, EXIT_USAGE);
    assert_eq!(call(&["fit", "--data", "d.csv", "--criterion", "nope"]).0, EXIT_USAGE);
    assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(call(&["fit", "--data", "/nonexistent/d.csv"]).0, EXIT_USAGE);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("scatter") && out.contains("bench"));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "dup.csv");
    std::fs::write(&data, "x1,z\n0.5,1.0\n0.5,1.0\n0.5,1.0\n0.2,0.0\n").unwrap();
    let (code, _, err) = call(&["fit", "--data", &data, "--criterion", "crps", "--starts", "2"]);
    assert_eq!(code, EXIT_NUMERICAL, "{err}");
}

#[test]
fn design_is_stratified_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = p(dir.path(), "a.csv");
    let b = p(dir.path(), "b.csv");
    assert_eq!(call(&["design", "--n", "4", "--d", "1", "--seed", "2", "--out", &a]).0, EXIT_OK);
    assert_eq!(call(&["design", "--n", "4", "--d", "1", "--seed", "2", "--out", &b]).0, EXIT_OK);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut strata: Vec<usize> = text.lines().skip(1).map(|l| (l.parse::<f64>().unwrap() * 4.0) as usize).collect();
    strata.sort();
    assert_eq!(strata, vec![0, 1, 2, 3]);
}

#[test]
fn scatter_writes_one_row_per_replication_and_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "s.csv");
    let args = [
        "scatter", "--n", "12", "--d", "2", "--rho", "0.3,0.5", "--var", "1.0", "--reps", "3", "--criteria", "crps,mle", "--seed", "7",
        "--starts", "2", "--out", out.as_str(),
    ];
    let (code, stdout, err) = call(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(stdout.contains("crps") && stdout.contains("mle"));
    let first = std::fs::read_to_string(&out).unwrap();
    let mut rdr = csv::Reader::from_reader(first.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header[..5], ["replication", "criterion", "process_variance", "rho_1", "rho_2"]);
    assert_eq!(rdr.records().count(), 6);

    // Rerunning the command recorded in the sidecar reproduces the table apart from timings.
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(format!("{out}.json")).unwrap()).unwrap();
    let recorded: Vec<String> = sidecar["command"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_owned()).collect();
    assert_eq!(run(recorded, &mut Vec::new(), &mut Vec::new()), EXIT_OK);
    let strip = |t: &str| -> Vec<Vec<String>> {
        let wall = header.iter().position(|h| h == "wall_time_s").unwrap();
        csv::Reader::from_reader(t.as_bytes())
            .records()
            .map(|r| r.unwrap().iter().enumerate().filter(|(i, _)| *i != wall).map(|(_, f)| f.to_owned()).collect())
            .collect()
    };
    assert_eq!(strip(&first), strip(&std::fs::read_to_string(&out).unwrap()));
}

#[test]
fn scatter_rejects_invalid_specs() {
    assert_eq!(call(&["scatter", "--n", "5", "--d", "1", "--rho", "0.3", "--out", "s.csv"]).0, EXIT_USAGE);
    assert_eq!(call(&["scatter", "--n", "20", "--d", "2", "--rho", "0.3", "--out", "s.csv"]).0, EXIT_USAGE);
}

#[test]
fn bench_reports_both_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "b.csv");
    let (code, stdout, err) = call(&["bench", "--n", "40", "--q", "2,4", "--reps", "2", "--out", &out]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(stdout.contains("adjoint") && stdout.contains("naive") && stdout.contains("relative difference"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_loo-gp");
    assert_eq!(Command::new(bin).arg("fit").output().unwrap().status.code(), Some(EXIT_USAGE));
    assert_eq!(Command::new(bin).arg("--version").output().unwrap().status.code(), Some(EXIT_OK));
}
