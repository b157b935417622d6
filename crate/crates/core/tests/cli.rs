use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spatial-nmix")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn patch(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

/// A desk-sized simulated dataset whose run config uses a very short sampler.
fn simulated(dir: &Path, seed: &str) -> String {
    let sim_cfg = dir.join("sim.json");
    fs::write(&sim_cfg, json!({"lattice_side": 6, "n_regions": 3}).to_string()).unwrap();
    let data = dir.join("data");
    ok(&["simulate", "--config", sim_cfg.to_str().unwrap(), "--seed", seed, "--out", data.to_str().unwrap()]);
    let run = data.join("run.json");
    patch(&run, |v| {
        v["sampler"] = json!({"n_iterations": 300, "n_burnin": 150, "thin": 5, "n_chains": 2});
    });
    run.to_str().unwrap().to_string()
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let out = bin(&["fit", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_documents_every_subcommand() {
    let out = bin(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["simulate", "fit", "fit-scenarios", "summarize", "evaluate", "diagnose"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    let out = bin(&["fit-scenarios", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--n-scenarios", "--seed", "--config", "--workers", "--gzip"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn missing_input_file_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulated(dir.path(), "4");
    fs::remove_file(dir.path().join("data/culls.csv")).unwrap();
    let out = bin(&["fit", "--config", &run]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("culls.csv"));
}

#[test]
fn fit_summarize_diagnose_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulated(dir.path(), "4");
    let fit_dir = dir.path().join("fit");
    ok(&["fit", "--config", &run, "--out", fit_dir.to_str().unwrap()]);
    ok(&["summarize", "--run", fit_dir.to_str().unwrap()]);
    let county = fs::read_to_string(fit_dir.join("summary/county_estimates.csv")).unwrap();
    let mut lines = county.lines();
    assert_eq!(lines.next(), Some("region,species,median,lo95,hi95"));
    assert_eq!(lines.count(), 3 * 3);
    ok(&["diagnose", "--run", fit_dir.to_str().unwrap()]);
    let diag = fs::read_to_string(fit_dir.join("diagnostics/diagnostics.csv")).unwrap();
    assert!(diag.starts_with("scenario,name,rhat,ess,degenerate,flagged\n"));
}

#[test]
fn pooled_summary_counts_every_scenario_draw() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulated(dir.path(), "6");
    patch(Path::new(&run), |v| {
        v.as_object_mut().unwrap().remove("kappa");
        v["bands"] = json!({"Around20": {"mean": 20, "sd": 2.55, "lo": 15, "hi": 25}});
        v["sampler"]["store_fields"] = json!(false);
    });
    let out = dir.path().join("scen");
    ok(&[
        "fit-scenarios",
        "--config",
        &run,
        "--n-scenarios",
        "3",
        "--seed",
        "12",
        "--out",
        out.to_str().unwrap(),
        "--gzip",
    ]);
    let single = bin(&["summarize", "--run", out.to_str().unwrap()]);
    assert_eq!(single.status.code(), Some(1));
    ok(&["summarize", "--run", out.to_str().unwrap(), "--pooled"]);
    let totals = fs::read_to_string(out.join("summary/totals.csv")).unwrap();
    assert_eq!(totals.lines().count(), 4);
    assert!(totals.lines().skip(1).all(|l| l.starts_with("pooled,")));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tasks"].as_array().unwrap().len(), 3);
    let gz = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| f["path"].as_str().unwrap().ends_with(".csv.gz"))
        .count();
    assert_eq!(gz, 3 * 2);
}

#[test]
fn repeated_runs_give_identical_summaries() {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let run = simulated(dir.path(), "8");
        let fit_dir = dir.path().join("fit");
        ok(&["fit", "--config", &run, "--out", fit_dir.to_str().unwrap()]);
        ok(&["summarize", "--run", fit_dir.to_str().unwrap()]);
        let files: Vec<Vec<u8>> = ["county_estimates.csv", "totals.csv", "parameters.csv"]
            .iter()
            .map(|f| fs::read(fit_dir.join("summary").join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn study_alias_writes_the_report_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.json");
    fs::write(
        &cfg,
        json!({
            "sim": {"lattice_side": 6, "n_regions": 3, "retention": [100, 50]},
            "n_datasets": 1,
            "seed": 2,
            "sampler": {"n_iterations": 200, "n_burnin": 100, "thin": 5, "n_chains": 2}
        })
        .to_string(),
    )
    .unwrap();
    let out = dir.path().join("study");
    ok(&["study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let rmse = fs::read_to_string(out.join("rmse.csv")).unwrap();
    assert!(rmse.starts_with("dataset,retention,species,rmse\n"));
    assert_eq!(rmse.lines().count(), 1 + 2 * 3);
    for f in ["coverage.csv", "totals.csv", "correlations.csv", "failures.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}
