use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqtrial_service::cli::CliError;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqtrial"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_design(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(example("standard.json")).unwrap()).unwrap();
    edit(&mut v);
    let p = dir.join("design.json");
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

#[test]
fn simulate_region_a_writes_consistent_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let design = example("standard.json");
    let o = run(&[
        "simulate", "--design", design.to_str().unwrap(), "--region", "a", "--reps", "2000", "--seed", "42",
        "--out", out.to_str().unwrap(), "--no-early-stop",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("a_report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    let f = &report["report"]["decision_fractions"];
    let sum = f["efficacy"].as_f64().unwrap() + f["futility"].as_f64().unwrap() + f["inconclusive"].as_f64().unwrap();
    assert!((sum - 1.0).abs() < 1e-12);
    assert!(f["efficacy"].as_f64().unwrap() > 0.8);

    let subcdf = fs::read_to_string(out.join("a_subcdf.csv")).unwrap();
    assert_eq!(subcdf.lines().next().unwrap(), "time,p_stop_efficacy,p_stop_futility,p_stop_inconclusive");
    assert_eq!(subcdf.lines().count(), 501);
    let scatter = fs::read_to_string(out.join("a_scatter.csv")).unwrap();
    assert_eq!(scatter.lines().next().unwrap(), "tau,utility,decision");
    assert_eq!(scatter.lines().count(), 2001);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let design = write_design(dir.path(), |v| {
        v["design"]["n_max"] = 80.into();
        v["design"]["horizon"] = 80.into();
        v["design"]["forward_reps"] = 40.into();
    });
    let mut outputs = Vec::new();
    for (k, workers) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = run(&[
            "--workers", workers, "simulate", "--design", design.to_str().unwrap(), "--region", "all", "--reps", "60",
            "--seed", "5", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(out);
    }
    for label in ["a", "b", "c"] {
        for suffix in ["report.json", "subcdf.csv", "scatter.csv"] {
            let name = format!("{label}_{suffix}");
            assert_eq!(
                fs::read(outputs[0].join(&name)).unwrap(),
                fs::read(outputs[1].join(&name)).unwrap(),
                "{name} differs"
            );
        }
    }
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let design = example("standard.json");
    let o = run(&["simulate", "--design", design.to_str().unwrap(), "--region", "a", "--reps", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write_design(dir.path(), |v| v["design"]["eps_e"] = 2.0.into());
    let o = run(&["fdp", "--design", bad.to_str().unwrap(), "--reps", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line ") && err.contains("design.eps_e"), "{err}");

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\n  \"schema_version\": 1,\n  \"design\": [\n").unwrap();
    let o = run(&["fdp", "--design", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line "));

    let o = run(&["simulate", "--design", design.to_str().unwrap(), "--region", "z"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failures_map_to_exit_3() {
    let e: CliError = seqtrial_core::Error::Convergence { partial_sum: 0.0, terms: 1 }.into();
    assert_eq!(e.exit_code(), 3);
    let e: CliError = seqtrial_core::Error::Config("x".into()).into();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn fdp_reports_both_variants() {
    let dir = tempfile::tempdir().unwrap();
    let design = write_design(dir.path(), |v| {
        v["design"]["n_max"] = 100.into();
        v["design"]["horizon"] = 100.into();
    });
    let o = run(&["fdp", "--design", design.to_str().unwrap(), "--reps", "600", "--seed", "1"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let value = |prefix: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("{prefix} in {text}"));
        line[prefix.len()..].split_whitespace().next().unwrap().parse().unwrap()
    };
    assert!(value("FDP strict (θ1 - θ0 <= 0): ") <= value("FDP: "));
    assert!(value("FFP margin (θ1 - θ0 >= delta): ") <= value("FFP: "));

    let none = write_design(dir.path(), |v| {
        v["design"]["n_max"] = 40.into();
        v["design"]["horizon"] = 40.into();
        v["design"]["eps_e"] = 0.0.into();
    });
    let o = run(&["fdp", "--design", none.to_str().unwrap(), "--reps", "50"]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("FDP: undefined"));
}

#[test]
fn whatif_fresh_is_positive() {
    let design = example("standard.json");
    let o = run(&["whatif", "--design", design.to_str().unwrap(), "--seed", "4", "--reps", "200"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert_eq!(v["verdict"], "continue");
    let again = run(&["whatif", "--design", design.to_str().unwrap(), "--seed", "4", "--reps", "200"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn example_designs_validate() {
    for name in ["standard.json", "monitoring.json"] {
        seqtrial_service::cli::load_design(&example(name)).unwrap();
    }
}
