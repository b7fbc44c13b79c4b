use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use see_core::mse::EquilibriumSet;
use see_core::refine::RefinementReport;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn see(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_see")).args(args).env("SEE_OUTPUT_DIR", out).output().expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn enumerate_toy3_matches_golden_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("toy3.toml");
    let o = see(tmp.path(), &["enumerate", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["equilibria.json", "values.csv"] {
        let got = fs::read_to_string(tmp.path().join(name)).unwrap();
        let want = fs::read_to_string(golden("toy3_enumerate").join(name)).unwrap();
        assert_eq!(got, want, "{name}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    for (cfg, cmds) in [
        ("toy3.toml", &["solve", "enumerate", "refine", "hierarchy", "simulate"][..]),
        ("table.toml", &["solve", "enumerate", "refine", "hierarchy", "simulate"][..]),
        ("hc.toml", &["hc", "refine", "simulate"][..]),
    ] {
        for cmd in cmds {
            let a = tempfile::tempdir().unwrap();
            let b = tempfile::tempdir().unwrap();
            let path = config(cfg);
            let args = [*cmd, path.to_str().unwrap()];
            assert!(see(a.path(), &args).status.success(), "{cfg} {cmd}");
            assert!(see(b.path(), &args).status.success(), "{cfg} {cmd}");
            let (fa, fb) = (files(a.path()), files(b.path()));
            assert!(!fa.is_empty());
            assert_eq!(fa, fb, "{cfg} {cmd}");
        }
    }
}

#[test]
fn missing_discount_fails_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\nkind = \"toy3\"\n");
    let o = see(&tmp.path().join("out"), &["enumerate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("model.discount"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn parse_error_cites_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\nkind = \"toy3\"\ndiscount = 0.5\nbogus = 1\n");
    let o = see(tmp.path(), &["solve", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("line 4") && msg.contains("bogus"), "{msg}");
}

#[test]
fn nonpositive_tolerance_flag_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("toy3.toml");
    let o = see(tmp.path(), &["solve", cfg.to_str().unwrap(), "--tol", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.tol"));
}

#[test]
fn budget_violation_is_a_machine_readable_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("table.toml");
    let o = see(tmp.path(), &["enumerate", cfg.to_str().unwrap(), "--budget", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "budget_exceeded");
}

#[test]
fn refine_with_every_state_viable_keeps_every_equilibrium() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("table.toml");
    let o = see(tmp.path(), &["refine", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(tmp.path().join("report.json")).unwrap();
    let report: RefinementReport = serde_json::from_str(&text).unwrap();
    assert!(!report.equilibria.is_empty());
    assert_eq!(report.viable, report.equilibria);
}

#[test]
fn seed_flag_is_recorded_in_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("table.toml");
    let o = see(tmp.path(), &["simulate", cfg.to_str().unwrap(), "--seed", "4242", "--horizon", "5"]);
    assert!(o.status.success());
    for (name, bytes) in files(tmp.path()) {
        let text = String::from_utf8(bytes).unwrap();
        if name.ends_with(".json") {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["seed"], 4242, "{name}");
        } else {
            let mut lines = text.lines();
            assert!(lines.next().unwrap().starts_with("seed,"));
            assert_eq!(lines.clone().count(), 5);
            assert!(lines.all(|l| l.starts_with("4242,")), "{name}");
        }
    }
}

#[test]
fn reports_round_trip_at_printed_precision() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("toy3.toml");
    assert!(see(tmp.path(), &["refine", cfg.to_str().unwrap()]).status.success());
    assert!(see(tmp.path(), &["enumerate", cfg.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(tmp.path().join("report.json")).unwrap();
    let report: RefinementReport = serde_json::from_str(&text).unwrap();
    let again: RefinementReport = serde_json::from_str(&see_core::io::to_json(&report).unwrap()).unwrap();
    assert_eq!(report, again);
    let text = fs::read_to_string(tmp.path().join("equilibria.json")).unwrap();
    let set: EquilibriumSet = serde_json::from_str(&text).unwrap();
    assert_eq!(set.len(), 1);
    assert!(set.members[0].report.max_gain <= 1e-8);
}

#[test]
fn every_subcommand_has_help() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["solve", "enumerate", "refine", "hc", "hierarchy", "simulate"] {
        let o = see(tmp.path(), &[cmd, "--help"]);
        assert!(o.status.success(), "{cmd}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"), "{cmd}");
    }
    let o = see(tmp.path(), &["refine", "--help"]);
    let help = String::from_utf8_lossy(&o.stdout);
    for flag in ["--seed", "--tol", "--budget", "--penalty", "--find-threshold", "--selection-state", "--rp-quantifier"] {
        assert!(help.contains(flag), "{flag}");
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = see(tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn quantifier_flag_reaches_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("toy3.toml");
    let o = see(tmp.path(), &["refine", cfg.to_str().unwrap(), "--rp-quantifier", "all-states", "--selection-state", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: RefinementReport =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.quantifier, see_core::refine::RpQuantifier::AllStates);
    assert_eq!(report.selection_state, 1);
}
