use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracdim_core::cli::{EXIT_BUDGET, EXIT_GUARD, EXIT_PARSE};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fracdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracdim")).args(args).output().expect("run fracdim")
}

fn run(kind: &str, config: &Path, out: &Path) -> Output {
    fracdim(&[kind, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn error_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

#[test]
fn dims_on_uniform_cantor() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("dims", &configs().join("cantor_dims.toml"), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(report.contains("s = 0.63093"));
    assert!(report.contains("predicted dim = 0.63093"));
    assert!(report.contains("[projection] predicted = 0.630930"));
    let dims = fs::read_to_string(tmp.path().join("dims.csv")).unwrap();
    assert!(dims.starts_with("quantity,value\n"));
}

#[test]
fn separation_finding_is_not_a_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("separation", &configs().join("overlap_separation.toml"), tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let report = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(report.contains("exact overlap at level 2"), "{report}");
    let csv = fs::read_to_string(tmp.path().join("separation.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("level,min_gap,min_gap_exact,witness_a,witness_b"));
    assert_eq!(lines.nth(1), Some("2,0,0,\"(0,2)\",\"(1,0)\""));
}

#[test]
fn malformed_rational_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("dims", &configs().join("bad_rational.toml"), tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_PARSE));
    let rec = error_record(&out);
    assert_eq!(rec["kind"], "parse");
    assert_eq!(rec["line"], 3);
    assert!(!tmp.path().join("report.txt").exists());
}

#[test]
fn unknown_keys_and_missing_seed_are_parse_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[ifs]\nmaps = [[\"1/3\", \"0\"]]\nratio = 2\n");
    let out = run("separation", &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_PARSE));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("ratio"));

    let cfg = write_config(tmp.path(), "[ifs]\nmaps = [[\"1/3\", \"0\"], [\"1/3\", \"2/3\"]]\n[measure]\nbernoulli = [0.5, 0.5]\n");
    let out = run("sample", &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_PARSE));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("seed"));
}

#[test]
fn budget_error_has_its_own_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "budget = 100\n[ifs]\nmaps = [[\"1/3\", \"0\"], [\"1/3\", \"2/3\"]]\n[separation]\nmax_level = 10\n",
    );
    let out = run("separation", &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_BUDGET));
    let rec = error_record(&out);
    assert_eq!(rec["kind"], "budget");
    assert_eq!(rec["budget"], "100");
}

#[test]
fn guard_violation_has_its_own_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed = 1\n[ifs]\nmaps = [[\"1/3\", \"0\"], [\"1/3\", \"2/3\"]]\n[measure]\nbernoulli = [0.5, 0.5]\n\
         [sampling]\ndepth = 5\ncount = 20000\n",
    );
    let out = run("estimate", &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_GUARD));
    let rec = error_record(&out);
    assert_eq!(rec["kind"], "guard");
    assert!(rec["required_depth"].as_u64().unwrap() > 5);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = run("sample", &configs().join("cantor_sample.toml"), &a);
    assert!(out.status.success());
    let resolved = a.join("resolved_config.toml");
    let text = fs::read_to_string(&resolved).unwrap();
    assert!(text.contains("seed = 1") && text.contains("budget = "));
    let report = fs::read_to_string(a.join("report.txt")).unwrap();
    assert!(report.contains(&text), "report embeds the resolved config");

    let out = run("sample", &resolved, &b);
    assert!(out.status.success());
    for name in ["samples.csv", "resolved_config.toml", "report.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn estimate_tables_have_documented_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed = 9\n[ifs]\nmaps = [[\"1/3\", \"0\"], [\"1/3\", \"2/3\"]]\n[measure]\nbernoulli = [0.5, 0.5]\n\
         [sampling]\ncount = 20000\n[estimate]\nmethods = [\"coarse-entropy\", \"local-dimension\"]\n",
    );
    let out = run("estimate", &cfg, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = fs::read_to_string(tmp.path().join("estimates.csv")).unwrap();
    let mut rows = est.lines();
    assert_eq!(
        rows.next(),
        Some("target,method,estimate,standard_error,finest,coarsest,iqr,dropped_centers,samples_used")
    );
    let first: Vec<&str> = rows.next().unwrap().split(',').collect();
    assert_eq!(first[1], "coarse-entropy");
    let value: f64 = first[2].parse().unwrap();
    assert!((value - 0.6309).abs() < 0.05, "{value}");
    let scales = fs::read_to_string(tmp.path().join("scales.csv")).unwrap();
    assert!(scales.starts_with("target,method,scale,value,count\n"));
    assert_eq!(scales.lines().count(), 1 + 2 * 7);
}

#[test]
fn help_documents_csv_schemas() {
    let out = fracdim(&["--help"]);
    assert!(out.status.success());
    let help = String::from_utf8_lossy(&out.stdout);
    for header in [
        "level,min_gap,min_gap_exact,witness_a,witness_b",
        "q,tau,lq_dim,residual,norm_q,norm_inf,dropped",
        "target,method,scale,value,count",
    ] {
        assert!(help.contains(header), "missing {header}");
    }
    for sub in ["separation", "dims", "tau", "coarse", "sample", "estimate", "convolve", "project", "affine"] {
        assert!(help.contains(sub), "missing subcommand {sub}");
    }
}
