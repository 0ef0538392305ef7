use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pharmonic"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    bin().arg("--config").arg(config).arg("--out").arg(out).args(args).output().unwrap()
}

fn with_config(text: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, text).unwrap();
    (dir, path)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SQUARE: &str = r#"
[grid]
extent = { x_min = -1.0, x_max = 1.0, y_min = -1.0, y_max = 1.0 }
nx = 33
ny = 33
"#;

#[test]
fn harmonic_solve_writes_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&repo_config("harmonic.toml"), out.path(), &["solve"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["solution.csv", "solution.json", "solve_report.json"] {
        assert!(out.path().join(f).is_file(), "{f}");
    }
    assert_eq!(json(&out.path().join("solve_report.json"))["converged"], true);
    let csv = fs::read_to_string(out.path().join("solution.csv")).unwrap();
    assert!(csv.starts_with("# ") && csv.lines().nth(1) == Some("x,y,u1,u2"));
}

#[test]
fn invalid_exponent_is_a_usage_error() {
    let (_d, cfg) = with_config(&format!(
        "p = 0.5\n{SQUARE}\n[boundary]\nfamily = \"polynomial\"\nu1 = [[1, 0, 1.0]]\nu2 = [[0, 1, 1.0]]\n"
    ));
    let out = tempfile::tempdir().unwrap();
    let o = run(&cfg, out.path(), &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`p`"));
}

#[test]
fn missing_boundary_csv_is_a_usage_error() {
    let (_d, cfg) = with_config(&format!("p = 2.0\n{SQUARE}\n[boundary]\nfamily = \"csv\"\npath = \"absent.csv\"\n"));
    let out = tempfile::tempdir().unwrap();
    let o = run(&cfg, out.path(), &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("boundary.path"));
}

#[test]
fn solution_csv_round_trips_as_boundary_data() {
    let out = tempfile::tempdir().unwrap();
    let text = format!("p = 3.0\n{SQUARE}\n[boundary]\nfamily = \"random\"\ndegree = 2\n");
    let (_d, cfg) = with_config(&text);
    assert!(run(&cfg, out.path(), &["solve"]).status.success());
    let again = tempfile::tempdir().unwrap();
    let csv = out.path().join("solution.csv");
    let (_e, cfg2) = with_config(&format!(
        "p = 3.0\n{SQUARE}\n[boundary]\nfamily = \"csv\"\npath = {:?}\n",
        csv.to_str().unwrap()
    ));
    let o = run(&cfg2, again.path(), &["solve"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(csv).unwrap(), fs::read(again.path().join("solution.csv")).unwrap());
}

#[test]
fn unknown_keys_are_rejected() {
    let (_d, cfg) = with_config(&format!(
        "p = 2.0\nresolution = 3\n{SQUARE}\n[boundary]\nfamily = \"polynomial\"\nu1 = []\nu2 = []\n"
    ));
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&cfg, out.path(), &["solve"]).status.code(), Some(2));
}

#[test]
fn radial_artifact_has_closed_level_curves() {
    let out = tempfile::tempdir().unwrap();
    let cfg = repo_config("generic_annulus.toml");
    assert!(run(&cfg, out.path(), &["solve"]).status.success());
    let o = run(&cfg, &out.path().join("a"), &["analyze", "--input", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(out.path().join("a/levels.svg")).unwrap();
    assert!(svg.matches("Z\"/>").count() >= 8, "{svg}");
    let lf = fs::read_to_string(out.path().join("a/length_function.csv")).unwrap();
    let mut rows = lf.lines().filter(|l| !l.starts_with('#'));
    let head: Vec<&str> = rows.next().unwrap().split(',').collect();
    let (l, d1, d1fd) = (head.iter().position(|&h| h == "L").unwrap(), 2, 3);
    assert_eq!(head[d1], "dL_line");
    assert_eq!(head[d1fd], "dL_fd");
    let mut n = 0;
    for row in rows {
        let v: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(v[l] > 0.0);
        assert!((v[d1] - v[d1fd]).abs() <= 0.05 * v[d1].abs().max(1.0), "{row}");
        n += 1;
    }
    assert_eq!(n, 8);
    for f in ["curvature.csv", "curvature.json", "levels.csv", "quasiregularity.json", "coefficient_bound.json"] {
        assert!(out.path().join("a").join(f).is_file(), "{f}");
    }
}

#[test]
fn affine_map_has_zero_curvature() {
    let (_d, cfg) = with_config(&format!(
        "p = 3.0\nsolve = false\n{SQUARE}\n[boundary]\nfamily = \"polynomial\"\nu1 = [[1, 0, 1.0], [0, 1, 2.0]]\nu2 = [[1, 0, -1.0]]\n"
    ));
    let out = tempfile::tempdir().unwrap();
    assert!(run(&cfg, out.path(), &["analyze"]).status.success());
    let text = fs::read_to_string(out.path().join("curvature.csv")).unwrap();
    let mut rows = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut seen = 0;
    for rec in rows.records() {
        for cell in rec.unwrap().iter().skip(2).filter(|c| !c.is_empty()) {
            assert_eq!(cell.parse::<f64>().unwrap(), 0.0);
            seen += 1;
        }
    }
    assert!(seen > 1000);
}

#[test]
fn singular_nodes_are_reported_as_masked_regions() {
    let (_d, cfg) = with_config(&format!(
        "p = 2.0\nsolve = false\n{SQUARE}\n[boundary]\nfamily = \"polynomial\"\nu1 = [[2, 0, 1.0], [0, 2, -1.0]]\nu2 = [[1, 1, 2.0]]\n"
    ));
    let out = tempfile::tempdir().unwrap();
    let o = run(&cfg, out.path(), &["analyze"]);
    assert_eq!(o.status.code(), Some(0));
    let a = json(&out.path().join("analysis.json"));
    assert_eq!(a["singular_nodes"][0], 1);
    let regions = a["masked_regions"].as_array().unwrap();
    assert_eq!(regions.len(), 1);
    assert_eq!(regions[0]["lower_left"], serde_json::json!([0.0, 0.0]));
}

#[test]
fn full_suite_on_harmonic_run_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&repo_config("harmonic.toml"), out.path(), &["check"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let checks = json(&out.path().join("checks.json"));
    assert_eq!(checks.as_array().unwrap().len(), 5);
    assert!(checks.as_array().unwrap().iter().all(|c| c["verdict"] == "holds"));
}

#[test]
fn counterexample_check_fails_with_witness() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&repo_config("counterexample.toml"), out.path(), &["check"]);
    assert_eq!(o.status.code(), Some(1));
    let checks = json(&out.path().join("checks.json"));
    let c = &checks[0];
    assert_eq!(c["verdict"], "violated");
    assert!(c["witness"]["values"]["det_hessian_u1"].as_f64().unwrap() > 0.0);
    assert!(c["witness"]["values"]["det_hessian_u2"].as_f64().unwrap() > 0.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("witness"));
}

#[test]
fn whitelisted_violation_exits_zero() {
    let text = fs::read_to_string(repo_config("counterexample.toml")).unwrap();
    let (_d, cfg) = with_config(&format!("{text}allow_violated = [\"hessian-sign\"]\n"));
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&cfg, out.path(), &["check"]).status.code(), Some(0));
}

#[test]
fn empty_check_list() {
    let (_d, cfg) = with_config(&format!(
        "p = 2.0\n{SQUARE}\n[boundary]\nfamily = \"polynomial\"\nu1 = [[1, 0, 1.0]]\nu2 = [[0, 1, 1.0]]\n"
    ));
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&cfg, out.path(), &["check"]).status.code(), Some(0));
    assert_eq!(fs::read_to_string(out.path().join("checks.json")).unwrap().trim(), "[]");
}

#[test]
fn ball_is_required_for_local_checks() {
    let (_d, cfg) = with_config(&format!(
        "p = 2.0\n{SQUARE}\n[boundary]\nfamily = \"polynomial\"\nu1 = [[1, 0, 1.0]]\nu2 = [[0, 1, 1.0]]\n[check]\nrun = [\"length-bound\"]\n"
    ));
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&cfg, out.path(), &["check"]).status.code(), Some(2));
}

fn radial(out: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(out).arg("radial").args(args).output().unwrap()
}

#[test]
fn radial_modes() {
    let out = tempfile::tempdir().unwrap();
    assert!(radial(out.path(), &["--mode", "admissible-interval", "--p", "12"]).status.success());
    let iv = json(&out.path().join("admissible_interval.json"));
    assert!((iv["c_high"].as_f64().unwrap() - 1.0291).abs() < 1e-4);

    assert!(radial(out.path(), &["--mode", "counterexample", "--p", "12", "--c", "1.01"]).status.success());
    let v = &json(&out.path().join("counterexample.json"))["verdict"];
    let tol = v["tolerance"].as_f64().unwrap();
    assert!(v["min_det_u1"].as_f64().unwrap() >= -tol);
    assert!(v["min_det_u2"].as_f64().unwrap() >= -tol);

    assert_eq!(radial(out.path(), &["--mode", "counterexample", "--p", "8"]).status.code(), Some(2));
    assert_eq!(radial(out.path(), &["--mode", "counterexample", "--p", "8", "--c", "1.01"]).status.code(), Some(2));

    assert!(radial(out.path(), &["--mode", "profile", "--p", "3"]).status.success());
    let prof = fs::read_to_string(out.path().join("radial_profile.csv")).unwrap();
    assert!(prof.starts_with("# ") && prof.lines().count() > 100);
}

#[test]
fn report_concatenates_summaries() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(bin().arg("--out").arg(out.path()).arg("report").output().unwrap().status.code(), Some(2));
    assert!(radial(out.path(), &["--mode", "admissible-interval", "--p", "12"]).status.success());
    let o = bin().arg("--out").arg(out.path()).arg("report").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("== admissible_interval.json =="));
    assert!(out.path().join("report.txt").is_file());
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
    let out = tempfile::tempdir().unwrap();
    let cfg = repo_config("harmonic.toml");
    let o = bin().arg("--config").arg(&cfg).arg("--out").arg(out.path()).args(["--threads", "0", "solve"]).output();
    assert_eq!(o.unwrap().status.code(), Some(2));
    let o = bin().arg("--config").arg(&cfg).args(["--tolerance-scale", "-1", "solve"]).output();
    assert_eq!(o.unwrap().status.code(), Some(2));
}

#[test]
fn unconverged_solve_is_a_numerical_failure() {
    let (_d, cfg) = with_config(&format!(
        "p = 3.0\n{SQUARE}\n[boundary]\nfamily = \"polynomial\"\nu1 = [[2, 0, 1.0]]\nu2 = [[0, 1, 1.0]]\n[solver]\nmax_iters = 1\n"
    ));
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&cfg, out.path(), &["solve"]).status.code(), Some(3));
    assert_eq!(json(&out.path().join("solve_report.json"))["converged"], false);
}

#[test]
fn threads_do_not_change_artifacts() {
    let cfg = repo_config("radial_p3.toml");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (d, t) in dirs.iter().zip(["1", "3"]) {
        for cmd in ["solve", "analyze", "check"] {
            let o = bin().arg("--config").arg(&cfg).arg("--out").arg(d.path()).args(["--threads", t, cmd]).output();
            assert!(o.unwrap().status.success());
        }
    }
    let mut names: Vec<_> = fs::read_dir(dirs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 10);
    for n in names {
        assert_eq!(fs::read(dirs[0].path().join(&n)).unwrap(), fs::read(dirs[1].path().join(&n)).unwrap(), "{n:?}");
    }
}
