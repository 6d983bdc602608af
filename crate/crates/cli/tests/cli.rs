use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heterodg_cli::config::RunConfig;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heterodg"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--output-dir").arg(out).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Writes a variant of a bundled config with `(from, to)` line replacements.
fn variant(dir: &Path, name: &str, replacements: &[(&str, &str)]) -> PathBuf {
    let mut body = std::fs::read_to_string(config(name)).unwrap();
    for (from, to) in replacements {
        assert!(body.contains(from), "{from:?} not in {name}");
        body = body.replace(from, to);
    }
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn bundled_configs_round_trip() {
    for name in ["converge2d.cfg", "converge3d.cfg", "converge_p.cfg", "rod.cfg", "sensitivity.cfg", "sensitivity_q.cfg"] {
        let cfg = RunConfig::load(config(name)).unwrap();
        let again = RunConfig::parse(name, &cfg.to_ini(), Path::new("/")).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

#[test]
fn analyze_reports_reference_kinetics() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["analyze", "--config", config("rod.cfg").to_str().unwrap()], tmp.path());
    let stdout = text(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}{}", text(&out.stderr));
    for needle in ["(0.3, 1.5)", "(1.2, 0)", "stable", "saddle", "5.3665", "0.9"] {
        assert!(stdout.contains(needle), "missing {needle:?} in\n{stdout}");
    }
}

#[test]
fn analyze_rejects_inadmissible_parameters() {
    let tmp = TempDir::new().unwrap();
    let cfg = variant(tmp.path(), "rod.cfg", &[("k0 = 0.6", "k0 = 0")]);
    let out = run(&["analyze", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_ne!(out.status.code(), Some(0));
    assert!(text(&out.stderr).contains("not admissible"), "{}", text(&out.stderr));
}

#[test]
fn config_errors_name_file_line_and_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = variant(tmp.path(), "rod.cfg", &[("k1 = 0.5", "k1 = -1")]);
    let out = run(&["analyze", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("rod.cfg:6:") && err.contains("k1"), "{err}");
    let cfg = variant(tmp.path(), "rod.cfg", &[("k12 = 1\n", "")]);
    let out = run(&["analyze", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("\"k12\""));
}

#[test]
fn thread_variable_is_validated() {
    let tmp = TempDir::new().unwrap();
    let out = bin()
        .args(["analyze", "--config", config("rod.cfg").to_str().unwrap(), "--quiet"])
        .env("HETERODG_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin()
        .args(["analyze", "--config", config("rod.cfg").to_str().unwrap(), "--quiet"])
        .env("HETERODG_THREADS", "2")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

fn exported_grid(tmp: &Path) -> PathBuf {
    let cfg = variant(tmp, "rod.cfg", &[("cells = 100 1 1", "cells = 4 2 2")]);
    let mesh = tmp.join("rod.mesh");
    let out = run(&["export-grid", "--config", cfg.to_str().unwrap(), mesh.to_str().unwrap()], tmp);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    mesh
}

#[test]
fn checkmesh_accepts_exported_grid() {
    let tmp = TempDir::new().unwrap();
    let mesh = exported_grid(tmp.path());
    let out = run(&["checkmesh", mesh.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("16") && stdout.contains("mesh is valid"), "{stdout}");
}

#[test]
fn checkmesh_reports_truncation_line() {
    let tmp = TempDir::new().unwrap();
    let mesh = exported_grid(tmp.path());
    let body = std::fs::read_to_string(&mesh).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    let cut = tmp.path().join("cut.mesh");
    std::fs::write(&cut, lines[..lines.len() - 3].join("\n")).unwrap();
    let out = run(&["checkmesh", cut.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains(&format!("line {}", lines.len() - 2)), "{err}");
}

#[test]
fn checkmesh_reports_corrupted_normal() {
    // collapse one boundary vertex onto its neighbour so the face between
    // them has no well-defined unit normal
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("square.mesh");
    let body = "polymesh 2\nvertices 4\n0 0\n1 0\n1 1\n0 1\nfaces 4\n0 1 N\n1 2 N\n2 3 N\n3 0 N\nelements 1\n0 1 2 3\n";
    std::fs::write(&path, body.replace("\n1 1\n", "\n1 0\n")).unwrap();
    let out = run(&["checkmesh", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("normal"), "{}", text(&out.stderr));
    std::fs::write(&path, body).unwrap();
    assert_eq!(run(&["checkmesh", path.to_str().unwrap()], tmp.path()).status.code(), Some(0));
}

#[test]
fn converge2d_meets_rates() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["converge", "--config", config("converge2d.cfg").to_str().unwrap(), "--quiet"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for p in 1..=3 {
        let table = std::fs::read_to_string(tmp.path().join(format!("rates_h_p{p}.csv"))).unwrap();
        assert!(table.starts_with("level,h_or_p,err_c_L2,err_q_L2,err_c_DG,err_q_DG,err_c_energy,err_q_energy,slope_c,slope_q"));
        assert_eq!(table.lines().count(), 5);
    }
}

#[test]
fn weak_penalty_fails_rate_checks() {
    let tmp = TempDir::new().unwrap();
    let cfg = variant(
        tmp.path(),
        "converge2d.cfg",
        &[("gamma0 = 10", "gamma0 = 0.01"), ("degrees = 1 2 3", "degrees = 2"), ("cells = 8 16 32 64", "cells = 4 8 16")],
    );
    let out = run(&["converge", "--config", cfg.to_str().unwrap(), "--quiet"], tmp.path());
    assert_ne!(out.status.code(), Some(0));
    assert!(tmp.path().join("rates_h_p2.csv").exists(), "run did not complete: {}", text(&out.stderr));
}

#[test]
fn p_refinement_writes_table_and_reports_rate_checks() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["converge", "--config", config("converge_p.cfg").to_str().unwrap(), "--quiet"], tmp.path());
    let table = std::fs::read_to_string(tmp.path().join("rates_p.csv")).unwrap();
    let column = |i: usize| -> Vec<f64> { table.lines().skip(1).map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect() };
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    assert_eq!(column(2).len(), 4);
    assert!(decreasing(&column(2)) && decreasing(&column(3)) && decreasing(&column(6)), "{table}");
    let err = text(&out.stderr);
    if decreasing(&column(7)) && decreasing(&column(5)) {
        assert_eq!(out.status.code(), Some(0), "{err}");
    } else {
        assert_eq!(out.status.code(), Some(3), "{err}");
        assert!(err.contains("did not decrease"), "{err}");
    }
}

fn read_biomarkers(dir: &Path, file: &str) -> Vec<(f64, String, f64)> {
    std::fs::read_to_string(dir.join(file))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn rod_front_speed_and_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["simulate", "--config", config("rod.cfg").to_str().unwrap()], tmp.path());
    let stdout = text(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}{}", text(&out.stderr));
    assert!(stdout.contains("front speed"));
    let rows = read_biomarkers(tmp.path(), "biomarkers.csv");
    // initial state plus every tenth of 3600 steps, for four regions and the whole rod
    assert_eq!(rows.len(), 361 * 5);
    // B stays in [0, 1] while the fields are nonnegative; DG undershoot ahead
    // of the front is allowed only at roundoff level and must be reported
    let outside = rows.iter().filter(|(_, _, b)| !(0.0..=1.0).contains(b)).count();
    assert!(rows.iter().all(|(_, _, b)| (-1e-12..=1.0).contains(b)));
    let err = text(&out.stderr);
    assert_eq!(outside > 0, err.contains(&format!("warning: {outside} biomarker sample(s) outside [0, 1]")), "{err}");
    let staging = std::fs::read_to_string(tmp.path().join("staging.csv")).unwrap();
    let order: Vec<&str> = staging.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(order, ["x10", "x30", "x50", "x70"]);
    assert!(tmp.path().join("fields.csv").exists() && tmp.path().join("front.csv").exists());
}

#[test]
fn zero_seed_stays_healthy_and_runs_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = variant(
        tmp.path(),
        "rod.cfg",
        &[
            ("seed_value = 0.5", "seed_value = 0"),
            ("T = 30", "T = 1"),
            ("front_speed_tolerance = 0.1\n", ""),
            ("vtk = false", "vtk = true"),
            ("stride = 10", "stride = 60"),
        ],
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--quiet"], dir);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    let rows = read_biomarkers(&a, "biomarkers.csv");
    assert!(rows.iter().all(|(_, _, b)| *b == 0.0));
    assert!(std::fs::read_to_string(a.join("staging.csv")).unwrap().contains("x10,inf"));
    assert_eq!(std::fs::read_dir(a.join("vtk")).unwrap().count(), 3);
    for file in ["biomarkers.csv", "staging.csv", "fields.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn healthy_diffusion_split_delays_biomarker() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["simulate", "--config", config("sensitivity.cfg").to_str().unwrap(), "--quiet"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = std::fs::read_to_string(tmp.path().join("sensitivity.csv")).unwrap();
    let shift: f64 = report.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(shift > 0.0, "{report}");
}
