//! Command implementations. Each returns a `CliError` carrying the exit code.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use heterodg::dgspace::DgSpace;
use heterodg::kinetics::{check_admissibility, min_wave_speed, KineticsReport};
use heterodg::mesh::{build_cartesian_grid, export_mesh, import_mesh, BoundaryKind, MeshError, PolyMesh};
use heterodg::sim::{
    biomarker_csv, front_speed, sensitivity_from_runs, simulate, write_fields_csv, FrontConfig, Region,
    SimulationResult, SimulationSetup,
};
use heterodg::timestepping::SchemeConfig;
use heterodg::verification::{convergence_study, ManufacturedCase, Numerics, RateTable, StudyMode};
use thiserror::Error;

use crate::config::{ConfigError, Discretization, MeshSource, Refinement, RunConfig, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{} check(s) failed:\n  {}", .0.len(), .0.join("\n  "))]
    Assertion(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Assertion(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

/// Shared command options.
#[derive(Debug, Clone)]
pub struct Context {
    pub output_dir: Option<PathBuf>,
    pub quiet: bool,
}

impl Context {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn out_dir(&self, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let dir = self.output_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
        std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(dir)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn require<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Config(format!("configuration has no [{what}] section")))
}

fn scheme(d: &Discretization) -> SchemeConfig {
    SchemeConfig { theta: d.theta, dt: d.dt, t_final: d.t_final, solver: d.solver }
}

pub fn build_mesh(source: &MeshSource) -> Result<PolyMesh, CliError> {
    match source {
        MeshSource::Grid { bbox, cells, boundary } => {
            let mesh = build_cartesian_grid(bbox.dim, cells, bbox).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(match boundary {
                BoundaryKind::Neumann => mesh,
                BoundaryKind::Dirichlet => mesh.tag_boundary(|_| BoundaryKind::Dirichlet),
            })
        }
        MeshSource::File(path) => import_mesh(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
    }
}

pub fn analyze(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let report = KineticsReport::new(&cfg.model);
    ctx.say(report.to_string());
    let adm = check_admissibility(&cfg.model);
    if adm.admissible {
        Ok(())
    } else {
        Err(CliError::Assertion(vec![format!("parameters are not admissible: {adm}")]))
    }
}

pub fn checkmesh(path: &Path, ctx: &Context) -> Result<(), CliError> {
    match import_mesh(path) {
        Ok(mesh) => {
            let violations = mesh.check();
            ctx.say(mesh.report().to_string());
            if violations.is_empty() {
                ctx.say("mesh is valid");
                Ok(())
            } else {
                Err(CliError::Assertion(violations.iter().map(|v| v.to_string()).collect()))
            }
        }
        Err(MeshError::Invalid(violations)) => {
            Err(CliError::Assertion(violations.iter().map(|v| v.to_string()).collect()))
        }
        Err(e @ MeshError::Io(_)) => Err(io_error(path, e)),
        Err(e) => Err(CliError::Config(format!("{}: {e}", path.display()))),
    }
}

pub fn export_grid(cfg: &RunConfig, path: &Path, ctx: &Context) -> Result<(), CliError> {
    let mesh = build_mesh(require(&cfg.mesh, "mesh")?)?;
    export_mesh(&mesh, path).map_err(|e| io_error(path, e))?;
    ctx.say(format!("wrote {} elements to {}", mesh.n_elements(), path.display()));
    Ok(())
}

fn print_table(ctx: &Context, title: &str, table: &RateTable) {
    ctx.say(title);
    ctx.say(table.to_csv().trim_end());
}

pub fn converge(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let Some(Scenario::Manufactured(m)) = &cfg.scenario else {
        return Err(CliError::Config("converge needs [scenario] kind = manufactured".into()));
    };
    let d = require(&cfg.discretization, "discretization")?;
    let numerics = Numerics { scheme: scheme(d), gamma0: d.gamma0 };
    let case = ManufacturedCase::new(m.dim);
    let dir = ctx.out_dir(cfg)?;
    let mut failures = Vec::new();
    let mut studies: Vec<(String, StudyMode)> = Vec::new();
    match &m.refinement {
        Refinement::H { degrees, cells } => {
            for &p in degrees {
                studies.push((format!("rates_h_p{p}.csv"), StudyMode::H { degree: p, cells: cells.clone() }));
            }
        }
        Refinement::P { cells, degrees } => {
            studies.push(("rates_p.csv".into(), StudyMode::P { cells: *cells, degrees: degrees.clone() }));
        }
    }
    for (file, mode) in studies {
        let table = convergence_study(case, mode.clone(), &cfg.model, &numerics, |row| {
            ctx.say(format!(
                "  level {} ({}): energy c {:.3e} q {:.3e}",
                row.level, row.h_or_p, row.errors.c.energy, row.errors.q.energy
            ))
        })
        .map_err(numerical)?;
        write_file(&dir.join(&file), &table.to_csv())?;
        print_table(ctx, &file, &table);
        let violations = match mode {
            StudyMode::H { degree, .. } => table.check_h_rates(m.l2_margin.map(|x| degree as f64 + x)),
            StudyMode::P { .. } => table.check_p_rates(m.min_r2),
        };
        failures.extend(violations.into_iter().map(|v| format!("{file}: level {}: {}", v.level, v.message)));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(failures))
    }
}

fn setup_from(cfg: &RunConfig, vtk_dir: Option<PathBuf>) -> Result<SimulationSetup, CliError> {
    let Some(Scenario::Seeded(s)) = &cfg.scenario else {
        return Err(CliError::Config("simulate needs [scenario] kind = seeded".into()));
    };
    let d = require(&cfg.discretization, "discretization")?;
    let degree = d.degree.ok_or_else(|| CliError::Config("[discretization] p is required for simulations".into()))?;
    let mesh = build_mesh(require(&cfg.mesh, "mesh")?)?;
    let space = DgSpace::new(Arc::new(mesh), degree).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(SimulationSetup {
        space: Arc::new(space),
        params: cfg.model.clone(),
        scheme: scheme(d),
        gamma0: d.gamma0,
        seed: Region::new("seed", s.seed.clone()),
        seed_value: s.seed_value,
        regions: s.regions.clone(),
        q_crit: s.q_crit,
        stride: cfg.output.stride,
        front: s.front.as_ref().map(|f| FrontConfig { axis: f.axis, threshold: f.threshold }),
        vtk_dir,
    })
}

fn run(setup: &SimulationSetup) -> Result<SimulationResult, CliError> {
    simulate(setup).map_err(|e| match e {
        heterodg::sim::SimError::EmptyRegion(_) | heterodg::sim::SimError::UnknownElement { .. } => {
            CliError::Config(e.to_string())
        }
        heterodg::sim::SimError::Model(_) => CliError::Config(e.to_string()),
        other => numerical(other),
    })
}

pub fn simulate_cmd(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let dir = ctx.out_dir(cfg)?;
    let vtk = cfg.output.vtk.then(|| dir.join("vtk"));
    let setup = setup_from(cfg, vtk)?;
    let Some(Scenario::Seeded(sc)) = &cfg.scenario else { unreachable!("checked by setup_from") };
    ctx.say(format!(
        "simulating {} elements, {} dofs per species, {} steps",
        setup.space.mesh().n_elements(),
        setup.space.n_dofs(),
        setup.scheme.n_steps().map_err(numerical)?
    ));
    let result = run(&setup)?;
    let mut failures = Vec::new();
    write_file(&dir.join("biomarkers.csv"), &biomarker_csv(&result.biomarkers))?;
    write_file(&dir.join("staging.csv"), &result.staging.to_csv())?;
    if cfg.output.fields_csv {
        let path = dir.join("fields.csv");
        let file = File::create(&path).map_err(|e| io_error(&path, e))?;
        let mut out = BufWriter::new(file);
        write_fields_csv(&mut out, &setup.space, &result.summary.final_state).map_err(|e| io_error(&path, e))?;
        out.flush().map_err(|e| io_error(&path, e))?;
    }
    let mut summary = String::new();
    let g = result.global_biomarker();
    summary.push_str(&format!("final_time,{}\n", result.summary.final_state.t));
    summary.push_str(&format!("final_global_B,{}\n", g.values.last().copied().unwrap_or(f64::NAN)));
    summary.push_str(&format!("worst_undershoot_c,{}\n", result.summary.worst_undershoot_c));
    summary.push_str(&format!("worst_undershoot_q,{}\n", result.summary.worst_undershoot_q));
    let worst = result.biomarker_violations.iter().min_by(|a, b| a.2.min(1.0 - a.2).total_cmp(&b.2.min(1.0 - b.2)));
    if let Some((t, region, b)) = worst {
        eprintln!(
            "warning: {} biomarker sample(s) outside [0, 1], worst {b:.3e} in {region} at t = {t:.4} (worst q undershoot {:.3e})",
            result.biomarker_violations.len(),
            result.summary.worst_undershoot_q,
        );
    }
    if let Some(f) = &sc.front {
        let mut track = String::from("time,position\n");
        for (t, x) in &result.front_track {
            track.push_str(&format!("{t},{x}\n"));
        }
        write_file(&dir.join("front.csv"), &track)?;
        match front_speed(&result.front_track, f.window, f.threshold) {
            Ok(fit) => {
                let predicted = min_wave_speed(&cfg.model).ok();
                ctx.say(format!("front speed {:.4} (fit over {} samples, R² {:.4})", fit.speed, fit.samples, fit.r_squared));
                summary.push_str(&format!("front_speed,{}\n", fit.speed));
                if let Some(nu) = predicted {
                    ctx.say(format!("minimum wave speed {nu:.4}"));
                    summary.push_str(&format!("min_wave_speed,{nu}\n"));
                    if let Some(tol) = f.speed_tolerance {
                        let rel = (fit.speed - nu).abs() / nu;
                        if rel > tol {
                            failures.push(format!("front speed {:.4} differs from {nu:.4} by {:.1}%", fit.speed, rel * 100.0));
                        }
                    }
                }
            }
            Err(e) => {
                ctx.say(format!("front speed unavailable: {e}"));
                if f.speed_tolerance.is_some() {
                    failures.push(e.to_string());
                }
            }
        }
    }
    if let Some((dc, dq)) = sc.split {
        let mut other = setup.clone();
        other.params.d_ext_c = dc;
        other.params.d_ext_q = dq;
        other.vtk_dir = None;
        ctx.say(format!("comparison run with d_ext_c = {dc}, d_ext_q = {dq}"));
        let split = run(&other)?;
        write_file(&dir.join("biomarkers_split.csv"), &biomarker_csv(&split.biomarkers))?;
        let report = sensitivity_from_runs(&result, &split);
        let fmt = |t: Option<f64>| t.map_or("none".to_string(), |t| t.to_string());
        let shift = report.shift();
        write_file(
            &dir.join("sensitivity.csv"),
            &format!(
                "run,d_ext_c,d_ext_q,crossing_time\nbaseline,{},{},{}\nsplit,{dc},{dq},{}\nshift,,,{}\n",
                cfg.model.d_ext_c,
                cfg.model.d_ext_q,
                fmt(report.baseline_crossing),
                fmt(report.split_crossing),
                fmt(shift)
            ),
        )?;
        ctx.say(format!(
            "B = 0.5 crossing: baseline {}, split {}, shift {}",
            fmt(report.baseline_crossing),
            fmt(report.split_crossing),
            fmt(shift)
        ));
        // more healthy-protein diffusion delays, more misfolded diffusion advances
        let base_ratio = cfg.model.d_ext_c / cfg.model.d_ext_q;
        let ratio = dc / dq;
        match shift {
            None => failures.push("a run never reached B = 0.5".into()),
            Some(s) if ratio > base_ratio && s <= 0.0 => {
                failures.push(format!("expected a delay at B = 0.5, found shift {s}"))
            }
            Some(s) if ratio < base_ratio && s >= 0.0 => {
                failures.push(format!("expected an earlier B = 0.5 crossing, found shift {s}"))
            }
            _ => {}
        }
    }
    write_file(&dir.join("summary.csv"), &summary)?;
    for (name, t) in result.staging.ordered() {
        ctx.say(format!("onset {name}: {t}"));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(failures))
    }
}
