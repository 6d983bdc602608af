//! INI-style run configuration: `[section]` headers, `key = value` lines,
//! `#` or `;` comments. Every diagnostic carries `file:line`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use heterodg::kinetics::{AxonField, ModelParams};
use heterodg::mesh::{BoundaryKind, BoundingBox, Point};
use heterodg::sim::{Region, RegionShape};
use heterodg::timestepping::{SolverKind, Theta};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Syntax { path: String, line: usize, message: String },
    #[error("{path}:{line}: [{section}] {key}: {message}")]
    Invalid { path: String, line: usize, section: String, key: String, message: String },
    #[error("{path}: [{section}] missing required key {key:?}")]
    Missing { path: String, section: String, key: String },
    #[error("{path}: missing required section [{section}]")]
    MissingSection { path: String, section: String },
    #[error("{path}:{line}: [{section}] unknown key {key:?}")]
    UnknownKey { path: String, line: usize, section: String, key: String },
    #[error("{path}:{line}: unknown section [{section}]")]
    UnknownSection { path: String, line: usize, section: String },
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parsed INI text; keys are consumed as they are read so leftovers can be
/// reported as unknown.
struct Ini {
    path: String,
    sections: BTreeMap<String, Section>,
}

const SECTIONS: [&str; 5] = ["model", "mesh", "discretization", "scenario", "output"];

impl Ini {
    fn parse(path: &str, text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        let syntax = |line: usize, message: String| ConfigError::Syntax { path: path.into(), line, message };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| syntax(line, "unterminated section header".into()))?;
                let name = name.trim().to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(ConfigError::UnknownSection { path: path.into(), line, section: name });
                }
                if sections.contains_key(&name) {
                    return Err(syntax(line, format!("duplicate section [{name}]")));
                }
                sections.insert(name.clone(), Section { line, entries: BTreeMap::new() });
                current = Some(name);
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| syntax(line, format!("expected key = value, found {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(syntax(line, "empty key".into()));
            }
            let name = current.as_ref().ok_or_else(|| syntax(line, "key outside of any section".into()))?;
            let section = sections.get_mut(name).expect("current section exists");
            if section.entries.contains_key(key) {
                return Err(syntax(line, format!("duplicate key {key:?}")));
            }
            section.entries.insert(key.to_string(), Entry { value: value.to_string(), line });
        }
        Ok(Ini { path: path.into(), sections })
    }

    fn take_section(&mut self, name: &str) -> Option<SectionReader> {
        let s = self.sections.remove(name)?;
        Some(SectionReader { path: self.path.clone(), name: name.into(), line: s.line, entries: s.entries })
    }

    fn require_section(&mut self, name: &str) -> Result<SectionReader, ConfigError> {
        self.take_section(name).ok_or_else(|| ConfigError::MissingSection { path: self.path.clone(), section: name.into() })
    }
}

struct SectionReader {
    path: String,
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl SectionReader {
    fn invalid(&self, key: &str, line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            path: self.path.clone(),
            line,
            section: self.name.clone(),
            key: key.into(),
            message: message.into(),
        }
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::Missing { path: self.path.clone(), section: self.name.clone(), key: key.into() }
    }

    fn raw(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn parse<T>(&mut self, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).map_err(|m| self.invalid(key, e.line, m)),
        }
    }

    fn required<T>(&mut self, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        self.parse(key, f)?.ok_or_else(|| self.missing(key))
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse(key, parse_number)
    }

    fn required_number(&mut self, key: &str, check: fn(f64) -> Result<(), String>) -> Result<f64, ConfigError> {
        self.required(key, |s| {
            let v = parse_number(s)?;
            check(v).map(|_| v)
        })
    }

    /// Fails on any key not consumed so far.
    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            None => Ok(()),
            Some((key, e)) => Err(ConfigError::UnknownKey { path: self.path, line: e.line, section: self.name, key }),
        }
    }
}

/// A float, optionally written as a fraction `a/b`.
fn parse_number(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("invalid number {s:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("invalid number {s:?}"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("invalid number {s:?}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn parse_numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split_whitespace().map(parse_number).collect()
}

fn parse_counts(s: &str) -> Result<Vec<usize>, String> {
    let v: Vec<usize> = s.split_whitespace().map(|t| t.parse().map_err(|_| format!("invalid count {t:?}"))).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("expected at least one value".into());
    }
    Ok(v)
}

fn parse_point(s: &str) -> Result<Point, String> {
    let v = parse_numbers(s)?;
    match v.len() {
        2 => Ok(Point::new(v[0], v[1], 0.0)),
        3 => Ok(Point::new(v[0], v[1], v[2])),
        n => Err(format!("expected 2 or 3 coordinates, found {n}")),
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(format!("expected true or false, found {s:?}")),
    }
}

fn non_negative(v: f64) -> Result<(), String> {
    if v >= 0.0 {
        Ok(())
    } else {
        Err(format!("must be non-negative, found {v}"))
    }
}

fn positive(v: f64) -> Result<(), String> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(format!("must be positive, found {v}"))
    }
}

/// `box x0 y0 [z0] x1 y1 [z1]`, `ball cx cy [cz] r` or `elements i j ...`.
fn parse_shape(s: &str) -> Result<RegionShape, String> {
    let (kind, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
    match kind {
        "box" => {
            let v = parse_numbers(rest)?;
            let (min, max) = match v.len() {
                4 => (Point::new(v[0], v[1], 0.0), Point::new(v[2], v[3], 0.0)),
                6 => (Point::new(v[0], v[1], v[2]), Point::new(v[3], v[4], v[5])),
                n => return Err(format!("box needs 4 or 6 coordinates, found {n}")),
            };
            let dim = if v.len() == 4 { 2 } else { 3 };
            BoundingBox::with_dim(dim, min, max).map(RegionShape::Box).map_err(|e| e.to_string())
        }
        "ball" => {
            let v = parse_numbers(rest)?;
            let (center, radius) = match v.len() {
                3 => (Point::new(v[0], v[1], 0.0), v[2]),
                4 => (Point::new(v[0], v[1], v[2]), v[3]),
                n => return Err(format!("ball needs a center and a radius, found {n} numbers")),
            };
            positive(radius)?;
            Ok(RegionShape::Ball { center, radius })
        }
        "elements" => Ok(RegionShape::Elements(parse_counts(rest)?)),
        "all" => Ok(RegionShape::Everywhere),
        _ => Err(format!("unknown region shape {kind:?}; expected box, ball, elements or all")),
    }
}

fn fmt_point(p: &Point, dim: usize) -> String {
    (0..dim).map(|a| p[a].to_string()).collect::<Vec<_>>().join(" ")
}

fn fmt_shape(shape: &RegionShape) -> String {
    match shape {
        RegionShape::Box(b) => format!("box {} {}", fmt_point(&b.min, b.dim), fmt_point(&b.max, b.dim)),
        RegionShape::Ball { center, radius } => format!("ball {} {radius}", fmt_point(center, 3)),
        RegionShape::Elements(ids) => {
            format!("elements {}", ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "))
        }
        RegionShape::Everywhere => "all".into(),
    }
}

fn fmt_counts(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// Uniform Cartesian grid; boundary faces get one condition.
    Grid { bbox: BoundingBox, cells: Vec<usize>, boundary: BoundaryKind },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub degree: Option<usize>,
    pub gamma0: f64,
    pub theta: Theta,
    pub dt: f64,
    pub t_final: f64,
    pub solver: SolverKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Refinement {
    /// One h-study per degree over the listed grids.
    H { degrees: Vec<usize>, cells: Vec<usize> },
    P { cells: usize, degrees: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedScenario {
    pub dim: usize,
    pub refinement: Refinement,
    /// Required L² slope is `p + l2_margin`; unchecked when absent.
    pub l2_margin: Option<f64>,
    pub min_r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontSpec {
    pub axis: usize,
    pub threshold: f64,
    pub window: (f64, f64),
    /// Fail the run unless the speed is within this fraction of `ν_min`.
    pub speed_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeededScenario {
    pub seed: RegionShape,
    pub seed_value: f64,
    pub q_crit: f64,
    pub regions: Vec<Region>,
    pub front: Option<FrontSpec>,
    /// `(d_ext_c, d_ext_q)` for a comparison run.
    pub split: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Manufactured(ManufacturedScenario),
    Seeded(SeededScenario),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub stride: usize,
    pub vtk: bool,
    pub fields_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("output"), stride: 10, vtk: false, fields_csv: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub mesh: Option<MeshSource>,
    pub discretization: Option<Discretization>,
    pub scenario: Option<Scenario>,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: label.clone(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&label, &text, base)
    }

    /// `base` resolves relative file references.
    pub fn parse(path: &str, text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut ini = Ini::parse(path, text)?;
        let model = read_model(ini.require_section("model")?)?;
        let mesh = ini.take_section("mesh").map(|s| read_mesh(s, base)).transpose()?;
        let discretization = ini.take_section("discretization").map(read_discretization).transpose()?;
        let scenario = ini.take_section("scenario").map(read_scenario).transpose()?;
        let output = match ini.take_section("output") {
            Some(s) => read_output(s, base)?,
            None => {
                let d = OutputConfig::default();
                OutputConfig { dir: base.join(d.dir), ..d }
            }
        };
        Ok(RunConfig { model, mesh, discretization, scenario, output })
    }

    /// Serializes back to the INI form; `parse` of the result reproduces
    /// `self` (with paths written as given).
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        let _ = writeln!(s, "[model]");
        for (k, v) in [("k0", m.k0), ("k1", m.k1), ("k1_tilde", m.k1_tilde), ("k12", m.k12)] {
            let _ = writeln!(s, "{k} = {v}");
        }
        if m.d_ext_c == m.d_ext_q {
            let _ = writeln!(s, "d_ext = {}", m.d_ext_c);
        } else {
            let _ = writeln!(s, "d_ext_c = {}\nd_ext_q = {}", m.d_ext_c, m.d_ext_q);
        }
        let _ = writeln!(s, "d_axn = {}", m.d_axn);
        match &m.axon {
            AxonField::Uniform(a) => {
                let _ = writeln!(s, "axon = {}", fmt_point(a, 3));
            }
            AxonField::FromMesh => {
                let _ = writeln!(s, "axon = mesh");
            }
            AxonField::PerElement(_) => {}
        }
        if let Some(mesh) = &self.mesh {
            let _ = writeln!(s, "\n[mesh]");
            match mesh {
                MeshSource::Grid { bbox, cells, boundary } => {
                    let _ = writeln!(s, "min = {}\nmax = {}", fmt_point(&bbox.min, bbox.dim), fmt_point(&bbox.max, bbox.dim));
                    let _ = writeln!(s, "cells = {}", fmt_counts(cells));
                    let b = match boundary {
                        BoundaryKind::Dirichlet => "dirichlet",
                        BoundaryKind::Neumann => "neumann",
                    };
                    let _ = writeln!(s, "boundary = {b}");
                }
                MeshSource::File(p) => {
                    let _ = writeln!(s, "file = {}", p.display());
                }
            }
        }
        if let Some(d) = &self.discretization {
            let _ = writeln!(s, "\n[discretization]");
            if let Some(p) = d.degree {
                let _ = writeln!(s, "p = {p}");
            }
            let _ = writeln!(s, "gamma0 = {}\ntheta = {}\ndt = {}\nT = {}", d.gamma0, d.theta.value(), d.dt, d.t_final);
            match d.solver {
                SolverKind::Direct => {
                    let _ = writeln!(s, "solver = direct");
                }
                SolverKind::Iterative { tolerance, max_iterations } => {
                    let _ = writeln!(s, "solver = iterative\ntolerance = {tolerance}\nmax_iterations = {max_iterations}");
                }
            }
        }
        match &self.scenario {
            Some(Scenario::Manufactured(m)) => {
                let _ = writeln!(s, "\n[scenario]\nkind = manufactured\ndim = {}", m.dim);
                match &m.refinement {
                    Refinement::H { degrees, cells } => {
                        let _ = writeln!(s, "refine = h\ndegrees = {}\ncells = {}", fmt_counts(degrees), fmt_counts(cells));
                    }
                    Refinement::P { cells, degrees } => {
                        let _ = writeln!(s, "refine = p\ndegrees = {}\ncells = {cells}", fmt_counts(degrees));
                    }
                }
                if let Some(m) = m.l2_margin {
                    let _ = writeln!(s, "l2_margin = {m}");
                }
                let _ = writeln!(s, "min_r2 = {}", m.min_r2);
            }
            Some(Scenario::Seeded(sc)) => {
                let _ = writeln!(s, "\n[scenario]\nkind = seeded\nseed = {}", fmt_shape(&sc.seed));
                let _ = writeln!(s, "seed_value = {}\nq_crit = {}", sc.seed_value, sc.q_crit);
                for r in &sc.regions {
                    let _ = writeln!(s, "region.{} = {}", r.name, fmt_shape(&r.shape));
                }
                if let Some(f) = &sc.front {
                    let _ = writeln!(s, "front_axis = {}\nfront_threshold = {}", f.axis, f.threshold);
                    let _ = writeln!(s, "front_window = {} {}", f.window.0, f.window.1);
                    if let Some(t) = f.speed_tolerance {
                        let _ = writeln!(s, "front_speed_tolerance = {t}");
                    }
                }
                if let Some((c, q)) = sc.split {
                    let _ = writeln!(s, "split_d_ext = {c} {q}");
                }
            }
            None => {}
        }
        let o = &self.output;
        let _ = writeln!(s, "\n[output]\ndir = {}\nstride = {}\nvtk = {}\nfields_csv = {}", o.dir.display(), o.stride, o.vtk, o.fields_csv);
        s
    }
}

fn read_model(mut s: SectionReader) -> Result<ModelParams, ConfigError> {
    let k0 = s.required_number("k0", non_negative)?;
    let k1 = s.required_number("k1", non_negative)?;
    let k1_tilde = s.required_number("k1_tilde", non_negative)?;
    let k12 = s.required_number("k12", non_negative)?;
    let d_axn = s.required_number("d_axn", non_negative)?;
    let shared = s.raw("d_ext");
    let species = |key: &str, s: &mut SectionReader| -> Result<f64, ConfigError> {
        let entry = match s.raw(key) {
            Some(e) => e,
            None => shared.clone().ok_or_else(|| s.missing("d_ext"))?,
        };
        let v = parse_number(&entry.value).map_err(|m| s.invalid(key, entry.line, m))?;
        positive(v).map_err(|m| s.invalid(key, entry.line, m))?;
        Ok(v)
    };
    let d_ext_c = species("d_ext_c", &mut s)?;
    let d_ext_q = species("d_ext_q", &mut s)?;
    let axon = s
        .parse("axon", |v| {
            if v == "mesh" {
                return Ok(AxonField::FromMesh);
            }
            let a = parse_point(v)?;
            if (a.norm() - 1.0).abs() > 1e-12 {
                return Err(format!("direction must have unit length, found {}", a.norm()));
            }
            Ok(AxonField::Uniform(a))
        })?
        .unwrap_or_default();
    s.finish()?;
    Ok(ModelParams { k0, k1, k1_tilde, k12, d_ext_c, d_ext_q, d_axn, axon })
}

fn read_mesh(mut s: SectionReader, base: &Path) -> Result<MeshSource, ConfigError> {
    if let Some(file) = s.raw("file") {
        let path = base.join(&file.value);
        if !path.is_file() {
            return Err(s.invalid("file", file.line, format!("{} does not exist", path.display())));
        }
        s.finish()?;
        return Ok(MeshSource::File(path));
    }
    let min_line = s.entries.get("min").map(|e| e.line).unwrap_or(s.line);
    let min = s.required("min", parse_point)?;
    let max = s.required("max", parse_point)?;
    let cells = s.required("cells", parse_counts)?;
    let dim = cells.len();
    if dim != 2 && dim != 3 {
        return Err(s.invalid("cells", min_line, format!("expected 2 or 3 counts, found {dim}")));
    }
    if cells.contains(&0) {
        return Err(s.invalid("cells", min_line, "cell counts must be positive"));
    }
    let bbox = BoundingBox::with_dim(dim, min, max).map_err(|e| s.invalid("max", min_line, e.to_string()))?;
    let boundary = s
        .parse("boundary", |v| match v {
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            "neumann" => Ok(BoundaryKind::Neumann),
            _ => Err(format!("expected dirichlet or neumann, found {v:?}")),
        })?
        .unwrap_or(BoundaryKind::Neumann);
    s.finish()?;
    Ok(MeshSource::Grid { bbox, cells, boundary })
}

fn read_discretization(mut s: SectionReader) -> Result<Discretization, ConfigError> {
    let degree = s.parse("p", |v| match v.parse::<usize>() {
        Ok(p) if (1..=6).contains(&p) => Ok(p),
        _ => Err(format!("expected a degree between 1 and 6, found {v:?}")),
    })?;
    let gamma0 = s.required_number("gamma0", positive)?;
    let theta = s.required("theta", |v| Theta::from_value(parse_number(v)?).map_err(|e| e.to_string()))?;
    let dt = s.required_number("dt", positive)?;
    let t_final = s.required_number("T", positive)?;
    let kind = s.parse("solver", |v| Ok(v.to_string()))?.unwrap_or_else(|| "direct".into());
    let solver = match kind.as_str() {
        "direct" => SolverKind::Direct,
        "iterative" => {
            let tolerance = s.number("tolerance")?.unwrap_or(1e-10);
            let max_iterations = s.parse("max_iterations", |v| v.parse::<usize>().map_err(|e| e.to_string()))?.unwrap_or(5000);
            let solver = SolverKind::Iterative { tolerance, max_iterations };
            solver.validate().map_err(|e| s.invalid("tolerance", s.line, e.to_string()))?;
            solver
        }
        other => return Err(s.invalid("solver", s.line, format!("expected direct or iterative, found {other:?}"))),
    };
    let scheme = heterodg::timestepping::SchemeConfig { theta, dt, t_final, solver };
    if let Err(e) = scheme.n_steps() {
        return Err(s.invalid("T", s.line, e.to_string()));
    }
    s.finish()?;
    Ok(Discretization { degree, gamma0, theta, dt, t_final, solver })
}

fn read_scenario(mut s: SectionReader) -> Result<Scenario, ConfigError> {
    let kind = s.required("kind", |v| Ok(v.to_string()))?;
    let scenario = match kind.as_str() {
        "manufactured" => {
            let dim = s.required("dim", |v| match v {
                "2" => Ok(2),
                "3" => Ok(3),
                _ => Err(format!("expected 2 or 3, found {v:?}")),
            })?;
            let refine = s.required("refine", |v| Ok(v.to_string()))?;
            let degrees = s.required("degrees", parse_counts)?;
            if degrees.iter().any(|&p| p == 0 || p > 6) {
                return Err(s.invalid("degrees", s.line, "degrees must lie between 1 and 6"));
            }
            let cells = s.required("cells", parse_counts)?;
            let refinement = match refine.as_str() {
                "h" => {
                    if cells.len() < 2 {
                        return Err(s.invalid("cells", s.line, "h-refinement needs at least two grids"));
                    }
                    Refinement::H { degrees, cells }
                }
                "p" => {
                    if cells.len() != 1 {
                        return Err(s.invalid("cells", s.line, "p-refinement uses a single grid"));
                    }
                    Refinement::P { cells: cells[0], degrees }
                }
                other => return Err(s.invalid("refine", s.line, format!("expected h or p, found {other:?}"))),
            };
            let l2_margin = s.number("l2_margin")?;
            let min_r2 = s.number("min_r2")?.unwrap_or(0.95);
            Scenario::Manufactured(ManufacturedScenario { dim, refinement, l2_margin, min_r2 })
        }
        "seeded" => {
            let seed = s.required("seed", parse_shape)?;
            let seed_value = s.required_number("seed_value", non_negative)?;
            let q_crit = s.required_number("q_crit", positive)?;
            let mut keys: Vec<(String, usize)> =
                s.entries.iter().filter(|(k, _)| k.starts_with("region.")).map(|(k, e)| (k.clone(), e.line)).collect();
            keys.sort_by_key(|(_, line)| *line);
            let mut named = Vec::new();
            for (key, _) in keys {
                let shape = s.required(&key, parse_shape)?;
                named.push((key, shape));
            }
            let regions = named.into_iter().map(|(k, shape)| Region::new(&k["region.".len()..], shape)).collect();
            let front = match s.parse("front_axis", |v| match v {
                "0" | "x" => Ok(0usize),
                "1" | "y" => Ok(1),
                "2" | "z" => Ok(2),
                _ => Err(format!("expected an axis 0, 1 or 2, found {v:?}")),
            })? {
                None => None,
                Some(axis) => {
                    let threshold = s.required_number("front_threshold", positive)?;
                    let window = s.required("front_window", |v| match parse_numbers(v)?.as_slice() {
                        [a, b] if a < b => Ok((*a, *b)),
                        _ => Err("expected two increasing positions".into()),
                    })?;
                    let speed_tolerance = s.number("front_speed_tolerance")?;
                    Some(FrontSpec { axis, threshold, window, speed_tolerance })
                }
            };
            let split = s.parse("split_d_ext", |v| match parse_numbers(v)?.as_slice() {
                [c, q] if *c > 0.0 && *q > 0.0 => Ok((*c, *q)),
                _ => Err("expected two positive diffusion coefficients d_ext_c d_ext_q".into()),
            })?;
            Scenario::Seeded(SeededScenario { seed, seed_value, q_crit, regions, front, split })
        }
        other => return Err(s.invalid("kind", s.line, format!("expected manufactured or seeded, found {other:?}"))),
    };
    s.finish()?;
    Ok(scenario)
}

fn read_output(mut s: SectionReader, base: &Path) -> Result<OutputConfig, ConfigError> {
    let d = OutputConfig::default();
    let dir = s.parse("dir", |v| Ok(PathBuf::from(v)))?.unwrap_or(d.dir);
    let dir = if dir.is_absolute() { dir } else { base.join(dir) };
    let stride = s
        .parse("stride", |v| match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("expected a positive integer, found {v:?}")),
        })?
        .unwrap_or(d.stride);
    let vtk = s.parse("vtk", parse_bool)?.unwrap_or(d.vtk);
    let fields_csv = s.parse("fields_csv", parse_bool)?.unwrap_or(d.fields_csv);
    s.finish()?;
    Ok(OutputConfig { dir, stride, vtk, fields_csv })
}
