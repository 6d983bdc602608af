//! Seeded long-horizon simulations and their post-processing.

mod export;
mod front;

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::dgspace::{project_l2, DgSpace};
use crate::kinetics::{equilibria, KineticsError, ModelParams};
use crate::mesh::{BoundingBox, Point, PolyMesh};
use crate::timestepping::{run, Operators, ProductionLoads, RunSummary, SchemeConfig, State, StepError};
pub use export::{read_fields_csv, sub_simplex_count, write_fields_csv, write_vtk, FieldRow};
pub use front::{front_position, front_speed, slab_profile, FrontFit};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("region {0:?} contains no elements")]
    EmptyRegion(String),
    #[error("element {element} in region {region:?} does not exist")]
    UnknownElement { region: String, element: usize },
    #[error("biomarker undefined on region {region:?}: total protein {total} is not positive")]
    NonPositiveTotal { region: String, total: f64 },
    #[error("no front formed above threshold {0}")]
    FrontNeverForms(f64),
    #[error("front-speed window has {0} samples; need at least 3")]
    WindowTooShort(usize),
    #[error("biomarker series never reaches {0}")]
    NoCrossing(f64),
    #[error(transparent)]
    Model(#[from] KineticsError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed field file line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionShape {
    Ball { center: Point, radius: f64 },
    Box(BoundingBox),
    Elements(Vec<usize>),
    Everywhere,
}

/// A named set of elements; geometric shapes select by element center.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub shape: RegionShape,
}

impl Region {
    pub fn new(name: impl Into<String>, shape: RegionShape) -> Self {
        Region { name: name.into(), shape }
    }

    pub fn everywhere() -> Self {
        Region::new("global", RegionShape::Everywhere)
    }

    pub fn resolve(&self, mesh: &PolyMesh) -> Result<Vec<usize>, SimError> {
        let n = mesh.n_elements();
        let centers = || mesh.elements().iter().enumerate().map(|(e, el)| (e, el.center));
        let ids: Vec<usize> = match &self.shape {
            RegionShape::Ball { center, radius } => {
                centers().filter(|(_, x)| (x - center).norm() <= *radius).map(|(e, _)| e).collect()
            }
            RegionShape::Box(b) => centers().filter(|(_, x)| b.contains(x)).map(|(e, _)| e).collect(),
            RegionShape::Elements(list) => {
                if let Some(&bad) = list.iter().find(|&&e| e >= n) {
                    return Err(SimError::UnknownElement { region: self.name.clone(), element: bad });
                }
                let mut v = list.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
            RegionShape::Everywhere => (0..n).collect(),
        };
        if ids.is_empty() {
            return Err(SimError::EmptyRegion(self.name.clone()));
        }
        Ok(ids)
    }
}

/// A region resolved against a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRegion {
    pub name: String,
    pub elements: Vec<usize>,
    pub measure: f64,
}

impl ResolvedRegion {
    pub fn new(region: &Region, mesh: &PolyMesh) -> Result<Self, SimError> {
        let elements = region.resolve(mesh)?;
        let measure = elements.iter().map(|&e| mesh.elements()[e].measure).sum();
        Ok(ResolvedRegion { name: region.name.clone(), elements, measure })
    }

    pub fn integral(&self, space: &DgSpace, coeffs: &DVector<f64>) -> f64 {
        self.elements.iter().map(|&e| space.element_integral(coeffs, e)).sum()
    }

    pub fn average(&self, space: &DgSpace, coeffs: &DVector<f64>) -> f64 {
        self.integral(space, coeffs) / self.measure
    }
}

/// `c₀ ≡ k0/k1` everywhere and `q₀ = seed_value` on the seed elements.
pub fn seeded_initial_state(
    space: &DgSpace,
    params: &ModelParams,
    seed: &Region,
    seed_value: f64,
) -> Result<State, SimError> {
    params.validate()?;
    if !(params.k1 > 0.0) {
        return Err(KineticsError::ZeroClearance.into());
    }
    let seeded = seed.resolve(space.mesh())?;
    let one = project_l2(space, |_| 1.0);
    let c = &one * (params.k0 / params.k1);
    let mut q = DVector::zeros(space.n_dofs());
    let n = space.local_dofs();
    for e in seeded {
        let o = space.offset(e);
        for i in 0..n {
            q[o + i] = one[o + i] * seed_value;
        }
    }
    Ok(State::new(c, q, 0.0))
}

/// `∫_R q / ∫_R (c + q)`.
pub fn biomarker(space: &DgSpace, state: &State, region: &ResolvedRegion) -> Result<f64, SimError> {
    let q = region.integral(space, &state.q);
    let total = region.integral(space, &state.c) + q;
    if !(total > 0.0) {
        return Err(SimError::NonPositiveTotal { region: region.name.clone(), total });
    }
    Ok(q / total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiomarkerSeries {
    pub region: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl BiomarkerSeries {
    pub fn new(region: impl Into<String>) -> Self {
        BiomarkerSeries { region: region.into(), times: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, t: f64, b: f64) {
        self.times.push(t);
        self.values.push(b);
    }

    /// First time the series reaches `level`, linearly interpolated.
    pub fn crossing_time(&self, level: f64) -> Option<f64> {
        if self.values.first().is_some_and(|&v| v >= level) {
            return self.times.first().copied();
        }
        self.times.windows(2).zip(self.values.windows(2)).find_map(|(t, v)| {
            (v[0] < level && v[1] >= level).then(|| t[0] + (level - v[0]) / (v[1] - v[0]) * (t[1] - t[0]))
        })
    }
}

/// Records the first time each region's average `q` exceeds a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Staging {
    pub q_crit: f64,
    pub onsets: Vec<(String, Option<f64>)>,
}

impl Staging {
    pub fn new(regions: &[ResolvedRegion], q_crit: f64) -> Self {
        Staging { q_crit, onsets: regions.iter().map(|r| (r.name.clone(), None)).collect() }
    }

    pub fn observe(&mut self, space: &DgSpace, state: &State, regions: &[ResolvedRegion]) {
        for (slot, region) in self.onsets.iter_mut().zip(regions) {
            if slot.1.is_none() && region.average(space, &state.q) > self.q_crit {
                slot.1 = Some(state.t);
            }
        }
    }

    /// Onsets ordered by time; regions never compromised come last.
    pub fn ordered(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> =
            self.onsets.iter().map(|(n, t)| (n.clone(), t.unwrap_or(f64::INFINITY))).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("region,onset_time\n");
        for (name, t) in self.ordered() {
            let t = if t.is_finite() { t.to_string() } else { "inf".into() };
            s.push_str(&format!("{name},{t}\n"));
        }
        s
    }
}

/// Writes `time,region,B` rows, time-major.
pub fn biomarker_csv(series: &[BiomarkerSeries]) -> String {
    let mut s = String::from("time,region,B\n");
    let len = series.iter().map(|b| b.times.len()).max().unwrap_or(0);
    for k in 0..len {
        for b in series {
            if let (Some(t), Some(v)) = (b.times.get(k), b.values.get(k)) {
                s.push_str(&format!("{t},{},{v}\n", b.region));
            }
        }
    }
    s
}

/// Front tracking along one axis of an elongated domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontConfig {
    pub axis: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationSetup {
    pub space: Arc<DgSpace>,
    pub params: ModelParams,
    pub scheme: SchemeConfig,
    pub gamma0: f64,
    pub seed: Region,
    pub seed_value: f64,
    pub regions: Vec<Region>,
    pub q_crit: f64,
    /// Biomarkers are sampled at the initial state, every `stride` steps
    /// and at the final step.
    pub stride: usize,
    pub front: Option<FrontConfig>,
    /// Directory for VTK snapshots written at the sampling stride.
    pub vtk_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    /// One series per configured region, then the whole domain as `global`.
    pub biomarkers: Vec<BiomarkerSeries>,
    pub staging: Staging,
    /// `(t, x*)` for every step at which a front was located.
    pub front_track: Vec<(f64, f64)>,
    pub summary: RunSummary,
    /// Biomarker values outside `[0, 1]`, with their time and region.
    pub biomarker_violations: Vec<(f64, String, f64)>,
}

impl SimulationResult {
    pub fn global_biomarker(&self) -> &BiomarkerSeries {
        self.biomarkers.last().expect("global series is always present")
    }

    pub fn series(&self, region: &str) -> Option<&BiomarkerSeries> {
        self.biomarkers.iter().find(|b| b.region == region)
    }
}

/// Fraction of elements whose averages lie within `tol` (max norm) of the
/// pathological equilibrium.
pub fn equilibrium_fraction(space: &DgSpace, state: &State, params: &ModelParams, tol: f64) -> Result<f64, SimError> {
    let eq = equilibria(params)?.pathological;
    let c = space.cell_averages(&state.c);
    let q = space.cell_averages(&state.q);
    let hits = c.iter().zip(&q).filter(|(c, q)| (*c - eq.c).abs() <= tol && (*q - eq.q).abs() <= tol).count();
    Ok(hits as f64 / c.len() as f64)
}

pub fn simulate(setup: &SimulationSetup) -> Result<SimulationResult, SimError> {
    let space = &setup.space;
    let mesh = space.mesh();
    let mut regions = setup.regions.iter().map(|r| ResolvedRegion::new(r, mesh)).collect::<Result<Vec<_>, _>>()?;
    regions.push(ResolvedRegion::new(&Region::everywhere(), mesh)?);
    let initial = seeded_initial_state(space, &setup.params, &setup.seed, setup.seed_value)?;
    let ops = Operators::assemble(space.clone(), &setup.params, setup.gamma0)?;
    let loads = ProductionLoads::new(space, &setup.params);
    let n_steps = setup.scheme.n_steps()?;
    let stride = setup.stride.max(1);
    let slabs = setup.front.map(|f| crate::mesh::slabs_along(mesh, f.axis));
    if let Some(dir) = &setup.vtk_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut biomarkers: Vec<BiomarkerSeries> = regions.iter().map(|r| BiomarkerSeries::new(r.name.clone())).collect();
    let mut staging = Staging::new(&regions[..regions.len() - 1], setup.q_crit);
    let mut front_track = Vec::new();
    let mut violations = Vec::new();
    let summary = run(&ops, &loads, setup.scheme, initial, |state, info| {
        staging.observe(space, state, &regions[..regions.len() - 1]);
        if let (Some(f), Some(slabs)) = (setup.front, &slabs) {
            let profile = slab_profile(space, &state.q, slabs);
            if let Some(x) = front_position(&profile, f.threshold) {
                front_track.push((state.t, x));
            }
        }
        if info.step % stride == 0 || info.step == n_steps {
            for (series, region) in biomarkers.iter_mut().zip(&regions) {
                let b = biomarker(space, state, region).map_err(|e| e.to_string())?;
                if !(0.0..=1.0).contains(&b) {
                    violations.push((state.t, region.name.clone(), b));
                }
                series.push(state.t, b);
            }
            if let Some(dir) = &setup.vtk_dir {
                let path = dir.join(format!("fields_{:06}.vtk", info.step));
                let file = std::fs::File::create(path).map_err(|e| e.to_string())?;
                write_vtk(std::io::BufWriter::new(file), space, state).map_err(|e| e.to_string())?;
            }
        }
        Ok(())
    })?;
    Ok(SimulationResult { biomarkers, staging, front_track, summary, biomarker_violations: violations })
}

/// Result of comparing a run against one with different extracellular
/// diffusion for each species.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub baseline: BiomarkerSeries,
    pub split: BiomarkerSeries,
    pub baseline_crossing: Option<f64>,
    pub split_crossing: Option<f64>,
}

impl SensitivityReport {
    /// Delay of the split run at `B = 0.5`; positive when it is later.
    pub fn shift(&self) -> Option<f64> {
        Some(self.split_crossing? - self.baseline_crossing?)
    }
}

/// Runs `setup` as given and again with `d_ext_c`, `d_ext_q` replaced,
/// comparing the whole-domain biomarker curves.
pub fn sensitivity_diffusion_split(
    setup: &SimulationSetup,
    d_ext_c: f64,
    d_ext_q: f64,
) -> Result<SensitivityReport, SimError> {
    let base = simulate(setup)?;
    let mut other = setup.clone();
    other.params.d_ext_c = d_ext_c;
    other.params.d_ext_q = d_ext_q;
    other.vtk_dir = None;
    let split = simulate(&other)?;
    Ok(sensitivity_from_runs(&base, &split))
}

pub fn sensitivity_from_runs(base: &SimulationResult, split: &SimulationResult) -> SensitivityReport {
    let baseline = base.global_biomarker().clone();
    let split = split.global_biomarker().clone();
    SensitivityReport {
        baseline_crossing: baseline.crossing_time(0.5),
        split_crossing: split.crossing_time(0.5),
        baseline,
        split,
    }
}

#[cfg(test)]
mod tests;
