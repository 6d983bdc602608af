//! Manufactured-solution runs, error norms and convergence tables.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::dgspace::{
    assemble_dirichlet_load, assemble_forcing, norm_parts, project_l2, DgSpace, EnergyAccumulator, EnergyVariant,
    ExactField,
};
use crate::kinetics::ModelParams;
use crate::mesh::{build_cartesian_grid, BoundaryKind, BoundingBox, MeshError, Point};
use crate::timestepping::{run, Loads, Operators, SchemeConfig, State, StepError};

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("the manufactured forcing assumes isotropic diffusion (d_axn = 0), got d_axn = {0}")]
    Anisotropic(f64),
    #[error("a study needs at least one level")]
    NoLevels,
    #[error("levels must refine monotonically: {0}")]
    NonMonotoneLevels(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `c = cos t Σ cos(2π x_i)`, `q = (Π cos(6π x_i) + 2) e^{-t}` on the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManufacturedCase {
    pub dim: usize,
}

impl ManufacturedCase {
    pub fn new(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
        ManufacturedCase { dim }
    }

    fn cos_sum(&self, x: &Point) -> f64 {
        (0..self.dim).map(|i| (2.0 * PI * x[i]).cos()).sum()
    }

    fn cos_product(&self, x: &Point) -> f64 {
        (0..self.dim).map(|i| (6.0 * PI * x[i]).cos()).product()
    }

    pub fn c(&self, x: &Point, t: f64) -> f64 {
        t.cos() * self.cos_sum(x)
    }

    pub fn q(&self, x: &Point, t: f64) -> f64 {
        (self.cos_product(x) + 2.0) * (-t).exp()
    }

    pub fn grad_c(&self, x: &Point, t: f64) -> Point {
        let mut g = Point::zeros();
        for i in 0..self.dim {
            g[i] = -2.0 * PI * (2.0 * PI * x[i]).sin() * t.cos();
        }
        g
    }

    pub fn grad_q(&self, x: &Point, t: f64) -> Point {
        let mut g = Point::zeros();
        for i in 0..self.dim {
            let others: f64 = (0..self.dim).filter(|&j| j != i).map(|j| (6.0 * PI * x[j]).cos()).product();
            g[i] = -6.0 * PI * (6.0 * PI * x[i]).sin() * others * (-t).exp();
        }
        g
    }

    pub fn exact(&self, x: &Point, t: f64) -> (f64, f64) {
        (self.c(x, t), self.q(x, t))
    }

    /// Right-hand sides making the pair an exact solution for isotropic
    /// diffusion with coefficients `d_ext_c`, `d_ext_q`.
    pub fn forcing(&self, params: &ModelParams, x: &Point, t: f64) -> Result<(f64, f64), VerificationError> {
        if params.d_axn != 0.0 {
            return Err(VerificationError::Anisotropic(params.d_axn));
        }
        let c = self.c(x, t);
        let q = self.q(x, t);
        let c_t = -t.sin() * self.cos_sum(x);
        let q_t = -q;
        let lap_c = -4.0 * PI * PI * c;
        let lap_q = -36.0 * PI * PI * self.dim as f64 * self.cos_product(x) * (-t).exp();
        let f_c = c_t - params.d_ext_c * lap_c + params.k1 * c + params.k12 * c * q - params.k0;
        let f_q = q_t - params.d_ext_q * lap_q + params.k1_tilde * q - params.k12 * c * q;
        Ok((f_c, f_q))
    }

    /// The exact field of one species frozen at time `t`.
    pub fn snapshot(&self, species: Component, t: f64) -> Snapshot {
        Snapshot { case: *self, species, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    C,
    Q,
}

#[derive(Debug, Clone, Copy)]
pub struct Snapshot {
    case: ManufacturedCase,
    species: Component,
    t: f64,
}

impl ExactField for Snapshot {
    fn value(&self, x: &Point) -> f64 {
        match self.species {
            Component::C => self.case.c(x, self.t),
            Component::Q => self.case.q(x, self.t),
        }
    }

    fn gradient(&self, x: &Point) -> Point {
        match self.species {
            Component::C => self.case.grad_c(x, self.t),
            Component::Q => self.case.grad_q(x, self.t),
        }
    }
}

/// Loads for the manufactured problem: production, forcing and weak
/// Dirichlet data from the exact solution.
pub struct ManufacturedLoads<'a> {
    case: ManufacturedCase,
    params: ModelParams,
    ops: &'a Operators,
}

impl<'a> ManufacturedLoads<'a> {
    pub fn new(case: ManufacturedCase, params: &ModelParams, ops: &'a Operators) -> Result<Self, VerificationError> {
        if params.d_axn != 0.0 {
            return Err(VerificationError::Anisotropic(params.d_axn));
        }
        Ok(ManufacturedLoads { case, params: params.clone(), ops })
    }
}

impl Loads for ManufacturedLoads<'_> {
    fn loads(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let space = &self.ops.space;
        let (case, p) = (self.case, &self.params);
        let fc = assemble_forcing(space, |x, t| p.k0 + case.forcing(p, x, t).map_or(f64::NAN, |f| f.0), t);
        let fq = assemble_forcing(space, |x, t| case.forcing(p, x, t).map_or(f64::NAN, |f| f.1), t);
        let gc = assemble_dirichlet_load(space, |x, t| case.c(x, t), t, &self.ops.diffusion_c, &self.ops.penalty_c);
        let gq = assemble_dirichlet_load(space, |x, t| case.q(x, t), t, &self.ops.diffusion_q, &self.ops.penalty_q);
        (fc + gc, fq + gq)
    }
}

/// Numerical settings of a manufactured run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub scheme: SchemeConfig,
    pub gamma0: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpeciesErrors {
    pub l2: f64,
    pub dg: f64,
    /// `(‖w(T)‖² + ∫ |||w|||² dt)^{1/2}` with the triple norm.
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedErrors {
    pub h: f64,
    pub degree: usize,
    pub n_dofs: usize,
    pub c: SpeciesErrors,
    pub q: SpeciesErrors,
}

fn unit_grid(dim: usize, cells: usize) -> Result<crate::mesh::PolyMesh, VerificationError> {
    let grid = build_cartesian_grid(dim, &vec![cells; dim], &BoundingBox::unit(dim))?;
    Ok(grid.tag_boundary(|_| BoundaryKind::Dirichlet))
}

/// Runs the manufactured problem on `space` (boundary faces tagged
/// Dirichlet) and measures errors at the final time with order `2p + 2`.
pub fn run_manufactured(
    case: ManufacturedCase,
    space: Arc<DgSpace>,
    params: &ModelParams,
    numerics: &Numerics,
) -> Result<ManufacturedErrors, VerificationError> {
    let ops = Operators::assemble(space.clone(), params, numerics.gamma0)?;
    let loads = ManufacturedLoads::new(case, params, &ops)?;
    let c0 = project_l2(&space, |x| case.c(x, 0.0));
    let q0 = project_l2(&space, |x| case.q(x, 0.0));
    let order = 2 * space.degree() + 2;
    let mut acc_c = EnergyAccumulator::new(EnergyVariant::Triple);
    let mut acc_q = EnergyAccumulator::new(EnergyVariant::Triple);
    let mut last = (Default::default(), Default::default());
    run(&ops, &loads, numerics.scheme, State::new(c0, q0, 0.0), |state, _| {
        let pc = norm_parts(&space, &state.c, &case.snapshot(Component::C, state.t), &ops.diffusion_c, &ops.penalty_c, order)
            .map_err(|e| e.to_string())?;
        let pq = norm_parts(&space, &state.q, &case.snapshot(Component::Q, state.t), &ops.diffusion_q, &ops.penalty_q, order)
            .map_err(|e| e.to_string())?;
        acc_c.push(state.t, &pc);
        acc_q.push(state.t, &pq);
        last = (pc, pq);
        Ok(())
    })?;
    let energy = |acc: &EnergyAccumulator| if acc.len() < 2 { Ok(0.0) } else { acc.finish() };
    let (pc, pq) = last;
    let (ec, eq) = (energy(&acc_c).map_err(StepError::from)?, energy(&acc_q).map_err(StepError::from)?);
    Ok(ManufacturedErrors {
        h: space.mesh().mesh_size(),
        degree: space.degree(),
        n_dofs: space.n_dofs(),
        c: SpeciesErrors { l2: pc.l2(), dg: pc.dg(), energy: ec },
        q: SpeciesErrors { l2: pq.l2(), dg: pq.dg(), energy: eq },
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StudyMode {
    /// Fixed degree, uniform grids with the given cells per axis.
    H { degree: usize, cells: Vec<usize> },
    /// Fixed grid, increasing degrees.
    P { cells: usize, degrees: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub level: usize,
    /// Mesh size in h-mode, degree in p-mode.
    pub h_or_p: f64,
    pub errors: ManufacturedErrors,
    /// Energy-norm slopes against the previous level.
    pub slope_c: Option<f64>,
    pub slope_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub mode: StudyMode,
    pub rows: Vec<RateRow>,
}

/// A violated rate expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateViolation {
    pub level: usize,
    pub message: String,
}

type Select = fn(&ManufacturedErrors) -> f64;

impl RateTable {
    fn is_h(&self) -> bool {
        matches!(self.mode, StudyMode::H { .. })
    }

    /// Slope between consecutive levels: `ln(e_prev/e)/ln(h_prev/h)` in
    /// h-mode, `ln(e_prev/e)` per unit degree in p-mode.
    pub fn slopes(&self, select: Select) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| {
                let ratio = (select(&w[0].errors) / select(&w[1].errors)).ln();
                if self.is_h() {
                    ratio / (w[0].h_or_p / w[1].h_or_p).ln()
                } else {
                    ratio / (w[1].h_or_p - w[0].h_or_p)
                }
            })
            .collect()
    }

    /// Least-squares slope of `ln e` against `ln h` over all levels.
    pub fn fitted_slope(&self, select: Select) -> Option<f64> {
        let xs: Vec<f64> = self.rows.iter().map(|r| -r.h_or_p.ln()).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| -select(&r.errors).ln()).collect();
        log_linear_fit(&xs, &ys).map(|f| f.slope)
    }

    fn check_fitted(&self, select: Select, min: f64, label: &str, out: &mut Vec<RateViolation>) {
        match self.fitted_slope(select) {
            Some(s) if s >= min => {}
            Some(s) => out.push(RateViolation { level: 0, message: format!("{label} fitted slope {s:.3} < {min:.3}") }),
            None => out.push(RateViolation { level: 0, message: format!("{label} slope needs at least two levels") }),
        }
    }

    /// h-mode expectations: fitted energy slopes `>= p - 0.2`, optional
    /// fitted L² slopes, and q errors above c errors at every level.
    pub fn check_h_rates(&self, min_l2_slope: Option<f64>) -> Vec<RateViolation> {
        let mut out = Vec::new();
        let StudyMode::H { degree, .. } = self.mode else {
            return vec![RateViolation { level: 0, message: "not an h-refinement table".into() }];
        };
        let min = degree as f64 - 0.2;
        self.check_fitted(|e| e.c.energy, min, "c energy", &mut out);
        self.check_fitted(|e| e.q.energy, min, "q energy", &mut out);
        if let Some(m) = min_l2_slope {
            self.check_fitted(|e| e.c.l2, m, "c L2", &mut out);
            self.check_fitted(|e| e.q.l2, m, "q L2", &mut out);
        }
        self.check_q_above_c(&mut out);
        out
    }

    fn check_q_above_c(&self, out: &mut Vec<RateViolation>) {
        for r in &self.rows {
            if !(r.errors.q.energy > r.errors.c.energy) {
                out.push(RateViolation { level: r.level, message: "q energy error not above c energy error".into() });
            }
        }
    }

    /// p-mode expectations: strictly decreasing errors in every norm and an
    /// approximately log-linear decay (`R² >= min_r2`) of the energy error.
    pub fn check_p_rates(&self, min_r2: f64) -> Vec<RateViolation> {
        let mut out = Vec::new();
        let selectors: [(Select, &str); 6] = [
            (|e| e.c.l2, "c L2"),
            (|e| e.q.l2, "q L2"),
            (|e| e.c.dg, "c DG"),
            (|e| e.q.dg, "q DG"),
            (|e| e.c.energy, "c energy"),
            (|e| e.q.energy, "q energy"),
        ];
        for (select, label) in selectors {
            for w in self.rows.windows(2) {
                if !(select(&w[1].errors) < select(&w[0].errors)) {
                    out.push(RateViolation { level: w[1].level, message: format!("{label} error did not decrease") });
                }
            }
        }
        for (select, label) in [selectors[4], selectors[5]] {
            let xs: Vec<f64> = self.rows.iter().map(|r| r.h_or_p).collect();
            let ys: Vec<f64> = self.rows.iter().map(|r| select(&r.errors).ln()).collect();
            if let Some(fit) = log_linear_fit(&xs, &ys) {
                if !(fit.r2 >= min_r2 && fit.slope < 0.0) {
                    out.push(RateViolation {
                        level: 0,
                        message: format!("{label} log-error vs p not linear enough (R² = {:.3})", fit.r2),
                    });
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h_or_p,err_c_L2,err_q_L2,err_c_DG,err_q_DG,err_c_energy,err_q_energy,slope_c,slope_q\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        for r in &self.rows {
            let e = &r.errors;
            let _ = writeln!(
                s,
                "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{},{}",
                r.level,
                r.h_or_p,
                e.c.l2,
                e.q.l2,
                e.c.dg,
                e.q.dg,
                e.c.energy,
                e.q.energy,
                opt(r.slope_c),
                opt(r.slope_q)
            );
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_csv().as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x, y)`; `None` with fewer than two points.
pub fn log_linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept: my - slope * mx, r2 })
}

/// Runs every level of a study on the unit box with all-Dirichlet data.
/// `progress` is called after each level.
pub fn convergence_study<P>(
    case: ManufacturedCase,
    mode: StudyMode,
    params: &ModelParams,
    numerics: &Numerics,
    mut progress: P,
) -> Result<RateTable, VerificationError>
where
    P: FnMut(&RateRow),
{
    let levels: Vec<(usize, usize)> = match &mode {
        StudyMode::H { degree, cells } => cells.iter().map(|&n| (n, *degree)).collect(),
        StudyMode::P { cells, degrees } => degrees.iter().map(|&p| (*cells, p)).collect(),
    };
    if levels.is_empty() {
        return Err(VerificationError::NoLevels);
    }
    let increasing = |v: Vec<usize>| v.windows(2).all(|w| w[1] > w[0]);
    match &mode {
        StudyMode::H { cells, .. } if !increasing(cells.clone()) => {
            return Err(VerificationError::NonMonotoneLevels(format!("cells {cells:?}")))
        }
        StudyMode::P { degrees, .. } if !increasing(degrees.clone()) => {
            return Err(VerificationError::NonMonotoneLevels(format!("degrees {degrees:?}")))
        }
        _ => {}
    }
    let mut table = RateTable { mode: mode.clone(), rows: Vec::new() };
    for (level, (cells, degree)) in levels.into_iter().enumerate() {
        let mesh = Arc::new(unit_grid(case.dim, cells)?);
        let space = Arc::new(DgSpace::new(mesh, degree).map_err(StepError::from)?);
        let errors = run_manufactured(case, space, params, numerics)?;
        let h_or_p = if table.is_h() { errors.h } else { degree as f64 };
        table.rows.push(RateRow { level, h_or_p, errors, slope_c: None, slope_q: None });
        let sc = table.slopes(|e| e.c.energy);
        let sq = table.slopes(|e| e.q.energy);
        let row = table.rows.last_mut().expect("row just pushed");
        row.slope_c = sc.last().copied();
        row.slope_q = sq.last().copied();
        progress(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgspace::{norm_dg, ZeroField};
    use crate::timestepping::{SolverKind, Theta};

    #[test]
    fn exact_values() {
        let c3 = ManufacturedCase::new(3);
        assert_eq!(c3.exact(&Point::zeros(), 0.0), (3.0, 3.0));
        let c2 = ManufacturedCase::new(2);
        let (c, q) = c2.exact(&Point::new(0.25, 0.25, 0.0), 0.0);
        assert!(c.abs() < 1e-15 && (q - 2.0).abs() < 1e-15);
        let x = Point::new(0.1, 0.7, 0.0);
        assert!((c2.q(&x, 1.3) - c2.q(&x, 0.0) * (-1.3f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn forcing_examples() {
        let p = ModelParams::reference();
        let (fc, _) = ManufacturedCase::new(3).forcing(&p, &Point::zeros(), 0.0).unwrap();
        assert!((fc - (96.0 * PI * PI + 9.9)).abs() < 1e-10);
        let bare = ModelParams { k0: 0.0, k1: 0.0, k12: 0.0, d_ext_c: 0.0, ..p.clone() };
        let case = ManufacturedCase::new(2);
        let x = Point::new(0.3, 0.1, 0.0);
        let (fc, _) = case.forcing(&bare, &x, 0.8).unwrap();
        assert!((fc + 0.8f64.sin() * ((0.6 * PI).cos() + (0.2 * PI).cos())).abs() < 1e-14);
        assert!(case.forcing(&ModelParams { d_axn: 1.0, ..p }, &x, 0.0).is_err());
    }

    /// Residual of the PDE by central differences in space and time.
    fn fd_residual(case: &ManufacturedCase, p: &ModelParams, x: &Point, t: f64) -> (f64, f64) {
        let h = 1e-5;
        let (c, q) = case.exact(x, t);
        let c_t = (case.c(x, t + h) - case.c(x, t - h)) / (2.0 * h);
        let q_t = (case.q(x, t + h) - case.q(x, t - h)) / (2.0 * h);
        let (mut lap_c, mut lap_q) = (0.0, 0.0);
        for i in 0..case.dim {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += h;
            xm[i] -= h;
            lap_c += (case.c(&xp, t) - 2.0 * c + case.c(&xm, t)) / (h * h);
            lap_q += (case.q(&xp, t) - 2.0 * q + case.q(&xm, t)) / (h * h);
        }
        (
            c_t - p.d_ext_c * lap_c + p.k1 * c + p.k12 * c * q - p.k0,
            q_t - p.d_ext_q * lap_q + p.k1_tilde * q - p.k12 * c * q,
        )
    }

    proptest::proptest! {
        #[test]
        fn forcing_matches_finite_differences(
            dim in 2usize..=3,
            xs in proptest::array::uniform3(0.0f64..1.0),
            t in 0.0f64..1.0,
        ) {
            let p = ModelParams::reference();
            let case = ManufacturedCase::new(dim);
            let x = Point::new(xs[0], xs[1], if dim == 3 { xs[2] } else { 0.0 });
            let (fc, fq) = case.forcing(&p, &x, t).unwrap();
            let (rc, rq) = fd_residual(&case, &p, &x, t);
            // second differences at h = 1e-5 carry rounding of order
            // ε/h² per mode, so compare against the diffusion term scale
            let scale_c = 1.0 + p.d_ext_c * 4.0 * PI * PI * dim as f64;
            let scale_q = 1.0 + p.d_ext_q * 36.0 * PI * PI * dim as f64 * 3.0;
            proptest::prop_assert!((fc - rc).abs() < 1e-6 * scale_c, "fc {} vs {}", fc, rc);
            proptest::prop_assert!((fq - rq).abs() < 1e-6 * scale_q, "fq {} vs {}", fq, rq);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let case = ManufacturedCase::new(3);
        for k in 0..20 {
            let s = k as f64 / 20.0;
            let x = Point::new(0.05 + 0.9 * s, (0.3 + 0.7 * s * s) % 1.0, (0.9 - 0.8 * s).abs());
            let t = 0.5 * s;
            let (gc, gq) = (case.grad_c(&x, t), case.grad_q(&x, t));
            for i in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += 1e-6;
                xm[i] -= 1e-6;
                assert!((gc[i] - (case.c(&xp, t) - case.c(&xm, t)) / 2e-6).abs() < 1e-6);
                assert!((gq[i] - (case.q(&xp, t) - case.q(&xm, t)) / 2e-6).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn projection_error_decreases_with_degree() {
        let case = ManufacturedCase::new(2);
        let mesh = Arc::new(unit_grid(2, 4).unwrap());
        let mut last = f64::INFINITY;
        for p in 1..=4 {
            let space = DgSpace::new(mesh.clone(), p).unwrap();
            let coeffs = project_l2(&space, |x| case.q(x, 0.0));
            let d = crate::kinetics::diffusion_field(&mesh, &ModelParams::reference(), crate::kinetics::Species::Misfolded).unwrap();
            let field = crate::dgspace::compute_penalty(&space, &d, &[1.6; 16], 10.0).unwrap();
            let parts = norm_parts(&space, &coeffs, &case.snapshot(Component::Q, 0.0), &d, &field, 2 * p + 2).unwrap();
            assert!(parts.l2() > 0.0 && parts.l2() < last, "p={p}");
            last = parts.l2();
            assert!(norm_dg(&space, &coeffs, &ZeroField, &d, &field).unwrap() > 0.0);
        }
    }

    fn numerics() -> Numerics {
        Numerics {
            scheme: SchemeConfig { theta: Theta::CrankNicolson, dt: 5e-6, t_final: 5e-5, solver: SolverKind::iterative(1e-10) },
            gamma0: 10.0,
        }
    }

    #[test]
    fn small_h_study_converges() {
        let table = convergence_study(
            ManufacturedCase::new(2),
            StudyMode::H { degree: 2, cells: vec![8, 16, 32] },
            &ModelParams::reference(),
            &numerics(),
            |_| {},
        )
        .unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.rows[0].slope_c.is_none() && table.rows[2].slope_q.is_some());
        let violations = table.check_h_rates(None);
        assert!(violations.is_empty(), "{violations:?}");
        let csv = table.to_csv();
        assert!(csv.starts_with("level,h_or_p,err_c_L2,err_q_L2,err_c_DG,err_q_DG,err_c_energy,err_q_energy,slope_c,slope_q\n"));
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().ends_with(",,"));
    }

    #[test]
    fn study_rejects_bad_levels() {
        let p = ModelParams::reference();
        let err = convergence_study(ManufacturedCase::new(2), StudyMode::H { degree: 1, cells: vec![8, 4] }, &p, &numerics(), |_| {});
        assert!(matches!(err, Err(VerificationError::NonMonotoneLevels(_))));
        let err = convergence_study(ManufacturedCase::new(2), StudyMode::P { cells: 4, degrees: vec![] }, &p, &numerics(), |_| {});
        assert!(matches!(err, Err(VerificationError::NoLevels)));
    }

    #[test]
    fn linear_fit() {
        let fit = log_linear_fit(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14 && (fit.intercept + 1.0).abs() < 1e-14 && (fit.r2 - 1.0).abs() < 1e-14);
        assert!(log_linear_fit(&[1.0], &[1.0]).is_none());
    }
}
