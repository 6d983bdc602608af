//! θ-method time integration of the semi-discrete system, solved as one
//! coupled block system per step.
//!
//! The conversion term is linearized with a lagged coefficient: implicit
//! Euler uses `R_N(X^{k-1})`, Crank-Nicolson the extrapolation
//! `R_N((3X^{k-1} - X^{k-2})/4)` on both sides. The first Crank-Nicolson
//! step is an implicit Euler step.

mod solver;

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::dgspace::{
    assemble_diffusion, assemble_forcing, assemble_mass, assemble_reaction, DgError, DgSpace, DiffusionField,
    NonlinearForm, PenaltyField,
};
use crate::kinetics::{diffusion_field, KineticsError, ModelParams, Species};
use crate::sparse::{CsrMatrix, TripletBuilder};
pub use solver::{SolveStats, SolverKind};
use solver::LinearSolver;

#[derive(Debug, Error, PartialEq)]
pub enum StepError {
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("final time {t_final} is not a whole number of steps of {dt}")]
    PartialStep { t_final: f64, dt: f64 },
    #[error("final time must be non-negative, got {0}")]
    InvalidFinalTime(f64),
    #[error("theta must be 1 or 1/2, got {0}")]
    UnsupportedTheta(f64),
    #[error("iterative tolerance must lie in (0, 1e-4], got {0}")]
    InvalidTolerance(f64),
    #[error("linear system is singular (relative residual {residual:e})")]
    Singular { residual: f64 },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("iterative solver stalled after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("state vectors have length {got}, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("step {step} (t = {t}): {source}")]
    AtStep {
        step: usize,
        t: f64,
        #[source]
        source: Box<StepError>,
    },
    #[error("callback failed at step {step}: {message}")]
    Callback { step: usize, message: String },
    #[error(transparent)]
    Space(#[from] DgError),
    #[error(transparent)]
    Model(#[from] KineticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theta {
    /// `θ = 1`.
    ImplicitEuler,
    /// `θ = 1/2`.
    CrankNicolson,
}

impl Theta {
    pub fn from_value(theta: f64) -> Result<Self, StepError> {
        if theta == 1.0 {
            Ok(Theta::ImplicitEuler)
        } else if theta == 0.5 {
            Ok(Theta::CrankNicolson)
        } else {
            Err(StepError::UnsupportedTheta(theta))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Theta::ImplicitEuler => 1.0,
            Theta::CrankNicolson => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub theta: Theta,
    pub dt: f64,
    pub t_final: f64,
    pub solver: SolverKind,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(StepError::InvalidTimeStep(self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(StepError::InvalidFinalTime(self.t_final));
        }
        self.solver.validate()
    }

    /// Number of steps; `t_final / dt` must be an integer up to a few ulps.
    pub fn n_steps(&self) -> Result<usize, StepError> {
        self.validate()?;
        let ratio = self.t_final / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 4.0 * f64::EPSILON * n.max(1.0) {
            return Err(StepError::PartialStep { t_final: self.t_final, dt: self.dt });
        }
        Ok(n as usize)
    }
}

/// Coefficient vectors at time `t`, with the previous step kept for the
/// Crank-Nicolson extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub c: DVector<f64>,
    pub q: DVector<f64>,
    pub t: f64,
    pub previous: Option<(DVector<f64>, DVector<f64>)>,
}

impl State {
    pub fn new(c: DVector<f64>, q: DVector<f64>, t: f64) -> Self {
        State { c, q, t, previous: None }
    }
}

/// Time-independent matrices of the semi-discrete system.
#[derive(Debug, Clone)]
pub struct Operators {
    pub space: Arc<DgSpace>,
    pub mass: CsrMatrix,
    /// `A_c + R_L` for the healthy species.
    pub stiffness_c: CsrMatrix,
    /// `A_q + R̃_L` for the misfolded species.
    pub stiffness_q: CsrMatrix,
    pub nonlinear: NonlinearForm,
    pub diffusion_c: DiffusionField,
    pub diffusion_q: DiffusionField,
    pub penalty_c: PenaltyField,
    pub penalty_q: PenaltyField,
}

impl Operators {
    pub fn assemble(space: Arc<DgSpace>, params: &ModelParams, gamma0: f64) -> Result<Self, StepError> {
        params.validate()?;
        let mesh = space.mesh();
        let ne = mesh.n_elements();
        let diffusion_c = diffusion_field(mesh, params, Species::Healthy)?;
        let diffusion_q = diffusion_field(mesh, params, Species::Misfolded)?;
        let magnitude = vec![params.reaction_magnitude(); ne];
        let (a_c, penalty_c) = assemble_diffusion(&space, &diffusion_c, &magnitude, gamma0)?;
        let (a_q, penalty_q) = assemble_diffusion(&space, &diffusion_q, &magnitude, gamma0)?;
        let r_c = assemble_reaction(&space, &vec![params.k1; ne])?;
        let r_q = assemble_reaction(&space, &vec![params.k1_tilde; ne])?;
        let nonlinear = NonlinearForm::new(&space, &vec![params.k12; ne])?;
        Ok(Operators {
            mass: assemble_mass(&space),
            stiffness_c: CsrMatrix::linear_combination(&[(1.0, &a_c), (1.0, &r_c)]),
            stiffness_q: CsrMatrix::linear_combination(&[(1.0, &a_q), (1.0, &r_q)]),
            nonlinear,
            diffusion_c,
            diffusion_q,
            penalty_c,
            penalty_q,
            space,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }
}

/// Right-hand side loads `(F_c(t), F_q(t))`, including the production term.
pub trait Loads: Sync {
    fn loads(&self, t: f64) -> (DVector<f64>, DVector<f64>);
}

/// Time-independent loads: production `k0` for `c`, nothing for `q`.
#[derive(Debug, Clone)]
pub struct ProductionLoads {
    c: DVector<f64>,
    q: DVector<f64>,
}

impl ProductionLoads {
    pub fn new(space: &DgSpace, params: &ModelParams) -> Self {
        let k0 = params.k0;
        ProductionLoads { c: assemble_forcing(space, |_, _| k0, 0.0), q: DVector::zeros(space.n_dofs()) }
    }
}

impl Loads for ProductionLoads {
    fn loads(&self, _t: f64) -> (DVector<f64>, DVector<f64>) {
        (self.c.clone(), self.q.clone())
    }
}

/// Advances a [`State`] by one step of the configured θ-method.
pub struct ThetaStepper<'a> {
    ops: &'a Operators,
    loads: &'a dyn Loads,
    config: SchemeConfig,
    /// Static part of the block matrix for θ = 1 and θ = 1/2 on the shared pattern.
    static_euler: Vec<f64>,
    static_cn: Vec<f64>,
    pattern: CsrMatrix,
    /// Value positions of the `c`-row/`q`-column and `q`-row/`c`-column
    /// element blocks, row-major per element.
    coupling_cq: Vec<usize>,
    coupling_qc: Vec<usize>,
    solver: LinearSolver,
    cached_loads: Option<(f64, DVector<f64>, DVector<f64>)>,
    last_stats: SolveStats,
}

impl<'a> ThetaStepper<'a> {
    pub fn new(ops: &'a Operators, loads: &'a dyn Loads, config: SchemeConfig) -> Result<Self, StepError> {
        config.validate()?;
        let n = ops.n_dofs();
        let local = ops.space.local_dofs();
        let ne = ops.space.mesh().n_elements();
        let build = |theta: f64| {
            let block_c = CsrMatrix::linear_combination(&[(1.0 / config.dt, &ops.mass), (theta, &ops.stiffness_c)]);
            let block_q = CsrMatrix::linear_combination(&[(1.0 / config.dt, &ops.mass), (theta, &ops.stiffness_q)]);
            let mut b = TripletBuilder::new(2 * n, 2 * n);
            for i in 0..n {
                for (j, v) in block_c.row(i) {
                    b.push(i, j, v);
                }
                for (j, v) in block_q.row(i) {
                    b.push(n + i, n + j, v);
                }
            }
            for e in 0..ne {
                let o = e * local;
                for a in 0..local {
                    for c in 0..local {
                        b.push(o + a, n + o + c, 0.0);
                        b.push(n + o + a, o + c, 0.0);
                    }
                }
            }
            b.build()
        };
        let euler = build(1.0);
        let cn = build(0.5);
        assert_eq!(euler.col_idx(), cn.col_idx());
        let mut coupling_cq = Vec::with_capacity(ne * local * local);
        let mut coupling_qc = Vec::with_capacity(ne * local * local);
        for e in 0..ne {
            let o = e * local;
            for a in 0..local {
                for c in 0..local {
                    coupling_cq.push(euler.index_of(o + a, n + o + c).expect("coupling entry in pattern"));
                    coupling_qc.push(euler.index_of(n + o + a, o + c).expect("coupling entry in pattern"));
                }
            }
        }
        let blocks = (0..ne)
            .map(|e| {
                let o = e * local;
                (o..o + local).chain(n + o..n + o + local).collect()
            })
            .collect();
        let solver = LinearSolver::new(config.solver, &euler, blocks)?;
        Ok(ThetaStepper {
            ops,
            loads,
            config,
            static_euler: euler.values().to_vec(),
            static_cn: cn.values().to_vec(),
            pattern: euler,
            coupling_cq,
            coupling_qc,
            solver,
            cached_loads: None,
            last_stats: SolveStats::default(),
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn last_stats(&self) -> SolveStats {
        self.last_stats
    }

    fn loads_at(&mut self, t: f64) -> (DVector<f64>, DVector<f64>) {
        if let Some((tc, fc, fq)) = &self.cached_loads {
            if *tc == t {
                return (fc.clone(), fq.clone());
            }
        }
        self.loads.loads(t)
    }

    /// One step from `state` to time `t_new`.
    pub fn step(&mut self, state: &State, t_new: f64) -> Result<State, StepError> {
        let n = self.ops.n_dofs();
        for v in [&state.c, &state.q] {
            if v.len() != n {
                return Err(StepError::StateLength { expected: n, got: v.len() });
            }
        }
        let dt = self.config.dt;
        let history = match (self.config.theta, &state.previous) {
            (Theta::CrankNicolson, Some(prev)) => Some(prev),
            _ => None,
        };
        let (psi_c, psi_q) = match history {
            Some((c_prev, q_prev)) => ((&state.c * 3.0 - c_prev) * 0.25, (&state.q * 3.0 - q_prev) * 0.25),
            None => (state.c.clone(), state.q.clone()),
        };
        let blocks_c = self.ops.nonlinear.blocks(&psi_c)?;
        let blocks_q = self.ops.nonlinear.blocks(&psi_q)?;

        let mut matrix = self.pattern.clone();
        let values = matrix.values_mut();
        values.copy_from_slice(if history.is_some() { &self.static_cn } else { &self.static_euler });
        let local = self.ops.space.local_dofs();
        let per = local * local;
        for (e, (bc, bq)) in blocks_c.iter().zip(&blocks_q).enumerate() {
            for a in 0..local {
                for c in 0..local {
                    let k = e * per + a * local + c;
                    values[self.coupling_cq[k]] += bc[(a, c)];
                    values[self.coupling_qc[k]] -= bq[(a, c)];
                }
            }
        }

        let (fc_new, fq_new) = self.loads_at(t_new);
        let m_c = self.ops.mass.mul_vec(&state.c) / dt;
        let m_q = self.ops.mass.mul_vec(&state.q) / dt;
        let (rhs_c, rhs_q) = match history {
            None => (&fc_new + m_c, &fq_new + m_q),
            Some(_) => {
                let (fc_old, fq_old) = self.loads_at(state.t);
                let nl_c = self.ops.nonlinear.apply(&psi_c, &state.q)?;
                let nl_q = self.ops.nonlinear.apply(&psi_q, &state.c)?;
                let rc = (&fc_new + fc_old) * 0.5 + m_c - self.ops.stiffness_c.mul_vec(&state.c) * 0.5 - nl_c;
                let rq = (&fq_new + fq_old) * 0.5 + m_q - self.ops.stiffness_q.mul_vec(&state.q) * 0.5 + nl_q;
                (rc, rq)
            }
        };
        self.cached_loads = Some((t_new, fc_new, fq_new));
        let rhs = DVector::from_iterator(2 * n, rhs_c.iter().chain(rhs_q.iter()).copied());
        let guess = DVector::from_iterator(2 * n, state.c.iter().chain(state.q.iter()).copied());
        let (x, stats) = self.solver.solve(&matrix, &rhs, &guess)?;
        self.last_stats = stats;
        Ok(State {
            c: x.rows(0, n).clone_owned(),
            q: x.rows(n, n).clone_owned(),
            t: t_new,
            previous: Some((state.c.clone(), state.q.clone())),
        })
    }
}

/// Per-step information handed to run callbacks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub stats: SolveStats,
    /// Smallest element average of `c` and `q`; negative values are undershoots.
    pub min_c: f64,
    pub min_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_state: State,
    pub n_steps: usize,
    /// Most negative element averages seen over the run (0 if none).
    pub worst_undershoot_c: f64,
    pub worst_undershoot_q: f64,
    pub max_residual: f64,
}

fn min_average(space: &DgSpace, v: &DVector<f64>) -> f64 {
    space.cell_averages(v).into_iter().fold(f64::INFINITY, f64::min)
}

/// Integrates from `initial` to `initial.t + t_final`. The callback sees the
/// initial state (step 0) and every subsequent state in order.
pub fn run<F>(
    ops: &Operators,
    loads: &dyn Loads,
    config: SchemeConfig,
    initial: State,
    mut callback: F,
) -> Result<RunSummary, StepError>
where
    F: FnMut(&State, &StepInfo) -> Result<(), String>,
{
    let n_steps = config.n_steps()?;
    let mut stepper = ThetaStepper::new(ops, loads, config)?;
    let space = &ops.space;
    let t0 = initial.t;
    let mut state = initial;
    let mut info = StepInfo {
        step: 0,
        stats: SolveStats::default(),
        min_c: min_average(space, &state.c),
        min_q: min_average(space, &state.q),
    };
    let mut worst_c = info.min_c.min(0.0);
    let mut worst_q = info.min_q.min(0.0);
    let mut max_residual: f64 = 0.0;
    callback(&state, &info).map_err(|message| StepError::Callback { step: 0, message })?;
    for k in 1..=n_steps {
        let t_new = t0 + k as f64 * config.dt;
        state = stepper
            .step(&state, t_new)
            .map_err(|e| StepError::AtStep { step: k, t: t_new, source: Box::new(e) })?;
        info = StepInfo {
            step: k,
            stats: stepper.last_stats(),
            min_c: min_average(space, &state.c),
            min_q: min_average(space, &state.q),
        };
        worst_c = worst_c.min(info.min_c);
        worst_q = worst_q.min(info.min_q);
        max_residual = max_residual.max(info.stats.residual);
        callback(&state, &info).map_err(|message| StepError::Callback { step: k, message })?;
    }
    Ok(RunSummary {
        final_state: state,
        n_steps,
        worst_undershoot_c: worst_c,
        worst_undershoot_q: worst_q,
        max_residual,
    })
}
