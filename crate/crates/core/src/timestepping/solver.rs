//! Linear solvers for the coupled block system.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::StepError;
use crate::sparse::CsrMatrix;

/// Which linear solver a stepper uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    /// Sparse LU; the symbolic factorization is reused across steps.
    Direct,
    /// BiCGStab with an element-block Jacobi preconditioner.
    Iterative { tolerance: f64, max_iterations: usize },
}

impl SolverKind {
    pub fn iterative(tolerance: f64) -> Self {
        SolverKind::Iterative { tolerance, max_iterations: 5000 }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        match *self {
            SolverKind::Direct => Ok(()),
            SolverKind::Iterative { tolerance, max_iterations } => {
                if !(tolerance > 0.0 && tolerance <= 1e-4) || max_iterations == 0 {
                    Err(StepError::InvalidTolerance(tolerance))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Relative residual of the last solve and iterations used (1 for direct).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub residual: f64,
    pub iterations: usize,
}

pub(crate) enum LinearSolver {
    Direct(DirectSolver),
    Iterative(IterativeSolver),
}

impl LinearSolver {
    /// `blocks` lists, per element, the global dofs coupled in one
    /// preconditioner block.
    pub fn new(kind: SolverKind, pattern: &CsrMatrix, blocks: Vec<Vec<usize>>) -> Result<Self, StepError> {
        kind.validate()?;
        Ok(match kind {
            SolverKind::Direct => LinearSolver::Direct(DirectSolver::new(pattern)?),
            SolverKind::Iterative { tolerance, max_iterations } => {
                LinearSolver::Iterative(IterativeSolver { tolerance, max_iterations, blocks })
            }
        })
    }

    pub fn solve(
        &mut self,
        matrix: &CsrMatrix,
        rhs: &DVector<f64>,
        guess: &DVector<f64>,
    ) -> Result<(DVector<f64>, SolveStats), StepError> {
        match self {
            LinearSolver::Direct(d) => d.solve(matrix, rhs),
            LinearSolver::Iterative(it) => it.solve(matrix, rhs, guess),
        }
    }
}

pub(crate) struct DirectSolver {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Position in the column-compressed arrays of each row-compressed entry.
    to_csc: Vec<usize>,
    csc_values: Vec<f64>,
    symbolic: SymbolicLu<usize>,
}

impl DirectSolver {
    fn new(pattern: &CsrMatrix) -> Result<Self, StepError> {
        let n = pattern.nrows();
        let mut counts = vec![0usize; n + 1];
        for &j in pattern.col_idx() {
            counts[j + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0usize; pattern.nnz()];
        let mut to_csc = vec![0usize; pattern.nnz()];
        for i in 0..n {
            let row = pattern.row_ptr()[i]..pattern.row_ptr()[i + 1];
            for (slot, &j) in to_csc[row.clone()].iter_mut().zip(&pattern.col_idx()[row]) {
                row_idx[next[j]] = i;
                *slot = next[j];
                next[j] += 1;
            }
        }
        let symbolic = {
            let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
            SymbolicLu::try_new(sym).map_err(|e| StepError::Factorization(format!("{e:?}")))?
        };
        Ok(DirectSolver { n, col_ptr, row_idx, to_csc, csc_values: vec![0.0; pattern.nnz()], symbolic })
    }

    fn solve(&mut self, matrix: &CsrMatrix, rhs: &DVector<f64>) -> Result<(DVector<f64>, SolveStats), StepError> {
        assert_eq!(matrix.nnz(), self.to_csc.len(), "matrix pattern changed");
        for (k, v) in matrix.values().iter().enumerate() {
            self.csc_values[self.to_csc[k]] = *v;
        }
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        let mat = SparseColMatRef::new(sym, &self.csc_values);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat)
            .map_err(|e| StepError::Factorization(format!("{e:?}")))?;
        let mut x = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        lu.solve_in_place(x.as_mut());
        let sol = DVector::from_fn(self.n, |i, _| x[(i, 0)]);
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(StepError::Singular { residual: f64::NAN });
        }
        let residual = relative_residual(matrix, &sol, rhs);
        if !(residual < 1e-8) {
            return Err(StepError::Singular { residual });
        }
        Ok((sol, SolveStats { residual, iterations: 1 }))
    }
}

fn relative_residual(matrix: &CsrMatrix, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = b - matrix.mul_vec(x);
    let bn = b.norm();
    if bn == 0.0 {
        r.norm()
    } else {
        r.norm() / bn
    }
}

pub(crate) struct IterativeSolver {
    tolerance: f64,
    max_iterations: usize,
    blocks: Vec<Vec<usize>>,
}

struct BlockJacobi<'a> {
    blocks: &'a [Vec<usize>],
    inverses: Vec<DMatrix<f64>>,
}

impl<'a> BlockJacobi<'a> {
    fn new(matrix: &CsrMatrix, blocks: &'a [Vec<usize>]) -> Result<Self, StepError> {
        let inverses = blocks
            .par_iter()
            .map(|dofs| {
                let m = dofs.len();
                let mut local = DMatrix::zeros(m, m);
                for (a, &i) in dofs.iter().enumerate() {
                    for (b, &j) in dofs.iter().enumerate() {
                        local[(a, b)] = matrix.get(i, j);
                    }
                }
                local.try_inverse().ok_or(StepError::Singular { residual: f64::NAN })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BlockJacobi { blocks, inverses })
    }

    fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        let parts: Vec<DVector<f64>> = self
            .blocks
            .par_iter()
            .zip(&self.inverses)
            .map(|(dofs, inv)| inv * DVector::from_iterator(dofs.len(), dofs.iter().map(|&i| r[i])))
            .collect();
        let mut z = DVector::zeros(r.len());
        for (dofs, part) in self.blocks.iter().zip(parts) {
            for (a, &i) in dofs.iter().enumerate() {
                z[i] = part[a];
            }
        }
        z
    }
}

impl IterativeSolver {
    /// Right-preconditioned BiCGStab.
    fn solve(
        &mut self,
        matrix: &CsrMatrix,
        b: &DVector<f64>,
        guess: &DVector<f64>,
    ) -> Result<(DVector<f64>, SolveStats), StepError> {
        let pre = BlockJacobi::new(matrix, &self.blocks)?;
        let bn = b.norm();
        let mut x = guess.clone();
        if bn == 0.0 {
            return Ok((DVector::zeros(b.len()), SolveStats::default()));
        }
        let mut r = b - matrix.mul_vec(&x);
        let r0 = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = DVector::zeros(b.len());
        let mut p = DVector::zeros(b.len());
        for it in 0..self.max_iterations {
            let res = r.norm() / bn;
            if res <= self.tolerance {
                return Ok((x, SolveStats { residual: res, iterations: it }));
            }
            let rho_new = r0.dot(&r);
            if rho_new == 0.0 || omega == 0.0 {
                return Err(StepError::NotConverged { iterations: it, residual: res });
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            p = &r + (&p - &v * omega) * beta;
            let ph = pre.apply(&p);
            v = matrix.mul_vec(&ph);
            alpha = rho / r0.dot(&v);
            let s = &r - &v * alpha;
            if s.norm() / bn <= self.tolerance {
                x += ph * alpha;
                let res = relative_residual(matrix, &x, b);
                return Ok((x, SolveStats { residual: res, iterations: it + 1 }));
            }
            let sh = pre.apply(&s);
            let t = matrix.mul_vec(&sh);
            let tt = t.dot(&t);
            omega = if tt == 0.0 { 0.0 } else { t.dot(&s) / tt };
            x += ph * alpha + &sh * omega;
            r = s - t * omega;
        }
        let res = relative_residual(matrix, &x, b);
        if res <= self.tolerance {
            Ok((x, SolveStats { residual: res, iterations: self.max_iterations }))
        } else {
            Err(StepError::NotConverged { iterations: self.max_iterations, residual: res })
        }
    }
}
