//! Discontinuous polynomial spaces on polytopal meshes, operator assembly
//! and discrete norms.

mod assembly;
mod basis;
mod norms;
pub mod quadrature;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::{PolyMesh, Point};
pub use assembly::{
    assemble_diffusion, assemble_diffusion_parts, assemble_dirichlet_load, assemble_forcing, assemble_mass,
    assemble_reaction, compute_penalty, project_l2, DiffusionField, DiffusionParts, NonlinearForm, PenaltyField,
};
pub use basis::{dofs_per_element, multi_indices, ElementBasis};
pub use norms::{energy_norm, norm_dg, norm_parts, EnergyAccumulator, EnergyVariant, ExactField, NormParts, ZeroField};
use quadrature::QuadratureRule;

/// Largest supported local space; bounded by the fixed evaluation buffers.
const MAX_LOCAL_DOFS: usize = 64;
const MAX_DEGREE: usize = 15;

#[derive(Debug, Error, PartialEq)]
pub enum DgError {
    #[error("polynomial degree must be at least 1")]
    ZeroDegree,
    #[error("polynomial degree {degree} too high in {dim}D")]
    DegreeTooHigh { degree: usize, dim: usize },
    #[error("basis orthonormalization failed on element {0}")]
    Orthonormalization(usize),
    #[error("diffusion tensor on element {0} is not symmetric positive definite")]
    NonSpdTensor(usize),
    #[error("penalty constant gamma0 must be positive, got {0}")]
    NonPositivePenalty(f64),
    #[error("reaction coefficient on element {element} is negative ({value})")]
    NegativeCoefficient { element: usize, value: f64 },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least two snapshots for the time integral, got {0}")]
    TooFewSnapshots(usize),
}

/// The broken polynomial space of total degree `p` over a mesh.
#[derive(Debug, Clone)]
pub struct DgSpace {
    mesh: Arc<PolyMesh>,
    degree: usize,
    local: usize,
    bases: Vec<ElementBasis>,
    /// `∫_K φ_i` per element.
    moments: Vec<DVector<f64>>,
}

impl DgSpace {
    pub fn new(mesh: Arc<PolyMesh>, degree: usize) -> Result<Self, DgError> {
        if degree == 0 {
            return Err(DgError::ZeroDegree);
        }
        let dim = mesh.dim();
        let local = dofs_per_element(dim, degree);
        if local > MAX_LOCAL_DOFS || degree > MAX_DEGREE {
            return Err(DgError::DegreeTooHigh { degree, dim });
        }
        let built: Result<Vec<(ElementBasis, DVector<f64>)>, DgError> = mesh
            .elements()
            .par_iter()
            .enumerate()
            .map(|(e, el)| {
                let rule = quadrature::element_rule(&mesh, el, 2 * degree);
                let basis = ElementBasis::new(dim, degree, el, &rule).ok_or(DgError::Orthonormalization(e))?;
                let mut moments = DVector::zeros(local);
                let mut vals = vec![0.0; local];
                for (x, w) in rule.points.iter().zip(&rule.weights) {
                    basis.values(x, &mut vals);
                    for i in 0..local {
                        moments[i] += w * vals[i];
                    }
                }
                Ok((basis, moments))
            })
            .collect();
        let (bases, moments) = built?.into_iter().unzip();
        Ok(DgSpace { mesh, degree, local, bases, moments })
    }

    pub fn mesh(&self) -> &PolyMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<PolyMesh> {
        self.mesh.clone()
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Dofs per element.
    pub fn local_dofs(&self) -> usize {
        self.local
    }

    pub fn n_dofs(&self) -> usize {
        self.local * self.mesh.n_elements()
    }

    pub fn offset(&self, element: usize) -> usize {
        element * self.local
    }

    pub fn basis(&self, element: usize) -> &ElementBasis {
        &self.bases[element]
    }

    pub fn element_rule(&self, element: usize, order: usize) -> QuadratureRule {
        quadrature::element_rule(&self.mesh, &self.mesh.elements()[element], order)
    }

    pub fn local_coeffs<'a>(&self, coeffs: &'a DVector<f64>, element: usize) -> &'a [f64] {
        let o = self.offset(element);
        &coeffs.as_slice()[o..o + self.local]
    }

    /// Value of the discrete field restricted to `element` at `x`.
    pub fn evaluate(&self, coeffs: &DVector<f64>, element: usize, x: &Point) -> f64 {
        let mut vals = [0.0; MAX_LOCAL_DOFS];
        self.bases[element].values(x, &mut vals[..self.local]);
        self.local_coeffs(coeffs, element).iter().zip(&vals).map(|(c, v)| c * v).sum()
    }

    pub fn evaluate_with_gradient(&self, coeffs: &DVector<f64>, element: usize, x: &Point) -> (f64, Point) {
        let mut vals = [0.0; MAX_LOCAL_DOFS];
        let mut grads = [Point::zeros(); MAX_LOCAL_DOFS];
        self.bases[element].values_and_gradients(x, &mut vals[..self.local], &mut grads[..self.local]);
        let mut v = 0.0;
        let mut g = Point::zeros();
        for (i, c) in self.local_coeffs(coeffs, element).iter().enumerate() {
            v += c * vals[i];
            g += grads[i] * *c;
        }
        (v, g)
    }

    /// `∫_K u_h`.
    pub fn element_integral(&self, coeffs: &DVector<f64>, element: usize) -> f64 {
        self.moments[element].as_slice().iter().zip(self.local_coeffs(coeffs, element)).map(|(m, c)| m * c).sum()
    }

    pub fn cell_average(&self, coeffs: &DVector<f64>, element: usize) -> f64 {
        self.element_integral(coeffs, element) / self.mesh.elements()[element].measure
    }

    pub fn cell_averages(&self, coeffs: &DVector<f64>) -> Vec<f64> {
        (0..self.mesh.n_elements()).map(|e| self.cell_average(coeffs, e)).collect()
    }

    /// Local Gram matrix `∫_K φ_i φ_j` computed by quadrature.
    pub fn element_gram(&self, element: usize) -> DMatrix<f64> {
        let n = self.local;
        let rule = self.element_rule(element, 2 * self.degree + 1);
        let mut g = DMatrix::zeros(n, n);
        let mut vals = vec![0.0; n];
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            self.bases[element].values(x, &mut vals);
            let v = DVector::from_column_slice(&vals);
            g.syger(*w, &v, &v, 1.0);
        }
        g
    }

    pub(crate) fn check_len(&self, v: &DVector<f64>) -> Result<(), DgError> {
        if v.len() != self.n_dofs() {
            return Err(DgError::LengthMismatch { expected: self.n_dofs(), got: v.len() });
        }
        Ok(())
    }
}
