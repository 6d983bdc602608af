//! Mass, SIPG diffusion, reaction and load assembly.

use nalgebra::{DMatrix, DVector, Matrix3};
use rayon::prelude::*;

use super::{DgError, DgSpace, MAX_LOCAL_DOFS};
use crate::mesh::{harmonic_average, FaceClass, Point};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Element-wise constant diffusion tensors. In 2D only the leading 2x2
/// block is used.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionField {
    dim: usize,
    tensors: Vec<Matrix3<f64>>,
}

impl DiffusionField {
    pub fn new(dim: usize, tensors: Vec<Matrix3<f64>>) -> Result<Self, DgError> {
        for (e, t) in tensors.iter().enumerate() {
            let block = t.view((0, 0), (dim, dim)).clone_owned();
            let scale = block.amax().max(f64::MIN_POSITIVE);
            if (block.clone() - block.transpose()).amax() > 1e-12 * scale || block.cholesky().is_none() {
                return Err(DgError::NonSpdTensor(e));
            }
        }
        Ok(DiffusionField { dim, tensors })
    }

    pub fn isotropic(dim: usize, n_elements: usize, d: f64) -> Result<Self, DgError> {
        Self::new(dim, vec![Matrix3::identity() * d; n_elements])
    }

    pub fn tensor(&self, element: usize) -> &Matrix3<f64> {
        &self.tensors[element]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// `d^K = ‖√D_K‖² = λ_max(D_K)`.
    pub fn spectral_max(&self, element: usize) -> f64 {
        let block = self.tensors[element].view((0, 0), (self.dim, self.dim)).clone_owned();
        block.symmetric_eigenvalues().max()
    }

    fn flux(&self, element: usize, grad: &Point) -> Point {
        self.tensors[element] * grad
    }
}

/// Face-wise penalty values `γ_F`; zero on Neumann faces.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyField {
    pub gamma0: f64,
    pub values: Vec<f64>,
}

fn harmonic_or_zero(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        harmonic_average(a, b).unwrap_or(0.0)
    }
}

/// `γ_F = γ₀ max({d^K}_H, {k^K}_H) p² / {h}_H` on internal faces and the
/// one-sided version on Dirichlet faces.
pub fn compute_penalty(
    space: &DgSpace,
    diffusion: &DiffusionField,
    reaction_magnitude: &[f64],
    gamma0: f64,
) -> Result<PenaltyField, DgError> {
    if !(gamma0 > 0.0) {
        return Err(DgError::NonPositivePenalty(gamma0));
    }
    let mesh = space.mesh();
    let ne = mesh.n_elements();
    if diffusion.len() != ne {
        return Err(DgError::LengthMismatch { expected: ne, got: diffusion.len() });
    }
    if reaction_magnitude.len() != ne {
        return Err(DgError::LengthMismatch { expected: ne, got: reaction_magnitude.len() });
    }
    let p2 = (space.degree() * space.degree()) as f64;
    let d: Vec<f64> = (0..ne).map(|e| diffusion.spectral_max(e)).collect();
    let values = mesh
        .faces()
        .iter()
        .map(|f| {
            let a = f.owner;
            let ha = mesh.elements()[a].diameter;
            match (f.class, f.neighbor) {
                (FaceClass::Internal, Some(b)) => {
                    let hb = mesh.elements()[b].diameter;
                    let scale = harmonic_or_zero(d[a], d[b]).max(harmonic_or_zero(reaction_magnitude[a], reaction_magnitude[b]));
                    gamma0 * scale * p2 / harmonic_or_zero(ha, hb)
                }
                (FaceClass::DirichletBoundary, _) => gamma0 * d[a].max(reaction_magnitude[a]) * p2 / ha,
                _ => 0.0,
            }
        })
        .collect();
    Ok(PenaltyField { gamma0, values })
}

pub fn assemble_mass(space: &DgSpace) -> CsrMatrix {
    let n = space.local_dofs();
    let blocks: Vec<DMatrix<f64>> =
        (0..space.mesh().n_elements()).into_par_iter().map(|e| space.element_gram(e)).collect();
    let mut b = TripletBuilder::new(space.n_dofs(), space.n_dofs());
    for (e, block) in blocks.iter().enumerate() {
        b.push_block(e * n, e * n, block);
    }
    b.build()
}

/// `∫ k u φ` for an element-wise constant, non-negative coefficient.
pub fn assemble_reaction(space: &DgSpace, coefficient: &[f64]) -> Result<CsrMatrix, DgError> {
    let ne = space.mesh().n_elements();
    if coefficient.len() != ne {
        return Err(DgError::LengthMismatch { expected: ne, got: coefficient.len() });
    }
    if let Some((element, &value)) = coefficient.iter().enumerate().find(|(_, k)| !(**k >= 0.0)) {
        return Err(DgError::NegativeCoefficient { element, value });
    }
    let n = space.local_dofs();
    let mut b = TripletBuilder::new(space.n_dofs(), space.n_dofs());
    for (e, k) in coefficient.iter().enumerate() {
        if *k != 0.0 {
            b.push_block(e * n, e * n, &(space.element_gram(e) * *k));
        }
    }
    Ok(b.build())
}

/// The three pieces of the SIPG form, kept apart for norm and penalty checks.
#[derive(Debug, Clone)]
pub struct DiffusionParts {
    /// `∫ D∇u·∇φ`.
    pub volume: CsrMatrix,
    /// `-∫ ⟦u⟧·{D∇φ} - ∫ ⟦φ⟧·{D∇u}` over internal and Dirichlet faces.
    pub consistency: CsrMatrix,
    /// `∫ γ_F ⟦u⟧·⟦φ⟧`.
    pub penalty: CsrMatrix,
    pub field: PenaltyField,
}

impl DiffusionParts {
    pub fn total(&self) -> CsrMatrix {
        CsrMatrix::linear_combination(&[(1.0, &self.volume), (1.0, &self.consistency), (1.0, &self.penalty)])
    }
}

/// Scalar jump coefficient and normal flux average of every local basis
/// function at one face quadrature point: `⟦φ⟧ = j n`, `{D∇φ}·n = g`.
pub(crate) struct FaceTrace {
    pub weight: f64,
    pub jump: Vec<f64>,
    pub flux: Vec<f64>,
}

/// Traces on a face: the owner's functions come first, then the neighbor's.
pub(crate) fn face_traces(
    space: &DgSpace,
    face_id: usize,
    diffusion: &DiffusionField,
    order: usize,
) -> Vec<FaceTrace> {
    let mesh = space.mesh();
    let face = &mesh.faces()[face_id];
    let rule = super::quadrature::face_rule(mesh, face, order);
    let n = space.local_dofs();
    let normal = face.normal;
    let two_sided = face.neighbor.is_some();
    let mut vals = [0.0; MAX_LOCAL_DOFS];
    let mut grads = [Point::zeros(); MAX_LOCAL_DOFS];
    let mut out = Vec::with_capacity(rule.len());
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        let width = if two_sided { 2 * n } else { n };
        let mut jump = vec![0.0; width];
        let mut flux = vec![0.0; width];
        let half = if two_sided { 0.5 } else { 1.0 };
        space.basis(face.owner).values_and_gradients(x, &mut vals[..n], &mut grads[..n]);
        for i in 0..n {
            jump[i] = vals[i];
            flux[i] = half * diffusion.flux(face.owner, &grads[i]).dot(&normal);
        }
        if let Some(nb) = face.neighbor {
            space.basis(nb).values_and_gradients(x, &mut vals[..n], &mut grads[..n]);
            for i in 0..n {
                jump[n + i] = -vals[i];
                flux[n + i] = half * diffusion.flux(nb, &grads[i]).dot(&normal);
            }
        }
        out.push(FaceTrace { weight: *w, jump, flux });
    }
    out
}

fn face_dofs(space: &DgSpace, face_id: usize) -> Vec<usize> {
    let face = &space.mesh().faces()[face_id];
    let n = space.local_dofs();
    let mut dofs: Vec<usize> = (0..n).map(|i| space.offset(face.owner) + i).collect();
    if let Some(nb) = face.neighbor {
        dofs.extend((0..n).map(|i| space.offset(nb) + i));
    }
    dofs
}

pub fn assemble_diffusion_parts(
    space: &DgSpace,
    diffusion: &DiffusionField,
    reaction_magnitude: &[f64],
    gamma0: f64,
) -> Result<DiffusionParts, DgError> {
    let field = compute_penalty(space, diffusion, reaction_magnitude, gamma0)?;
    let mesh = space.mesh();
    let n = space.local_dofs();
    let order = 2 * space.degree() + 1;
    let ndofs = space.n_dofs();

    let volume_blocks: Vec<DMatrix<f64>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let rule = space.element_rule(e, order);
            let mut vals = [0.0; MAX_LOCAL_DOFS];
            let mut grads = [Point::zeros(); MAX_LOCAL_DOFS];
            let mut block = DMatrix::zeros(n, n);
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                space.basis(e).values_and_gradients(x, &mut vals[..n], &mut grads[..n]);
                for j in 0..n {
                    let dg = diffusion.flux(e, &grads[j]) * *w;
                    for i in 0..n {
                        block[(i, j)] += dg.dot(&grads[i]);
                    }
                }
            }
            block
        })
        .collect();
    let mut volume = TripletBuilder::new(ndofs, ndofs);
    for (e, block) in volume_blocks.iter().enumerate() {
        volume.push_block(e * n, e * n, block);
    }

    let active: Vec<usize> = mesh
        .faces()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.class != FaceClass::NeumannBoundary)
        .map(|(i, _)| i)
        .collect();
    let face_blocks: Vec<(Vec<usize>, DMatrix<f64>, DMatrix<f64>)> = active
        .par_iter()
        .map(|&f| {
            let traces = face_traces(space, f, diffusion, order);
            let dofs = face_dofs(space, f);
            let m = dofs.len();
            let gamma = field.values[f];
            let mut cons = DMatrix::zeros(m, m);
            let mut pen = DMatrix::zeros(m, m);
            for t in &traces {
                for j in 0..m {
                    for i in 0..m {
                        cons[(i, j)] -= t.weight * (t.jump[j] * t.flux[i] + t.jump[i] * t.flux[j]);
                        pen[(i, j)] += t.weight * gamma * t.jump[i] * t.jump[j];
                    }
                }
            }
            (dofs, cons, pen)
        })
        .collect();
    let mut consistency = TripletBuilder::new(ndofs, ndofs);
    let mut penalty = TripletBuilder::new(ndofs, ndofs);
    for (dofs, cons, pen) in &face_blocks {
        for (j, &gj) in dofs.iter().enumerate() {
            for (i, &gi) in dofs.iter().enumerate() {
                consistency.push(gi, gj, cons[(i, j)]);
                penalty.push(gi, gj, pen[(i, j)]);
            }
        }
    }
    Ok(DiffusionParts { volume: volume.build(), consistency: consistency.build(), penalty: penalty.build(), field })
}

/// Symmetric interior penalty matrix and the penalty values it used.
pub fn assemble_diffusion(
    space: &DgSpace,
    diffusion: &DiffusionField,
    reaction_magnitude: &[f64],
    gamma0: f64,
) -> Result<(CsrMatrix, PenaltyField), DgError> {
    let parts = assemble_diffusion_parts(space, diffusion, reaction_magnitude, gamma0)?;
    Ok((parts.total(), parts.field))
}

/// `F_i = ∫ f(x, t) φ_i`, integrated with order `2p + 1`.
pub fn assemble_forcing<F>(space: &DgSpace, f: F, t: f64) -> DVector<f64>
where
    F: Fn(&Point, f64) -> f64 + Sync,
{
    let n = space.local_dofs();
    let order = 2 * space.degree() + 1;
    let blocks: Vec<Vec<f64>> = (0..space.mesh().n_elements())
        .into_par_iter()
        .map(|e| {
            let rule = space.element_rule(e, order);
            let mut vals = [0.0; MAX_LOCAL_DOFS];
            let mut out = vec![0.0; n];
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let fx = f(x, t) * w;
                space.basis(e).values(x, &mut vals[..n]);
                for i in 0..n {
                    out[i] += fx * vals[i];
                }
            }
            out
        })
        .collect();
    DVector::from_iterator(space.n_dofs(), blocks.into_iter().flatten())
}

/// Weak Dirichlet contribution `-∫ g D∇φ·n + ∫ γ_F g φ` over Dirichlet faces.
pub fn assemble_dirichlet_load<G>(
    space: &DgSpace,
    g: G,
    t: f64,
    diffusion: &DiffusionField,
    penalty: &PenaltyField,
) -> DVector<f64>
where
    G: Fn(&Point, f64) -> f64 + Sync,
{
    let mesh = space.mesh();
    let n = space.local_dofs();
    let order = 2 * space.degree() + 1;
    let mut rhs = DVector::zeros(space.n_dofs());
    let dirichlet: Vec<usize> = mesh
        .faces()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.class == FaceClass::DirichletBoundary)
        .map(|(i, _)| i)
        .collect();
    let contributions: Vec<(usize, Vec<f64>)> = dirichlet
        .par_iter()
        .map(|&fid| {
            let face = &mesh.faces()[fid];
            let rule = super::quadrature::face_rule(mesh, face, order);
            let gamma = penalty.values[fid];
            let mut vals = [0.0; MAX_LOCAL_DOFS];
            let mut grads = [Point::zeros(); MAX_LOCAL_DOFS];
            let mut out = vec![0.0; n];
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let gx = g(x, t) * w;
                space.basis(face.owner).values_and_gradients(x, &mut vals[..n], &mut grads[..n]);
                for i in 0..n {
                    let flux = diffusion.flux(face.owner, &grads[i]).dot(&face.normal);
                    out[i] += gx * (gamma * vals[i] - flux);
                }
            }
            (face.owner, out)
        })
        .collect();
    for (e, out) in contributions {
        let o = space.offset(e);
        for (i, v) in out.into_iter().enumerate() {
            rhs[o + i] += v;
        }
    }
    rhs
}

/// Coefficients of the L² projection of `g` onto the space.
pub fn project_l2<G>(space: &DgSpace, g: G) -> DVector<f64>
where
    G: Fn(&Point) -> f64 + Sync,
{
    let rhs = assemble_forcing(space, |x, _| g(x), 0.0);
    let n = space.local_dofs();
    let blocks: Vec<DVector<f64>> = (0..space.mesh().n_elements())
        .into_par_iter()
        .map(|e| {
            let local = rhs.rows(space.offset(e), n).clone_owned();
            space.element_gram(e).cholesky().map(|c| c.solve(&local)).unwrap_or(local)
        })
        .collect();
    DVector::from_iterator(space.n_dofs(), blocks.iter().flat_map(|b| b.iter().copied()))
}

/// Precomputed data for `R_N(ψ)_ij = ∫ k₁₂ ψ_h φ_i φ_j`, integrated with
/// order `3p` so that the triple products are exact.
#[derive(Debug, Clone)]
pub struct NonlinearForm {
    local: usize,
    n_dofs: usize,
    /// Per element: basis values (local x points) and `w k₁₂` per point.
    tables: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl NonlinearForm {
    pub fn new(space: &DgSpace, k12: &[f64]) -> Result<Self, DgError> {
        let ne = space.mesh().n_elements();
        if k12.len() != ne {
            return Err(DgError::LengthMismatch { expected: ne, got: k12.len() });
        }
        if let Some((element, &value)) = k12.iter().enumerate().find(|(_, k)| !(**k >= 0.0)) {
            return Err(DgError::NegativeCoefficient { element, value });
        }
        let n = space.local_dofs();
        let order = 3 * space.degree();
        let tables = (0..ne)
            .into_par_iter()
            .map(|e| {
                let rule = space.element_rule(e, order);
                let mut values = DMatrix::zeros(n, rule.len());
                let mut vals = [0.0; MAX_LOCAL_DOFS];
                for (q, x) in rule.points.iter().enumerate() {
                    space.basis(e).values(x, &mut vals[..n]);
                    for i in 0..n {
                        values[(i, q)] = vals[i];
                    }
                }
                let weights = DVector::from_iterator(rule.len(), rule.weights.iter().map(|w| w * k12[e]));
                (values, weights)
            })
            .collect();
        Ok(NonlinearForm { local: n, n_dofs: space.n_dofs(), tables })
    }

    pub fn local_dofs(&self) -> usize {
        self.local
    }

    /// Element-diagonal blocks of `R_N(ψ)`.
    pub fn blocks(&self, psi: &DVector<f64>) -> Result<Vec<DMatrix<f64>>, DgError> {
        if psi.len() != self.n_dofs {
            return Err(DgError::LengthMismatch { expected: self.n_dofs, got: psi.len() });
        }
        let n = self.local;
        Ok(self
            .tables
            .par_iter()
            .enumerate()
            .map(|(e, (values, weights))| {
                let local = psi.rows(e * n, n);
                let at_points = values.tr_mul(&local);
                let mut scaled = values.clone();
                for (q, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= weights[q] * at_points[q];
                }
                scaled * values.transpose()
            })
            .collect())
    }

    pub fn assemble(&self, psi: &DVector<f64>) -> Result<CsrMatrix, DgError> {
        let blocks = self.blocks(psi)?;
        let mut b = TripletBuilder::new(self.n_dofs, self.n_dofs);
        for (e, block) in blocks.iter().enumerate() {
            b.push_block(e * self.local, e * self.local, block);
        }
        Ok(b.build())
    }

    /// `R_N(ψ) ξ` without forming the matrix.
    pub fn apply(&self, psi: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>, DgError> {
        let blocks = self.blocks(psi)?;
        let n = self.local;
        let mut out = DVector::zeros(self.n_dofs);
        for (e, block) in blocks.iter().enumerate() {
            out.rows_mut(e * n, n).copy_from(&(block * xi.rows(e * n, n)));
        }
        Ok(out)
    }
}
