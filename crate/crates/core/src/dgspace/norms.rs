//! Discrete L², DG, triple and energy norms of `u_h - u`.

use nalgebra::DVector;
use rayon::prelude::*;

use super::assembly::{DiffusionField, PenaltyField};
use super::{quadrature, DgError, DgSpace};
use crate::mesh::{FaceClass, Point};

/// A reference field with a known gradient.
pub trait ExactField: Sync {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
}

/// The zero field, used to take norms of discrete functions themselves.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl ExactField for ZeroField {
    fn value(&self, _: &Point) -> f64 {
        0.0
    }

    fn gradient(&self, _: &Point) -> Point {
        Point::zeros()
    }
}

/// Squared contributions of the error `w = u_h - u`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormParts {
    /// `‖w‖²`.
    pub l2_sq: f64,
    /// `Σ_K ‖√D ∇w‖²_K`.
    pub grad_sq: f64,
    /// `Σ_F ‖γ_F^{1/2} ⟦w⟧‖²_F`.
    pub jump_sq: f64,
    /// `Σ_F ‖γ_F^{-1/2} {D∇w}‖²_F`.
    pub flux_sq: f64,
}

impl NormParts {
    pub fn l2(&self) -> f64 {
        self.l2_sq.sqrt()
    }

    pub fn dg_sq(&self) -> f64 {
        self.grad_sq + self.jump_sq
    }

    pub fn dg(&self) -> f64 {
        self.dg_sq().sqrt()
    }

    pub fn triple_sq(&self) -> f64 {
        self.dg_sq() + self.flux_sq
    }

    pub fn triple(&self) -> f64 {
        self.triple_sq().sqrt()
    }

    fn add(self, o: NormParts) -> NormParts {
        NormParts {
            l2_sq: self.l2_sq + o.l2_sq,
            grad_sq: self.grad_sq + o.grad_sq,
            jump_sq: self.jump_sq + o.jump_sq,
            flux_sq: self.flux_sq + o.flux_sq,
        }
    }
}

/// All error contributions, integrated with order `order` (use `2p + 2` or more
/// for smooth reference fields).
pub fn norm_parts(
    space: &DgSpace,
    coeffs: &DVector<f64>,
    exact: &dyn ExactField,
    diffusion: &DiffusionField,
    penalty: &PenaltyField,
    order: usize,
) -> Result<NormParts, DgError> {
    space.check_len(coeffs)?;
    let mesh = space.mesh();
    if penalty.values.len() != mesh.n_faces() {
        return Err(DgError::LengthMismatch { expected: mesh.n_faces(), got: penalty.values.len() });
    }
    let volume = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let rule = space.element_rule(e, order);
            let d = diffusion.tensor(e);
            let mut part = NormParts::default();
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let (v, g) = space.evaluate_with_gradient(coeffs, e, x);
                let ev = v - exact.value(x);
                let eg = g - exact.gradient(x);
                part.l2_sq += w * ev * ev;
                part.grad_sq += w * (d * eg).dot(&eg);
            }
            part
        })
        .reduce(NormParts::default, NormParts::add);
    let faces = mesh
        .faces()
        .par_iter()
        .enumerate()
        .filter(|(f, face)| face.class != FaceClass::NeumannBoundary && penalty.values[*f] > 0.0)
        .map(|(f, face)| {
            let gamma = penalty.values[f];
            let rule = quadrature::face_rule(mesh, face, order);
            let mut part = NormParts::default();
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let ex = exact.value(x);
                let eg = exact.gradient(x);
                let (va, ga) = space.evaluate_with_gradient(coeffs, face.owner, x);
                let fa = diffusion.tensor(face.owner) * (ga - eg);
                let (jump, flux) = match face.neighbor {
                    Some(nb) => {
                        let (vb, gb) = space.evaluate_with_gradient(coeffs, nb, x);
                        let fb = diffusion.tensor(nb) * (gb - eg);
                        (va - vb, (fa + fb) * 0.5)
                    }
                    None => (va - ex, fa),
                };
                part.jump_sq += w * gamma * jump * jump;
                part.flux_sq += w * flux.norm_squared() / gamma;
            }
            part
        })
        .reduce(NormParts::default, NormParts::add);
    Ok(volume.add(faces))
}

/// DG norm of `u_h - u`.
pub fn norm_dg(
    space: &DgSpace,
    coeffs: &DVector<f64>,
    exact: &dyn ExactField,
    diffusion: &DiffusionField,
    penalty: &PenaltyField,
) -> Result<f64, DgError> {
    let order = 2 * space.degree() + 2;
    Ok(norm_parts(space, coeffs, exact, diffusion, penalty, order)?.dg())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyVariant {
    /// Integrates the squared DG norm in time.
    #[default]
    Dg,
    /// Integrates the squared triple norm in time.
    Triple,
}

/// `(‖w(T)‖² + ∫₀ᵀ |||w|||² dt)^{1/2}` with the time integral by the
/// trapezoid rule over the given `(t, squared spatial norm)` samples.
pub fn energy_norm(final_l2_sq: f64, samples: &[(f64, f64)]) -> Result<f64, DgError> {
    if samples.len() < 2 {
        return Err(DgError::TooFewSnapshots(samples.len()));
    }
    let integral: f64 = samples.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    Ok((final_l2_sq + integral).sqrt())
}

/// Collects per-step norm parts and yields the energy norm at the end.
#[derive(Debug, Clone, Default)]
pub struct EnergyAccumulator {
    variant: EnergyVariant,
    samples: Vec<(f64, f64)>,
    last_l2_sq: f64,
}

impl EnergyAccumulator {
    pub fn new(variant: EnergyVariant) -> Self {
        EnergyAccumulator { variant, samples: Vec::new(), last_l2_sq: 0.0 }
    }

    pub fn push(&mut self, t: f64, parts: &NormParts) {
        let value = match self.variant {
            EnergyVariant::Dg => parts.dg_sq(),
            EnergyVariant::Triple => parts.triple_sq(),
        };
        self.samples.push((t, value));
        self.last_l2_sq = parts.l2_sq;
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn finish(&self) -> Result<f64, DgError> {
        energy_norm(self.last_l2_sq, &self.samples)
    }
}
