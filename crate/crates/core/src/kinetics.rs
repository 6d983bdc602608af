//! Model parameters, admissibility, equilibria and traveling-wave speed.

use std::fmt;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::dgspace::{DgError, DiffusionField};
use crate::mesh::{Point, PolyMesh};

#[derive(Debug, Error, PartialEq)]
pub enum KineticsError {
    #[error("coefficient {name} must be non-negative and finite, got {value}")]
    NegativeCoefficient { name: &'static str, value: f64 },
    #[error("extracellular diffusion {name} must be positive, got {value}")]
    NonPositiveDiffusion { name: &'static str, value: f64 },
    #[error("parameters are not admissible: k0*k12 = {production} must exceed k1*k1_tilde = {clearance} > 0")]
    Inadmissible { production: f64, clearance: f64 },
    #[error("clearance k1 must be positive")]
    ZeroClearance,
    #[error("axonal direction on element {element} has length {length}, expected 1")]
    NonUnitDirection { element: usize, length: f64 },
    #[error("expected {expected} axonal directions, got {got}")]
    DirectionCount { expected: usize, got: usize },
    #[error(transparent)]
    Space(#[from] DgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    /// Healthy protein `c`.
    Healthy,
    /// Misfolded protein `q`.
    Misfolded,
}

/// Where the axonal direction `a` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum AxonField {
    Uniform(Point),
    PerElement(Vec<Point>),
    /// Use the directions stored with the mesh.
    FromMesh,
}

impl Default for AxonField {
    fn default() -> Self {
        AxonField::Uniform(Point::x())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Production rate of healthy protein.
    pub k0: f64,
    /// Clearance of healthy protein.
    pub k1: f64,
    /// Clearance of misfolded protein.
    pub k1_tilde: f64,
    /// Conversion rate.
    pub k12: f64,
    pub d_ext_c: f64,
    pub d_ext_q: f64,
    pub d_axn: f64,
    pub axon: AxonField,
}

impl ModelParams {
    /// The reference parameter set: `d_ext = 8`, `d_axn = 0`, `k12 = 1`,
    /// `k0 = 0.6`, `k1 = 0.5`, `k1_tilde = 0.3`.
    pub fn reference() -> Self {
        ModelParams {
            k0: 0.6,
            k1: 0.5,
            k1_tilde: 0.3,
            k12: 1.0,
            d_ext_c: 8.0,
            d_ext_q: 8.0,
            d_axn: 0.0,
            axon: AxonField::default(),
        }
    }

    pub fn with_d_ext(mut self, d: f64) -> Self {
        self.d_ext_c = d;
        self.d_ext_q = d;
        self
    }

    /// Sign and finiteness checks; does not test admissibility.
    pub fn validate(&self) -> Result<(), KineticsError> {
        for (name, value) in
            [("k0", self.k0), ("k1", self.k1), ("k1_tilde", self.k1_tilde), ("k12", self.k12), ("d_axn", self.d_axn)]
        {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(KineticsError::NegativeCoefficient { name, value });
            }
        }
        for (name, value) in [("d_ext_c", self.d_ext_c), ("d_ext_q", self.d_ext_q)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(KineticsError::NonPositiveDiffusion { name, value });
            }
        }
        Ok(())
    }

    pub fn d_ext(&self, species: Species) -> f64 {
        match species {
            Species::Healthy => self.d_ext_c,
            Species::Misfolded => self.d_ext_q,
        }
    }

    /// `(k0 - k1 c - k12 c q, -k1_tilde q + k12 c q)`.
    pub fn reaction(&self, c: f64, q: f64) -> (f64, f64) {
        (self.k0 - self.k1 * c - self.k12 * c * q, -self.k1_tilde * q + self.k12 * c * q)
    }

    pub fn jacobian(&self, c: f64, q: f64) -> [[f64; 2]; 2] {
        [[-self.k1 - self.k12 * q, -self.k12 * c], [self.k12 * q, -self.k1_tilde + self.k12 * c]]
    }

    /// Reaction magnitude entering the penalty: `(1 + k12)(k1 + k1_tilde)`.
    pub fn reaction_magnitude(&self) -> f64 {
        (1.0 + self.k12) * (self.k1 + self.k1_tilde)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    /// `k0 k12`.
    pub production: f64,
    /// `k1 k1_tilde`.
    pub clearance: f64,
}

impl fmt::Display for Admissibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (rel, verdict) = if self.admissible { (">", "admissible") } else { ("<=", "NOT admissible") };
        write!(
            f,
            "k0*k12 = {} {rel} k1*k1_tilde = {} (> 0 required): {verdict}",
            self.production, self.clearance
        )
    }
}

/// `k0 k12 > k1 k1_tilde > 0`.
pub fn check_admissibility(params: &ModelParams) -> Admissibility {
    let production = params.k0 * params.k12;
    let clearance = params.k1 * params.k1_tilde;
    Admissibility { admissible: production > clearance && clearance > 0.0, production, clearance }
}

fn require_admissible(params: &ModelParams) -> Result<(), KineticsError> {
    let a = check_admissibility(params);
    if a.admissible {
        Ok(())
    } else {
        Err(KineticsError::Inadmissible { production: a.production, clearance: a.clearance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Saddle,
    Unstable,
    /// An eigenvalue with zero real part.
    NonHyperbolic,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Saddle => "saddle",
            Stability::Unstable => "unstable",
            Stability::NonHyperbolic => "non-hyperbolic",
        })
    }
}

/// Eigenvalues of a real 2x2 matrix as `(re, im)` pairs.
pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [((tr - s) / 2.0, 0.0), ((tr + s) / 2.0, 0.0)]
    } else {
        let s = (-disc).sqrt() / 2.0;
        [(tr / 2.0, -s), (tr / 2.0, s)]
    }
}

pub fn classify(eig: [(f64, f64); 2]) -> Stability {
    let (a, b) = (eig[0].0, eig[1].0);
    if a == 0.0 || b == 0.0 {
        Stability::NonHyperbolic
    } else if a < 0.0 && b < 0.0 {
        Stability::Stable
    } else if a > 0.0 && b > 0.0 {
        Stability::Unstable
    } else {
        Stability::Saddle
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub c: f64,
    pub q: f64,
    pub eigenvalues: [(f64, f64); 2],
    pub stability: Stability,
}

impl Equilibrium {
    fn at(params: &ModelParams, c: f64, q: f64) -> Self {
        let eigenvalues = eigenvalues_2x2(params.jacobian(c, q));
        Equilibrium { c, q, eigenvalues, stability: classify(eigenvalues) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibria {
    /// `(k1_tilde / k12, k0 / k1_tilde - k1 / k12)`.
    pub pathological: Equilibrium,
    /// `(k0 / k1, 0)`.
    pub healthy: Equilibrium,
}

pub fn equilibria(params: &ModelParams) -> Result<Equilibria, KineticsError> {
    require_admissible(params)?;
    let pathological =
        Equilibrium::at(params, params.k1_tilde / params.k12, params.k0 / params.k1_tilde - params.k1 / params.k12);
    let healthy = Equilibrium::at(params, params.k0 / params.k1, 0.0);
    Ok(Equilibria { pathological, healthy })
}

/// `2 sqrt(d_ext k1_tilde (k0 k12 / (k1 k1_tilde) - 1))`, using the
/// misfolded species' extracellular diffusion.
pub fn min_wave_speed(params: &ModelParams) -> Result<f64, KineticsError> {
    require_admissible(params)?;
    let ratio = params.k0 * params.k12 / (params.k1 * params.k1_tilde);
    Ok(2.0 * (params.d_ext_q * params.k1_tilde * (ratio - 1.0)).sqrt())
}

/// Growth rate `k12 k0 / k1 - k1_tilde` of the reduced Fisher-Kolmogorov model.
pub fn fk_alpha(params: &ModelParams) -> Result<f64, KineticsError> {
    if !(params.k1 > 0.0) {
        return Err(KineticsError::ZeroClearance);
    }
    Ok(params.k12 * params.k0 / params.k1 - params.k1_tilde)
}

/// `d_ext I + d_axn a ⊗ a`.
pub fn diffusion_tensor(direction: &Point, params: &ModelParams, species: Species) -> Result<Matrix3<f64>, KineticsError> {
    let base = Matrix3::identity() * params.d_ext(species);
    if params.d_axn == 0.0 {
        return Ok(base);
    }
    let length = direction.norm();
    if (length - 1.0).abs() > 1e-10 {
        return Err(KineticsError::NonUnitDirection { element: 0, length });
    }
    Ok(base + direction * direction.transpose() * params.d_axn)
}

/// Element-wise tensors for one species.
pub fn diffusion_field(mesh: &PolyMesh, params: &ModelParams, species: Species) -> Result<DiffusionField, KineticsError> {
    params.validate()?;
    let n = mesh.n_elements();
    let directions: Vec<Point> = match &params.axon {
        AxonField::Uniform(a) => vec![*a; n],
        AxonField::PerElement(v) => v.clone(),
        AxonField::FromMesh => mesh.directions().map(<[Point]>::to_vec).unwrap_or_else(|| vec![Point::x(); n]),
    };
    if directions.len() != n {
        return Err(KineticsError::DirectionCount { expected: n, got: directions.len() });
    }
    let tensors = directions
        .iter()
        .enumerate()
        .map(|(e, a)| {
            diffusion_tensor(a, params, species).map_err(|err| match err {
                KineticsError::NonUnitDirection { length, .. } => KineticsError::NonUnitDirection { element: e, length },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiffusionField::new(mesh.dim(), tensors)?)
}

/// Fixed ten-decimal rendering with trailing zeros removed.
fn short(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

/// Human-readable summary of the kinetic analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticsReport {
    pub admissibility: Admissibility,
    pub equilibria: Option<Equilibria>,
    pub min_wave_speed: Option<f64>,
    pub alpha: Option<f64>,
}

impl KineticsReport {
    pub fn new(params: &ModelParams) -> Self {
        KineticsReport {
            admissibility: check_admissibility(params),
            equilibria: equilibria(params).ok(),
            min_wave_speed: min_wave_speed(params).ok(),
            alpha: fk_alpha(params).ok(),
        }
    }
}

impl fmt::Display for KineticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "assumption: {}", self.admissibility)?;
        if let Some(eq) = &self.equilibria {
            let p = &eq.pathological;
            let h = &eq.healthy;
            writeln!(f, "pathological equilibrium: (c, q) = ({}, {}) {}", short(p.c), short(p.q), p.stability)?;
            writeln!(f, "healthy equilibrium: (c, q) = ({}, {}) {}", short(h.c), short(h.q), h.stability)?;
        }
        if let Some(v) = self.min_wave_speed {
            writeln!(f, "minimum wave speed: {}", short(v))?;
        }
        if let Some(a) = self.alpha {
            writeln!(f, "alpha: {}", short(a))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> ModelParams {
        ModelParams { k0: 2.0, k1: 1.0, k1_tilde: 1.0, k12: 1.0, ..ModelParams::reference() }
    }

    #[test]
    fn reference_admissibility() {
        let a = check_admissibility(&ModelParams::reference());
        assert!(a.admissible);
        assert!((a.production - 0.6).abs() < 1e-15 && (a.clearance - 0.15).abs() < 1e-15);
        let low = ModelParams { k0: 0.1, k1: 1.0, k1_tilde: 1.0, k12: 1.0, ..ModelParams::reference() };
        assert!(!check_admissibility(&low).admissible);
        let no_clearance = ModelParams { k1: 0.0, ..ModelParams::reference() };
        assert!(!check_admissibility(&no_clearance).admissible);
        assert!(check_admissibility(&low).to_string().contains("NOT admissible"));
    }

    #[test]
    fn reference_equilibria() {
        let eq = equilibria(&ModelParams::reference()).unwrap();
        assert!((eq.pathological.c - 0.3).abs() < 1e-12);
        assert!((eq.pathological.q - 1.5).abs() < 1e-12);
        assert_eq!(eq.pathological.stability, Stability::Stable);
        assert!((eq.healthy.c - 1.2).abs() < 1e-12);
        assert_eq!(eq.healthy.q, 0.0);
        assert_eq!(eq.healthy.stability, Stability::Saddle);
    }

    #[test]
    fn toy_equilibria() {
        let eq = equilibria(&toy()).unwrap();
        assert_eq!((eq.healthy.c, eq.healthy.q), (2.0, 0.0));
        assert_eq!((eq.pathological.c, eq.pathological.q), (1.0, 1.0));
        let bad = ModelParams { k0: 0.0, ..ModelParams::reference() };
        assert!(matches!(equilibria(&bad), Err(KineticsError::Inadmissible { .. })));
    }

    #[test]
    fn wave_speed_and_alpha() {
        let p = ModelParams::reference();
        assert!((min_wave_speed(&p).unwrap() - 2.0 * 7.2f64.sqrt()).abs() < 1e-12);
        assert!((min_wave_speed(&p).unwrap() - 5.3666).abs() < 1e-4);
        let quad = p.clone().with_d_ext(32.0);
        assert!((min_wave_speed(&quad).unwrap() / min_wave_speed(&p).unwrap() - 2.0).abs() < 1e-12);
        let degenerate = ModelParams { k0: 0.15, ..p.clone() };
        assert!(min_wave_speed(&degenerate).is_err());
        assert!((fk_alpha(&p).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(fk_alpha(&ModelParams { k12: 0.0, ..p.clone() }).unwrap(), -0.3);
        assert_eq!(fk_alpha(&ModelParams { k1: 0.0, ..p }), Err(KineticsError::ZeroClearance));
    }

    #[test]
    fn tensors() {
        let p = ModelParams::reference();
        assert_eq!(diffusion_tensor(&Point::x(), &p, Species::Misfolded).unwrap(), Matrix3::identity() * 8.0);
        let aniso = ModelParams { d_axn: 10.0, ..p.clone().with_d_ext(1.0) };
        let d = diffusion_tensor(&Point::x(), &aniso, Species::Healthy).unwrap();
        assert_eq!(d, Matrix3::from_diagonal(&Point::new(11.0, 1.0, 1.0)));
        assert!(matches!(
            diffusion_tensor(&Point::new(2.0, 0.0, 0.0), &aniso, Species::Healthy),
            Err(KineticsError::NonUnitDirection { .. })
        ));
        let split = ModelParams { d_ext_c: 16.0, ..p };
        assert_eq!(diffusion_tensor(&Point::x(), &split, Species::Healthy).unwrap()[(0, 0)], 16.0);
        assert_eq!(diffusion_tensor(&Point::x(), &split, Species::Misfolded).unwrap()[(0, 0)], 8.0);
    }

    #[test]
    fn validation() {
        let p = ModelParams { k12: -1.0, ..ModelParams::reference() };
        assert_eq!(p.validate(), Err(KineticsError::NegativeCoefficient { name: "k12", value: -1.0 }));
        let p = ModelParams { d_ext_q: 0.0, ..ModelParams::reference() };
        assert!(matches!(p.validate(), Err(KineticsError::NonPositiveDiffusion { name: "d_ext_q", .. })));
    }

    #[test]
    fn report_lists_everything() {
        let text = KineticsReport::new(&ModelParams::reference()).to_string();
        assert!(text.contains("(0.3, 1.5) stable"));
        assert!(text.contains("(1.2, 0) saddle"));
        assert!(text.contains("alpha: 0.9"));
    }

    fn admissible() -> impl Strategy<Value = ModelParams> {
        (0.05f64..5.0, 0.05f64..5.0, 0.05f64..5.0, 1.05f64..10.0, 0.1f64..20.0).prop_map(|(k1, kt, k12, factor, d)| {
            // choose k0 so that k0 k12 = factor k1 kt
            let k0 = factor * k1 * kt / k12;
            ModelParams { k0, k1, k1_tilde: kt, k12, ..ModelParams::reference().with_d_ext(d) }
        })
    }

    proptest! {
        #[test]
        fn reaction_vanishes_at_equilibria(p in admissible()) {
            let eq = equilibria(&p).unwrap();
            for e in [eq.pathological, eq.healthy] {
                let (f, g) = p.reaction(e.c, e.q);
                let scale = 1.0 + p.k0 + p.k1 * e.c + p.k12 * e.c * e.q.abs() + p.k1_tilde * e.q.abs();
                prop_assert!(f.abs() < 1e-14 * scale && g.abs() < 1e-14 * scale);
            }
            prop_assert!(eq.pathological.c > 0.0 && eq.pathological.q > 0.0);
            prop_assert!(eq.healthy.c > 0.0);
        }

        #[test]
        fn healthy_state_is_a_saddle(p in admissible()) {
            let eq = equilibria(&p).unwrap();
            let alpha = fk_alpha(&p).unwrap();
            prop_assert!(alpha > 0.0);
            prop_assert_eq!(eq.healthy.stability, Stability::Saddle);
            let mut eig = [eq.healthy.eigenvalues[0].0, eq.healthy.eigenvalues[1].0];
            eig.sort_by(f64::total_cmp);
            let mut expected = [-p.k1, alpha];
            expected.sort_by(f64::total_cmp);
            prop_assert!((eig[0] - expected[0]).abs() < 1e-9 * (1.0 + expected[0].abs()));
            prop_assert!((eig[1] - expected[1]).abs() < 1e-9 * (1.0 + expected[1].abs()));
            prop_assert_eq!(eq.pathological.stability, Stability::Stable);
        }

        #[test]
        fn wave_speed_identity(p in admissible()) {
            let v = min_wave_speed(&p).unwrap();
            let rhs = p.d_ext_q * p.k1_tilde * (p.k0 * p.k12 / (p.k1 * p.k1_tilde) - 1.0);
            prop_assert!((v * v / 4.0 - rhs).abs() <= 1e-12 * rhs.max(1.0));
            let faster = ModelParams { d_ext_q: p.d_ext_q * 1.5, ..p.clone() };
            prop_assert!(min_wave_speed(&faster).unwrap() > v);
        }

        #[test]
        fn tensor_spectrum(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU,
                           d_ext in 0.1f64..10.0, d_axn in 0.1f64..50.0) {
            let a = Point::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let p = ModelParams { d_axn, ..ModelParams::reference().with_d_ext(d_ext) };
            let d = diffusion_tensor(&a, &p, Species::Misfolded).unwrap();
            prop_assert!((d - d.transpose()).amax() < 1e-14);
            let mut eig: Vec<f64> = d.symmetric_eigenvalues().iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            prop_assert!((eig[0] - d_ext).abs() < 1e-10 && (eig[1] - d_ext).abs() < 1e-10);
            prop_assert!((eig[2] - d_ext - d_axn).abs() < 1e-10);
            prop_assert!(((d * a) - a * (d_ext + d_axn)).amax() < 1e-10);
        }
    }
}
