//! Travelling-front location and speed along an elongated domain.

use nalgebra::DVector;

use super::SimError;
use crate::dgspace::DgSpace;

/// Measure-weighted slab averages of a field: `(coordinate, average)`.
pub fn slab_profile(space: &DgSpace, coeffs: &DVector<f64>, slabs: &[(f64, Vec<usize>)]) -> Vec<(f64, f64)> {
    let elements = space.mesh().elements();
    slabs
        .iter()
        .map(|(x, ids)| {
            let integral: f64 = ids.iter().map(|&e| space.element_integral(coeffs, e)).sum();
            let measure: f64 = ids.iter().map(|&e| elements[e].measure).sum();
            (*x, integral / measure)
        })
        .collect()
}

/// Furthest point of the profile at which it still reaches `threshold`,
/// linearly interpolated between slab centers. `None` when the profile is
/// below the threshold everywhere or above it up to the far end.
pub fn front_position(profile: &[(f64, f64)], threshold: f64) -> Option<f64> {
    let last = profile.iter().rposition(|&(_, v)| v >= threshold)?;
    let (x0, v0) = profile[last];
    let (x1, v1) = *profile.get(last + 1)?;
    Some(x0 + (v0 - threshold) / (v0 - v1) * (x1 - x0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontFit {
    pub speed: f64,
    pub intercept: f64,
    pub samples: usize,
    pub r_squared: f64,
}

/// Least-squares slope of `x*(t)` over samples with `x*` inside `window`,
/// which keeps the seeding transient and the far boundary out of the fit.
pub fn front_speed(track: &[(f64, f64)], window: (f64, f64), threshold: f64) -> Result<FrontFit, SimError> {
    if track.is_empty() {
        return Err(SimError::FrontNeverForms(threshold));
    }
    let pts: Vec<(f64, f64)> = track.iter().copied().filter(|&(_, x)| x >= window.0 && x <= window.1).collect();
    let n = pts.len();
    if n < 3 {
        return Err(SimError::WindowTooShort(n));
    }
    let nf = n as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let xm = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let stx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - xm)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.1 - xm).powi(2)).sum();
    if stt == 0.0 {
        return Err(SimError::WindowTooShort(n));
    }
    let speed = stx / stt;
    let r_squared = if sxx == 0.0 { 1.0 } else { stx * stx / (stt * sxx) };
    Ok(FrontFit { speed, intercept: xm - speed * tm, samples: n, r_squared })
}
