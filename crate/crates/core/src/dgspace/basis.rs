//! Per-element orthonormal polynomial bases.
//!
//! Each element uses tensor-product Legendre polynomials of total degree at
//! most `p`, scaled to the element's bounding box and then orthonormalized
//! over the element itself via a Cholesky factor of their Gram matrix. The
//! first basis function is always the normalized constant.

use nalgebra::{DMatrix, DVector};

use super::quadrature::QuadratureRule;
use crate::mesh::{Element, Point};

/// Exponent tuples of total degree `<= p`, ordered by total degree.
pub fn multi_indices(dim: usize, p: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=p {
        if dim == 2 {
            for a in (0..=total).rev() {
                out.push([a, total - a, 0]);
            }
        } else {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    out.push([a, b, total - a - b]);
                }
            }
        }
    }
    out
}

/// `C(p + dim, dim)`.
pub fn dofs_per_element(dim: usize, p: usize) -> usize {
    (1..=dim).fold(1, |acc, k| acc * (p + k) / k)
}

fn legendre_table(p: usize, xi: f64, vals: &mut [f64], ders: &mut [f64]) {
    vals[0] = 1.0;
    ders[0] = 0.0;
    if p >= 1 {
        vals[1] = xi;
        ders[1] = 1.0;
    }
    for k in 2..=p {
        let kf = k as f64;
        vals[k] = ((2.0 * kf - 1.0) * xi * vals[k - 1] - (kf - 1.0) * vals[k - 2]) / kf;
        ders[k] = kf * vals[k - 1] + xi * ders[k - 1];
    }
}

#[derive(Debug, Clone)]
pub struct ElementBasis {
    dim: usize,
    degree: usize,
    center: Point,
    half: Point,
    indices: Vec<[usize; 3]>,
    /// Lower-triangular map from scaled Legendre products to the orthonormal basis.
    transform: DMatrix<f64>,
}

impl ElementBasis {
    /// Orthonormalizes the scaled Legendre products with `rule`, which must
    /// integrate degree-`2p` polynomials exactly over the element.
    pub fn new(dim: usize, degree: usize, element: &Element, rule: &QuadratureRule) -> Option<Self> {
        let indices = multi_indices(dim, degree);
        let n = indices.len();
        let mut half = (element.bbox.max - element.bbox.min) * 0.5;
        if dim == 2 {
            half.z = 1.0;
        }
        let mut basis = ElementBasis {
            dim,
            degree,
            center: element.bbox.center(),
            half,
            indices,
            transform: DMatrix::identity(n, n),
        };
        let mut gram = DMatrix::zeros(n, n);
        let mut vals = vec![0.0; n];
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            basis.raw_values(x, &mut vals);
            let v = DVector::from_column_slice(&vals);
            gram.syger(*w, &v, &v, 1.0);
        }
        let chol = gram.cholesky()?;
        let l = chol.l();
        basis.transform = l.solve_lower_triangular(&DMatrix::identity(n, n))?;
        Some(basis)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn raw_values(&self, x: &Point, out: &mut [f64]) {
        let p = self.degree;
        let mut tab = [[0.0; 16]; 3];
        let mut der = [[0.0; 16]; 3];
        for d in 0..self.dim {
            let xi = (x[d] - self.center[d]) / self.half[d];
            legendre_table(p, xi, &mut tab[d], &mut der[d]);
        }
        for (j, a) in self.indices.iter().enumerate() {
            let mut v = tab[0][a[0]] * tab[1][a[1]];
            if self.dim == 3 {
                v *= tab[2][a[2]];
            }
            out[j] = v;
        }
    }

    /// Basis values at `x`.
    pub fn values(&self, x: &Point, out: &mut [f64]) {
        let n = self.len();
        let mut raw = [0.0; 64];
        self.raw_values(x, &mut raw[..n]);
        for (i, o) in out[..n].iter_mut().enumerate() {
            *o = raw[..=i].iter().enumerate().map(|(j, r)| self.transform[(i, j)] * r).sum();
        }
    }

    /// Basis values and physical gradients at `x`.
    pub fn values_and_gradients(&self, x: &Point, vals: &mut [f64], grads: &mut [Point]) {
        let p = self.degree;
        let n = self.len();
        let mut tab = [[0.0; 16]; 3];
        let mut der = [[0.0; 16]; 3];
        tab[2][0] = 1.0;
        for d in 0..self.dim {
            let xi = (x[d] - self.center[d]) / self.half[d];
            legendre_table(p, xi, &mut tab[d], &mut der[d]);
        }
        let mut raw = [0.0; 64];
        let mut raw_grad = [Point::zeros(); 64];
        for (j, a) in self.indices.iter().enumerate() {
            let (l0, l1, l2) = (tab[0][a[0]], tab[1][a[1]], tab[2][a[2]]);
            let (d0, d1, d2) = (der[0][a[0]], der[1][a[1]], der[2][a[2]]);
            raw[j] = l0 * l1 * l2;
            raw_grad[j] = Point::new(
                d0 * l1 * l2 / self.half.x,
                l0 * d1 * l2 / self.half.y,
                if self.dim == 3 { l0 * l1 * d2 / self.half.z } else { 0.0 },
            );
        }
        for i in 0..n {
            let mut v = 0.0;
            let mut g = Point::zeros();
            for j in 0..=i {
                let t = self.transform[(i, j)];
                v += t * raw[j];
                g += raw_grad[j] * t;
            }
            vals[i] = v;
            grads[i] = g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_counts() {
        assert_eq!(dofs_per_element(3, 1), 4);
        assert_eq!(dofs_per_element(2, 2), 6);
        assert_eq!(dofs_per_element(3, 4), 35);
        for dim in 2..=3 {
            for p in 0..=6 {
                assert_eq!(multi_indices(dim, p).len(), dofs_per_element(dim, p));
            }
        }
    }

    #[test]
    fn legendre_derivatives_match_finite_differences() {
        let mut v = [0.0; 16];
        let mut d = [0.0; 16];
        let mut vp = [0.0; 16];
        let mut vm = [0.0; 16];
        let h = 1e-6;
        legendre_table(8, 0.3, &mut v, &mut d);
        legendre_table(8, 0.3 + h, &mut vp, &mut [0.0; 16]);
        legendre_table(8, 0.3 - h, &mut vm, &mut [0.0; 16]);
        for k in 0..=8 {
            assert!((d[k] - (vp[k] - vm[k]) / (2.0 * h)).abs() < 1e-7);
        }
        assert!((v[2] - 0.5 * (3.0 * 0.09 - 1.0)).abs() < 1e-15);
    }
}
