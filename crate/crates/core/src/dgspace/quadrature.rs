//! Gauss rules on intervals, boxes and simplices.
//!
//! Simplex rules use the collapsed-coordinate (Duffy) map of a tensor Gauss
//! rule, which gives arbitrary-order rules with positive weights.

use crate::mesh::{Element, Face, PolyMesh, Point};

/// Quadrature points and weights in physical coordinates.
#[derive(Debug, Clone, Default)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate<F: FnMut(&Point) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    fn append(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

/// `n`-point Gauss–Legendre nodes and weights on `[-1, 1]`, exact up to
/// degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Number of Gauss points needed for exactness at polynomial `order`.
fn points_for(order: usize) -> usize {
    (order + 2) / 2
}

/// Gauss rule on `[0, 1]` exact to `order`.
fn unit_interval(order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(points_for(order).max(1));
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

pub fn box_rule(min: &Point, max: &Point, dim: usize, order: usize) -> QuadratureRule {
    let (x, w) = unit_interval(order);
    let mut rule = QuadratureRule::default();
    let ext = max - min;
    let nz = if dim == 3 { x.len() } else { 1 };
    for k in 0..nz {
        for j in 0..x.len() {
            for i in 0..x.len() {
                let mut p = Point::new(min.x + ext.x * x[i], min.y + ext.y * x[j], 0.0);
                let mut weight = w[i] * w[j] * ext.x * ext.y;
                if dim == 3 {
                    p.z = min.z + ext.z * x[k];
                    weight *= w[k] * ext.z;
                }
                rule.points.push(p);
                rule.weights.push(weight);
            }
        }
    }
    rule
}

pub fn segment_rule(a: &Point, b: &Point, order: usize) -> QuadratureRule {
    let (x, w) = unit_interval(order);
    let len = (b - a).norm();
    QuadratureRule {
        points: x.iter().map(|t| a + (b - a) * *t).collect(),
        weights: w.iter().map(|w| w * len).collect(),
    }
}

pub fn triangle_rule(a: &Point, b: &Point, c: &Point, order: usize) -> QuadratureRule {
    let (x, w) = unit_interval(order + 1);
    let area2 = (b - a).cross(&(c - a)).norm();
    let mut rule = QuadratureRule::default();
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            let s = *u;
            let t = (1.0 - u) * v;
            rule.points.push(a + (b - a) * s + (c - a) * t);
            rule.weights.push(wu * wv * (1.0 - u) * area2);
        }
    }
    rule
}

pub fn tetrahedron_rule(a: &Point, b: &Point, c: &Point, d: &Point, order: usize) -> QuadratureRule {
    let (x, w) = unit_interval(order + 2);
    let vol6 = (b - a).cross(&(c - a)).dot(&(d - a)).abs();
    let mut rule = QuadratureRule::default();
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            for (r, wr) in x.iter().zip(&w) {
                let s = *u;
                let t = (1.0 - u) * v;
                let z = (1.0 - u) * (1.0 - v) * r;
                rule.points.push(a + (b - a) * s + (c - a) * t + (d - a) * z);
                rule.weights.push(wu * wv * wr * (1.0 - u) * (1.0 - u) * (1.0 - v) * vol6);
            }
        }
    }
    rule
}

/// Rule exact to `order` on a mesh element: tensor Gauss on box elements,
/// composite simplex rules over the center-to-face decomposition otherwise.
pub fn element_rule(mesh: &PolyMesh, element: &Element, order: usize) -> QuadratureRule {
    let dim = mesh.dim();
    if element.is_box {
        return box_rule(&element.bbox.min, &element.bbox.max, dim, order);
    }
    let verts = mesh.vertices();
    let mut rule = QuadratureRule::default();
    for &f in &element.faces {
        let face = &mesh.faces()[f];
        let v = &face.vertices;
        let sub = if dim == 2 {
            triangle_rule(&element.center, &verts[v[0]], &verts[v[1]], order)
        } else {
            tetrahedron_rule(&element.center, &verts[v[0]], &verts[v[1]], &verts[v[2]], order)
        };
        rule.append(sub);
    }
    rule
}

pub fn face_rule(mesh: &PolyMesh, face: &Face, order: usize) -> QuadratureRule {
    let v = &face.vertices;
    let verts = mesh.vertices();
    if mesh.dim() == 2 {
        segment_rule(&verts[v[0]], &verts[v[1]], order)
    } else {
        triangle_rule(&verts[v[0]], &verts[v[1]], &verts[v[2]], order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_grid, read_mesh, BoundingBox};

    #[test]
    fn gauss_legendre_small_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        for n in 1..20 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn x_squared_on_unit_interval() {
        let rule = segment_rule(&Point::zeros(), &Point::new(1.0, 0.0, 0.0), 3);
        let v = rule.integrate(|p| p.x * p.x);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    /// ∫ x^a y^b z^c over the reference simplex = a! b! c! / (a+b+c+dim)!
    fn simplex_moment(exps: &[u32]) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        let num: f64 = exps.iter().map(|&e| fact(e)).product();
        num / fact(exps.iter().sum::<u32>() + exps.len() as u32)
    }

    #[test]
    fn simplex_rules_are_exact() {
        let o = Point::zeros();
        let ex = Point::new(1.0, 0.0, 0.0);
        let ey = Point::new(0.0, 1.0, 0.0);
        let ez = Point::new(0.0, 0.0, 1.0);
        for order in 0..8u32 {
            let tri = triangle_rule(&o, &ex, &ey, order as usize);
            let tet = tetrahedron_rule(&o, &ex, &ey, &ez, order as usize);
            for a in 0..=order {
                for b in 0..=order - a {
                    let q = tri.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                    assert!((q - simplex_moment(&[a, b])).abs() < 1e-14);
                    let c = order - a - b;
                    let q = tet.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32) * p.z.powi(c as i32));
                    assert!((q - simplex_moment(&[a, b, c])).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn element_weights_sum_to_measure() {
        let bbox = BoundingBox::new(Point::new(0.0, 0.0, 0.0), Point::new(2.0, 1.0, 0.5)).unwrap();
        let mesh = build_cartesian_grid(3, &[2, 3, 1], &bbox).unwrap();
        for el in mesh.elements() {
            let rule = element_rule(&mesh, el, 3);
            assert!((rule.weights.iter().sum::<f64>() - el.measure).abs() < 1e-14);
        }
    }

    #[test]
    fn composite_rule_on_a_pentagon() {
        // unit square with one corner cut: a non-box polygon
        let text = "polymesh 2\nvertices 5\n0 0\n1 0\n1 0.5\n0.5 1\n0 1\n\
faces 5\n0 1 N\n1 2 N\n2 3 N\n3 4 N\n4 0 N\nelements 1\n0 1 2 3 4\n";
        let mesh = read_mesh(text.as_bytes()).unwrap();
        let el = &mesh.elements()[0];
        assert!(!el.is_box);
        assert!((el.measure - 0.875).abs() < 1e-14);
        let rule = element_rule(&mesh, el, 4);
        assert!((rule.weights.iter().sum::<f64>() - 0.875).abs() < 1e-14);
        // ∫ x² over the square minus the cut triangle {x>0.5, y>0.5, x+y>1.5}
        // = 1/3 - ∫_{0.5}^{1} x² (x - 0.5) dx
        let cut = (1.0f64.powi(4) - 0.5f64.powi(4)) / 4.0 - 0.5 * (1.0f64.powi(3) - 0.5f64.powi(3)) / 3.0;
        let exact = 1.0 / 3.0 - cut;
        assert!((rule.integrate(|p| p.x * p.x) - exact).abs() < 1e-14);
    }

    #[test]
    fn random_polynomial_against_antiderivative() {
        // degree 2p polynomial with p = 3 on a box, compared with its exact integral
        let coeffs = [0.3, -1.2, 0.7, 2.1, -0.4, 0.9, 1.3];
        let (a, b) = (0.25, 1.75);
        let rule = segment_rule(&Point::new(a, 0.0, 0.0), &Point::new(b, 0.0, 0.0), 6);
        let q = rule.integrate(|p| coeffs.iter().enumerate().map(|(k, c)| c * p.x.powi(k as i32)).sum());
        let anti = |x: f64| coeffs.iter().enumerate().map(|(k, c)| c * x.powi(k as i32 + 1) / (k as f64 + 1.0)).sum::<f64>();
        assert!((q - (anti(b) - anti(a))).abs() < 1e-12);
        let sq = box_rule(&Point::new(a, a, 0.0), &Point::new(b, b, 0.0), 2, 6);
        let q2 = sq.integrate(|p| p.x.powi(3) * p.y.powi(3) + p.x * p.y.powi(5));
        let i = |k: i32| (b.powi(k + 1) - a.powi(k + 1)) / (k as f64 + 1.0);
        assert!((q2 - (i(3) * i(3) + i(1) * i(5))).abs() < 1e-12);
        let _ = BoundingBox::unit(2);
    }
}
