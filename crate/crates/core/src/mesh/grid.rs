//! Structured Cartesian grids of quadrilaterals and hexahedra.

use super::{MeshError, Point, PolyMesh, RawMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub dim: usize,
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn new(min: Point, max: Point) -> Result<Self, MeshError> {
        let dim = if min.z == 0.0 && max.z == 0.0 { 2 } else { 3 };
        Self::with_dim(dim, min, max)
    }

    pub fn with_dim(dim: usize, min: Point, max: Point) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::InvalidDimension(dim));
        }
        for axis in 0..dim {
            if !(max[axis] > min[axis]) {
                return Err(MeshError::InvertedBox(axis));
            }
        }
        Ok(BoundingBox { dim, min, max })
    }

    /// `(0, 1)^dim`.
    pub fn unit(dim: usize) -> Self {
        let mut max = Point::zeros();
        for axis in 0..dim {
            max[axis] = 1.0;
        }
        BoundingBox { dim, min: Point::zeros(), max }
    }

    pub(crate) fn enclosing<'a>(dim: usize, points: impl Iterator<Item = &'a Point>) -> Self {
        let mut min = Point::repeat(f64::INFINITY);
        let mut max = Point::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        if dim == 2 {
            min.z = 0.0;
            max.z = 0.0;
        }
        BoundingBox { dim, min, max }
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.extent(a)).product()
    }

    pub fn center(&self) -> Point {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..self.dim).all(|a| x[a] >= self.min[a] && x[a] <= self.max[a])
    }
}

/// Uniform grid of `cells[0] x cells[1] (x cells[2])` boxes covering `bbox`.
/// In 3D every quadrilateral facet is split into two triangles. All boundary
/// faces are tagged Neumann.
pub fn build_cartesian_grid(dim: usize, cells: &[usize], bbox: &BoundingBox) -> Result<PolyMesh, MeshError> {
    if dim != 2 && dim != 3 {
        return Err(MeshError::InvalidDimension(dim));
    }
    if cells.len() != dim {
        return Err(MeshError::CellCountMismatch { expected: dim, got: cells.len() });
    }
    if let Some(axis) = cells.iter().position(|&n| n == 0) {
        return Err(MeshError::ZeroCells(axis));
    }
    let bbox = BoundingBox::with_dim(dim, bbox.min, bbox.max)?;
    let raw = if dim == 2 { grid_2d(cells, &bbox) } else { grid_3d(cells, &bbox) };
    PolyMesh::from_raw(raw)
}

fn coordinate(bbox: &BoundingBox, axis: usize, i: usize, n: usize) -> f64 {
    if i == n {
        bbox.max[axis]
    } else {
        bbox.min[axis] + bbox.extent(axis) * i as f64 / n as f64
    }
}

fn grid_2d(cells: &[usize], bbox: &BoundingBox) -> RawMesh {
    let (nx, ny) = (cells[0], cells[1]);
    let vid = |i: usize, j: usize| i + (nx + 1) * j;
    let eid = |i: usize, j: usize| i + nx * j;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point::new(coordinate(bbox, 0, i, nx), coordinate(bbox, 1, j, ny), 0.0));
        }
    }
    let mut faces = Vec::new();
    let mut elements = vec![Vec::with_capacity(4); nx * ny];
    // edges normal to x
    for j in 0..ny {
        for i in 0..=nx {
            let f = faces.len();
            let tag = if i == 0 || i == nx { 'N' } else { 'I' };
            faces.push((vec![vid(i, j), vid(i, j + 1)], tag));
            if i > 0 {
                elements[eid(i - 1, j)].push(f);
            }
            if i < nx {
                elements[eid(i, j)].push(f);
            }
        }
    }
    // edges normal to y
    for j in 0..=ny {
        for i in 0..nx {
            let f = faces.len();
            let tag = if j == 0 || j == ny { 'N' } else { 'I' };
            faces.push((vec![vid(i, j), vid(i + 1, j)], tag));
            if j > 0 {
                elements[eid(i, j - 1)].push(f);
            }
            if j < ny {
                elements[eid(i, j)].push(f);
            }
        }
    }
    for el in elements.iter_mut() {
        el.sort_unstable();
    }
    RawMesh { dim: 2, vertices, faces, elements, directions: None }
}

fn grid_3d(cells: &[usize], bbox: &BoundingBox) -> RawMesh {
    let (nx, ny, nz) = (cells[0], cells[1], cells[2]);
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let eid = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Point::new(
                    coordinate(bbox, 0, i, nx),
                    coordinate(bbox, 1, j, ny),
                    coordinate(bbox, 2, k, nz),
                ));
            }
        }
    }
    let mut faces = Vec::new();
    let mut elements = vec![Vec::with_capacity(12); nx * ny * nz];
    // A quad facet with corners in cyclic order, split fan-wise from its
    // first corner, attached to the (up to two) cells on either side.
    let mut add_quad = |quad: [usize; 4], boundary: bool, cells: [Option<usize>; 2]| {
        let tag = if boundary { 'N' } else { 'I' };
        for tri in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
            let f = faces.len();
            faces.push((tri.to_vec(), tag));
            for e in cells.iter().flatten() {
                elements[*e].push(f);
            }
        }
    };
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..=nx {
                let quad = [vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)];
                let lo = (i > 0).then(|| eid(i - 1, j, k));
                let hi = (i < nx).then(|| eid(i, j, k));
                add_quad(quad, i == 0 || i == nx, [lo, hi]);
            }
        }
    }
    for k in 0..nz {
        for j in 0..=ny {
            for i in 0..nx {
                let quad = [vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j, k + 1), vid(i, j, k + 1)];
                let lo = (j > 0).then(|| eid(i, j - 1, k));
                let hi = (j < ny).then(|| eid(i, j, k));
                add_quad(quad, j == 0 || j == ny, [lo, hi]);
            }
        }
    }
    for k in 0..=nz {
        for j in 0..ny {
            for i in 0..nx {
                let quad = [vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)];
                let lo = (k > 0).then(|| eid(i, j, k - 1));
                let hi = (k < nz).then(|| eid(i, j, k));
                add_quad(quad, k == 0 || k == nz, [lo, hi]);
            }
        }
    }
    for el in elements.iter_mut() {
        el.sort_unstable();
    }
    RawMesh { dim: 3, vertices, faces, elements, directions: None }
}
