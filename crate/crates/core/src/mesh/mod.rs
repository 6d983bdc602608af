//! Polytopal meshes with sub-triangulated interfaces.
//!
//! Elements are stored as sets of face indices; every face is a simplex of
//! dimension `dim - 1` (a segment in 2D, a triangle in 3D). Planar polygonal
//! interfaces between 3D elements are therefore split into several faces.
//! Each face knows its owner element (the first element listing it), an
//! optional second neighbor, its class and a unit normal pointing out of the
//! owner.

mod grid;
mod io;

use std::collections::BTreeMap;

use nalgebra::Vector3;
use thiserror::Error;

pub use grid::{build_cartesian_grid, BoundingBox};
pub use io::{import_mesh, read_mesh, write_mesh, export_mesh, parse_raw_mesh};

/// Coordinates are always stored in three components; 2D meshes keep `z = 0`.
pub type Point = Vector3<f64>;

const NORMAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh dimension must be 2 or 3, got {0}")]
    InvalidDimension(usize),
    #[error("expected {expected} cell counts, got {got}")]
    CellCountMismatch { expected: usize, got: usize },
    #[error("cell count along axis {0} is zero")]
    ZeroCells(usize),
    #[error("bounding box is inverted or degenerate along axis {0}")]
    InvertedBox(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid mesh: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("harmonic average undefined: {0}")]
    HarmonicDomain(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A single broken mesh invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("face {face} references missing vertex {vertex}")]
    DanglingVertex { face: usize, vertex: usize },
    #[error("element {element} references missing face {face}")]
    DanglingFace { element: usize, face: usize },
    #[error("face {face} has {vertices} vertices, expected {expected}")]
    FaceArity { face: usize, vertices: usize, expected: usize },
    #[error("face {face} is shared by {count} elements (non-manifold)")]
    NonManifold { face: usize, count: usize },
    #[error("face {0} is not referenced by any element")]
    OrphanFace(usize),
    #[error("face {face} is tagged {tag} but has {neighbors} neighbor(s)")]
    TagMismatch { face: usize, tag: char, neighbors: usize },
    #[error("face {face} normal has length {length:e}, expected 1")]
    NonUnitNormal { face: usize, length: f64 },
    #[error("element {element} has non-positive measure {measure:e}")]
    NonPositiveMeasure { element: usize, measure: f64 },
    #[error("element {element} is not closed (|sum n dA| = {residual:e})")]
    OpenElement { element: usize, residual: f64 },
    #[error("direction {element} has length {length:e}, expected 1")]
    NonUnitDirection { element: usize, length: f64 },
    #[error("{count} directions given for {elements} elements")]
    DirectionCount { count: usize, elements: usize },
}

/// Boundary condition type carried by a boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceClass {
    Internal,
    DirichletBoundary,
    NeumannBoundary,
}

impl FaceClass {
    pub fn tag(self) -> char {
        match self {
            FaceClass::Internal => 'I',
            FaceClass::DirichletBoundary => 'D',
            FaceClass::NeumannBoundary => 'N',
        }
    }

    pub fn from_tag(tag: char) -> Option<Self> {
        match tag {
            'I' => Some(FaceClass::Internal),
            'D' => Some(FaceClass::DirichletBoundary),
            'N' => Some(FaceClass::NeumannBoundary),
            _ => None,
        }
    }

    pub fn is_boundary(self) -> bool {
        self != FaceClass::Internal
    }
}

impl From<BoundaryKind> for FaceClass {
    fn from(kind: BoundaryKind) -> Self {
        match kind {
            BoundaryKind::Dirichlet => FaceClass::DirichletBoundary,
            BoundaryKind::Neumann => FaceClass::NeumannBoundary,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Face {
    pub vertices: Vec<usize>,
    /// First element listing this face; the normal points out of it.
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub class: FaceClass,
    pub normal: Point,
    pub measure: f64,
    pub centroid: Point,
}

impl Face {
    /// Outward unit normal seen from `element`.
    pub fn normal_from(&self, element: usize) -> Point {
        if element == self.owner {
            self.normal
        } else {
            -self.normal
        }
    }
}

#[derive(Debug, Clone)]
pub struct Element {
    pub faces: Vec<usize>,
    pub vertices: Vec<usize>,
    pub measure: f64,
    pub diameter: f64,
    /// Vertex average; elements are assumed star-shaped with respect to it.
    pub center: Point,
    pub bbox: BoundingBox,
    /// True when the element fills its bounding box (tensor quadrature applies).
    pub is_box: bool,
}

/// Topology as read from a file, before any geometry is derived.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    pub faces: Vec<(Vec<usize>, char)>,
    pub elements: Vec<Vec<usize>>,
    pub directions: Option<Vec<Point>>,
}

#[derive(Debug, Clone)]
pub struct PolyMesh {
    dim: usize,
    vertices: Vec<Point>,
    faces: Vec<Face>,
    elements: Vec<Element>,
    directions: Option<Vec<Point>>,
    mesh_size: f64,
}

impl PolyMesh {
    /// Builds the mesh from raw topology, deriving normals, measures and
    /// neighbor information. All invariant violations are collected.
    pub fn from_raw(raw: RawMesh) -> Result<Self, MeshError> {
        if raw.dim != 2 && raw.dim != 3 {
            return Err(MeshError::InvalidDimension(raw.dim));
        }
        let mut violations = Vec::new();
        let nv = raw.vertices.len();
        let nf = raw.faces.len();

        for (f, (verts, _)) in raw.faces.iter().enumerate() {
            if verts.len() != raw.dim {
                violations.push(Violation::FaceArity { face: f, vertices: verts.len(), expected: raw.dim });
            }
            for &v in verts {
                if v >= nv {
                    violations.push(Violation::DanglingVertex { face: f, vertex: v });
                }
            }
        }
        let mut incidence: Vec<Vec<usize>> = vec![Vec::new(); nf];
        for (e, faces) in raw.elements.iter().enumerate() {
            for &f in faces {
                if f >= nf {
                    violations.push(Violation::DanglingFace { element: e, face: f });
                } else if !incidence[f].contains(&e) {
                    incidence[f].push(e);
                }
            }
        }
        for (f, inc) in incidence.iter().enumerate() {
            let tag = raw.faces[f].1;
            match inc.len() {
                0 => violations.push(Violation::OrphanFace(f)),
                1 if tag == 'I' => violations.push(Violation::TagMismatch { face: f, tag, neighbors: 1 }),
                2 if tag != 'I' => violations.push(Violation::TagMismatch { face: f, tag, neighbors: 2 }),
                1 | 2 => {}
                n => violations.push(Violation::NonManifold { face: f, count: n }),
            }
        }
        if let Some(dirs) = &raw.directions {
            if dirs.len() != raw.elements.len() {
                violations.push(Violation::DirectionCount { count: dirs.len(), elements: raw.elements.len() });
            }
            for (e, d) in dirs.iter().enumerate() {
                if (d.norm() - 1.0).abs() > 1e-10 {
                    violations.push(Violation::NonUnitDirection { element: e, length: d.norm() });
                }
            }
        }
        if !violations.is_empty() {
            return Err(MeshError::Invalid(violations));
        }

        let centers: Vec<Point> = raw
            .elements
            .iter()
            .map(|faces| {
                let verts = element_vertices(faces, &raw.faces);
                verts.iter().map(|&v| raw.vertices[v]).sum::<Point>() / verts.len() as f64
            })
            .collect();

        let mut faces = Vec::with_capacity(nf);
        for (f, (verts, tag)) in raw.faces.iter().enumerate() {
            let pts: Vec<Point> = verts.iter().map(|&v| raw.vertices[v]).collect();
            let (mut normal, measure) = simplex_normal(&pts);
            let length = normal.norm();
            if !((length - 1.0).abs() <= NORMAL_TOLERANCE) {
                violations.push(Violation::NonUnitNormal { face: f, length });
            }
            let centroid = pts.iter().sum::<Point>() / pts.len() as f64;
            let owner = incidence[f][0];
            if (centroid - centers[owner]).dot(&normal) < 0.0 {
                normal = -normal;
            }
            let class = FaceClass::from_tag(*tag).ok_or_else(|| MeshError::Parse {
                line: 0,
                message: format!("unknown face tag '{tag}'"),
            })?;
            faces.push(Face {
                vertices: verts.clone(),
                owner,
                neighbor: incidence[f].get(1).copied(),
                class,
                normal,
                measure,
                centroid,
            });
        }

        let mut elements = Vec::with_capacity(raw.elements.len());
        for (e, face_ids) in raw.elements.iter().enumerate() {
            let vertices = element_vertices(face_ids, &raw.faces);
            let center = centers[e];
            let mut measure = 0.0;
            let mut closure = Point::zeros();
            for &f in face_ids {
                let face = &faces[f];
                let n = face.normal_from(e);
                measure += (face.centroid - center).dot(&n) * face.measure;
                closure += n * face.measure;
            }
            measure /= raw.dim as f64;
            let scale = face_ids.iter().map(|&f| faces[f].measure).fold(0.0, f64::max);
            if closure.norm() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
                violations.push(Violation::OpenElement { element: e, residual: closure.norm() });
            }
            if !(measure > 0.0) {
                violations.push(Violation::NonPositiveMeasure { element: e, measure });
            }
            let mut diameter: f64 = 0.0;
            for (i, &a) in vertices.iter().enumerate() {
                for &b in &vertices[i + 1..] {
                    diameter = diameter.max((raw.vertices[a] - raw.vertices[b]).norm());
                }
            }
            let bbox = BoundingBox::enclosing(raw.dim, vertices.iter().map(|&v| &raw.vertices[v]));
            let is_box = (measure - bbox.volume()).abs() <= 1e-12 * bbox.volume();
            elements.push(Element { faces: face_ids.clone(), vertices, measure, diameter, center, bbox, is_box });
        }
        if !violations.is_empty() {
            return Err(MeshError::Invalid(violations));
        }
        let mesh_size = elements.iter().map(|e| e.diameter).fold(0.0, f64::max);
        Ok(PolyMesh { dim: raw.dim, vertices: raw.vertices, faces, elements, directions: raw.directions, mesh_size })
    }

    pub fn to_raw(&self) -> RawMesh {
        RawMesh {
            dim: self.dim,
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|f| (f.vertices.clone(), f.class.tag())).collect(),
            elements: self.elements.iter().map(|e| e.faces.clone()).collect(),
            directions: self.directions.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Per-element axonal directions, when the mesh carries them.
    pub fn directions(&self) -> Option<&[Point]> {
        self.directions.as_deref()
    }

    pub fn with_directions(mut self, directions: Vec<Point>) -> Result<Self, MeshError> {
        let mut violations = Vec::new();
        if directions.len() != self.elements.len() {
            violations.push(Violation::DirectionCount { count: directions.len(), elements: self.elements.len() });
        }
        for (e, d) in directions.iter().enumerate() {
            if (d.norm() - 1.0).abs() > 1e-10 {
                violations.push(Violation::NonUnitDirection { element: e, length: d.norm() });
            }
        }
        if !violations.is_empty() {
            return Err(MeshError::Invalid(violations));
        }
        self.directions = Some(directions);
        Ok(self)
    }

    /// Global mesh size `h = max h_K`.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn total_measure(&self) -> f64 {
        self.elements.iter().map(|e| e.measure).sum()
    }

    pub fn count_faces(&self, class: FaceClass) -> usize {
        self.faces.iter().filter(|f| f.class == class).count()
    }

    /// Re-tags every boundary face; internal faces are left untouched.
    pub fn tag_boundary<P>(&self, predicate: P) -> PolyMesh
    where
        P: Fn(&Point) -> BoundaryKind,
    {
        let mut mesh = self.clone();
        for face in mesh.faces.iter_mut().filter(|f| f.class.is_boundary()) {
            face.class = predicate(&face.centroid).into();
        }
        mesh
    }

    /// Checks the stored geometry against the mesh invariants.
    pub fn check(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (f, face) in self.faces.iter().enumerate() {
            let length = face.normal.norm();
            if !((length - 1.0).abs() <= NORMAL_TOLERANCE) {
                out.push(Violation::NonUnitNormal { face: f, length });
            }
            let neighbors = 1 + face.neighbor.is_some() as usize;
            if face.class.is_boundary() == face.neighbor.is_some() {
                out.push(Violation::TagMismatch { face: f, tag: face.class.tag(), neighbors });
            }
        }
        for (e, el) in self.elements.iter().enumerate() {
            if !(el.measure > 0.0) {
                out.push(Violation::NonPositiveMeasure { element: e, measure: el.measure });
            }
        }
        out
    }

    /// Geometric statistics used in place of an algorithmic regularity check.
    pub fn report(&self) -> MeshReport {
        let diam = self.elements.iter().map(|e| e.diameter);
        let meas = self.elements.iter().map(|e| e.measure);
        let nfaces = self.elements.iter().map(|e| e.faces.len());
        MeshReport {
            dim: self.dim,
            elements: self.elements.len(),
            vertices: self.vertices.len(),
            internal_faces: self.count_faces(FaceClass::Internal),
            dirichlet_faces: self.count_faces(FaceClass::DirichletBoundary),
            neumann_faces: self.count_faces(FaceClass::NeumannBoundary),
            h: self.mesh_size,
            h_min: diam.clone().fold(f64::INFINITY, f64::min),
            measure_min: meas.clone().fold(f64::INFINITY, f64::min),
            measure_max: meas.fold(0.0, f64::max),
            total_measure: self.total_measure(),
            faces_per_element_min: nfaces.clone().min().unwrap_or(0),
            faces_per_element_max: nfaces.max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub dim: usize,
    pub elements: usize,
    pub vertices: usize,
    pub internal_faces: usize,
    pub dirichlet_faces: usize,
    pub neumann_faces: usize,
    pub h: f64,
    pub h_min: f64,
    pub measure_min: f64,
    pub measure_max: f64,
    pub total_measure: f64,
    pub faces_per_element_min: usize,
    pub faces_per_element_max: usize,
}

impl std::fmt::Display for MeshReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "dimension        {}", self.dim)?;
        writeln!(f, "vertices         {}", self.vertices)?;
        writeln!(f, "elements         {}", self.elements)?;
        writeln!(
            f,
            "faces            {} internal, {} dirichlet, {} neumann",
            self.internal_faces, self.dirichlet_faces, self.neumann_faces
        )?;
        writeln!(f, "faces/element    {}..{}", self.faces_per_element_min, self.faces_per_element_max)?;
        writeln!(f, "h                {:.6e} (min h_K {:.6e})", self.h, self.h_min)?;
        writeln!(f, "|K|              {:.6e}..{:.6e}", self.measure_min, self.measure_max)?;
        write!(f, "total measure    {:.12e}", self.total_measure)
    }
}

fn element_vertices(face_ids: &[usize], faces: &[(Vec<usize>, char)]) -> Vec<usize> {
    let mut verts: Vec<usize> = face_ids.iter().flat_map(|&f| faces[f].0.iter().copied()).collect();
    verts.sort_unstable();
    verts.dedup();
    verts
}

/// Unit normal (arbitrary orientation) and measure of a segment or triangle.
fn simplex_normal(pts: &[Point]) -> (Point, f64) {
    match pts.len() {
        2 => {
            let t = pts[1] - pts[0];
            let len = t.norm();
            (Point::new(t.y, -t.x, 0.0) / len, len)
        }
        3 => {
            let c = (pts[1] - pts[0]).cross(&(pts[2] - pts[0]));
            let len = c.norm();
            (c / len, 0.5 * len)
        }
        _ => (Point::zeros(), 0.0),
    }
}

/// `{v}_H = 2 v⁺ v⁻ / (v⁺ + v⁻)`.
pub fn harmonic_average(v_plus: f64, v_minus: f64) -> Result<f64, MeshError> {
    if v_plus < 0.0 || v_minus < 0.0 || v_plus.is_nan() || v_minus.is_nan() {
        return Err(MeshError::HarmonicDomain(format!("negative argument ({v_plus}, {v_minus})")));
    }
    if v_plus == 0.0 && v_minus == 0.0 {
        return Err(MeshError::HarmonicDomain("both arguments are zero".into()));
    }
    Ok(2.0 * v_plus * v_minus / (v_plus + v_minus))
}

/// Groups elements by the rounded coordinate of their center along `axis`.
/// Returns `(coordinate, element ids)` sorted by coordinate.
pub fn slabs_along(mesh: &PolyMesh, axis: usize) -> Vec<(f64, Vec<usize>)> {
    let h = mesh.mesh_size().max(f64::MIN_POSITIVE);
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (e, el) in mesh.elements().iter().enumerate() {
        let key = (el.center[axis] / h * 1e6).round() as i64;
        groups.entry(key).or_default().push(e);
    }
    groups
        .into_values()
        .map(|ids| {
            let x = ids.iter().map(|&e| mesh.elements()[e].center[axis]).sum::<f64>() / ids.len() as f64;
            (x, ids)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn harmonic_average_examples() {
        assert_eq!(harmonic_average(2.0, 2.0).unwrap(), 2.0);
        assert_eq!(harmonic_average(1.0, 3.0).unwrap(), 1.5);
        assert_eq!(harmonic_average(5.0, 0.0).unwrap(), 0.0);
        assert!(harmonic_average(0.0, 0.0).is_err());
        assert!(harmonic_average(-1.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn harmonic_average_bounds(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
            let h = harmonic_average(a, b).unwrap();
            prop_assert_eq!(h, harmonic_average(b, a).unwrap());
            let m = a.min(b);
            prop_assert!(h >= m * (1.0 - 1e-14));
            prop_assert!(h <= 2.0 * m * (1.0 + 1e-14));
        }
    }

    fn unit_cube() -> PolyMesh {
        build_cartesian_grid(3, &[1, 1, 1], &BoundingBox::unit(3)).unwrap()
    }

    #[test]
    fn tagging_one_plane() {
        let mesh = unit_cube().tag_boundary(|x| {
            if x.x.abs() < 1e-12 {
                BoundaryKind::Dirichlet
            } else {
                BoundaryKind::Neumann
            }
        });
        assert_eq!(mesh.count_faces(FaceClass::DirichletBoundary), 2);
        assert_eq!(mesh.count_faces(FaceClass::NeumannBoundary), 10);
    }

    #[test]
    fn tagging_neumann_everywhere_leaves_no_dirichlet() {
        let mesh = unit_cube().tag_boundary(|_| BoundaryKind::Neumann);
        assert_eq!(mesh.count_faces(FaceClass::DirichletBoundary), 0);
    }

    #[test]
    fn alternating_tags_partition_boundary() {
        let grid = build_cartesian_grid(2, &[2, 2], &BoundingBox::unit(2)).unwrap();
        let mesh = grid.tag_boundary(|x| {
            if x.x < 0.5 {
                BoundaryKind::Dirichlet
            } else {
                BoundaryKind::Neumann
            }
        });
        let d = mesh.count_faces(FaceClass::DirichletBoundary);
        let n = mesh.count_faces(FaceClass::NeumannBoundary);
        assert!(d > 0 && n > 0);
        assert_eq!(d + n, 8);
        assert_eq!(mesh.count_faces(FaceClass::Internal), 4);
    }

    #[test]
    fn non_manifold_face_is_rejected() {
        let mut raw = build_cartesian_grid(2, &[2, 1], &BoundingBox::unit(2)).unwrap().to_raw();
        let shared = raw.elements[0].iter().copied().find(|f| raw.elements[1].contains(f)).unwrap();
        raw.elements.push(vec![shared]);
        match PolyMesh::from_raw(raw) {
            Err(MeshError::Invalid(v)) => {
                assert!(v.iter().any(|x| matches!(x, Violation::NonManifold { count: 3, .. })))
            }
            other => panic!("expected non-manifold error, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_face_reports_non_unit_normal() {
        let mut raw = unit_cube().to_raw();
        let v = raw.faces[0].0[0];
        raw.faces[0].0[1] = v;
        let err = PolyMesh::from_raw(raw).unwrap_err();
        match err {
            MeshError::Invalid(v) => {
                assert!(v.iter().any(|x| matches!(x, Violation::NonUnitNormal { face: 0, .. })))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn check_flags_corrupted_normal() {
        let mut mesh = unit_cube();
        assert!(mesh.check().is_empty());
        mesh.faces[3].normal *= 1.5;
        assert_eq!(mesh.check().len(), 1);
        assert!(matches!(mesh.check()[0], Violation::NonUnitNormal { face: 3, .. }));
    }

    #[test]
    fn slabs_of_a_rod() {
        let mesh = build_cartesian_grid(
            3,
            &[5, 2, 2],
            &BoundingBox::new(Point::new(0.0, 0.0, 0.0), Point::new(10.0, 1.0, 1.0)).unwrap(),
        )
        .unwrap();
        let slabs = slabs_along(&mesh, 0);
        assert_eq!(slabs.len(), 5);
        for (i, (x, ids)) in slabs.iter().enumerate() {
            assert!((x - (2.0 * i as f64 + 1.0)).abs() < 1e-12);
            assert_eq!(ids.len(), 4);
        }
    }
}
