//! Line-oriented ASCII mesh format.
//!
//! ```text
//! polymesh <dim>
//! vertices <n>
//! <x> <y> [<z>]            (n lines)
//! faces <m>
//! <v0> <v1> [<v2>] <tag>   (m lines, tag in I/D/N)
//! elements <k>
//! <f0> <f1> ...            (k lines)
//! directions <k>           (optional, per-element unit axonal directions)
//! <ax> <ay> [<az>]
//! ```
//!
//! Indices are zero-based. Blank lines and lines starting with `#` are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{MeshError, Point, PolyMesh, RawMesh};

pub fn write_mesh<W: Write>(mesh: &PolyMesh, mut out: W) -> std::io::Result<()> {
    let dim = mesh.dim();
    writeln!(out, "polymesh {dim}")?;
    writeln!(out, "vertices {}", mesh.vertices().len())?;
    for v in mesh.vertices() {
        write_floats(&mut out, &v.as_slice()[..dim])?;
    }
    writeln!(out, "faces {}", mesh.faces().len())?;
    for f in mesh.faces() {
        for v in &f.vertices {
            write!(out, "{v} ")?;
        }
        writeln!(out, "{}", f.class.tag())?;
    }
    writeln!(out, "elements {}", mesh.n_elements())?;
    for el in mesh.elements() {
        let line: Vec<String> = el.faces.iter().map(|f| f.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    if let Some(dirs) = mesh.directions() {
        writeln!(out, "directions {}", dirs.len())?;
        for d in dirs {
            write_floats(&mut out, &d.as_slice()[..dim])?;
        }
    }
    Ok(())
}

fn write_floats<W: Write>(out: &mut W, xs: &[f64]) -> std::io::Result<()> {
    let line: Vec<String> = xs.iter().map(|x| format!("{x:.16e}")).collect();
    writeln!(out, "{}", line.join(" "))
}

pub fn export_mesh(mesh: &PolyMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_mesh(mesh, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn import_mesh(path: impl AsRef<Path>) -> Result<PolyMesh, MeshError> {
    read_mesh(BufReader::new(File::open(path)?))
}

pub fn read_mesh<R: Read>(input: R) -> Result<PolyMesh, MeshError> {
    PolyMesh::from_raw(parse_raw_mesh(input)?)
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    number: usize,
}

impl<R: Read> Lines<R> {
    fn next_content(&mut self) -> Result<Option<(usize, String)>, MeshError> {
        for line in self.inner.by_ref() {
            self.number += 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(Some((self.number, trimmed.to_string())));
        }
        Ok(None)
    }

    fn expect(&mut self, what: &str) -> Result<(usize, String), MeshError> {
        self.next_content()?.ok_or_else(|| MeshError::Parse {
            line: self.number + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn header(&mut self, keyword: &str) -> Result<usize, MeshError> {
        let (line, text) = self.expect(keyword)?;
        parse_header(line, &text, keyword)
    }
}

fn parse_header(line: usize, text: &str, keyword: &str) -> Result<usize, MeshError> {
    let mut parts = text.split_whitespace();
    if parts.next() != Some(keyword) {
        return Err(MeshError::Parse { line, message: format!("expected '{keyword} <count>', found '{text}'") });
    }
    let count = parts.next().and_then(|c| c.parse().ok());
    match (count, parts.next()) {
        (Some(n), None) => Ok(n),
        _ => Err(MeshError::Parse { line, message: format!("malformed '{keyword}' header") }),
    }
}

fn parse_point(line: usize, text: &str, dim: usize) -> Result<Point, MeshError> {
    let vals: Result<Vec<f64>, _> = text.split_whitespace().map(str::parse::<f64>).collect();
    let vals = vals.map_err(|e| MeshError::Parse { line, message: format!("bad coordinate: {e}") })?;
    if vals.len() != dim {
        return Err(MeshError::Parse { line, message: format!("expected {dim} coordinates, found {}", vals.len()) });
    }
    let mut p = Point::zeros();
    for (i, v) in vals.into_iter().enumerate() {
        p[i] = v;
    }
    Ok(p)
}

fn parse_indices(line: usize, tokens: &[&str]) -> Result<Vec<usize>, MeshError> {
    tokens
        .iter()
        .map(|t| t.parse::<usize>().map_err(|e| MeshError::Parse { line, message: format!("bad index '{t}': {e}") }))
        .collect()
}

/// Parses the text format without building geometry.
pub fn parse_raw_mesh<R: Read>(input: R) -> Result<RawMesh, MeshError> {
    let mut lines = Lines { inner: BufReader::new(input).lines(), number: 0 };
    let dim = lines.header("polymesh")?;
    if dim != 2 && dim != 3 {
        return Err(MeshError::InvalidDimension(dim));
    }
    let nv = lines.header("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, text) = lines.expect("vertex coordinates")?;
        vertices.push(parse_point(line, &text, dim)?);
    }
    let nf = lines.header("faces")?;
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, text) = lines.expect("face")?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let Some((tag, idx)) = tokens.split_last() else {
            return Err(MeshError::Parse { line, message: "empty face".into() });
        };
        let tag = match *tag {
            "I" => 'I',
            "D" => 'D',
            "N" => 'N',
            other => return Err(MeshError::Parse { line, message: format!("unknown face tag '{other}'") }),
        };
        if idx.len() != dim {
            return Err(MeshError::Parse { line, message: format!("face needs {dim} vertices, found {}", idx.len()) });
        }
        faces.push((parse_indices(line, idx)?, tag));
    }
    let ne = lines.header("elements")?;
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, text) = lines.expect("element")?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        elements.push(parse_indices(line, &tokens)?);
    }
    let directions = match lines.next_content()? {
        None => None,
        Some((line, text)) => {
            let nd = parse_header(line, &text, "directions")?;
            let mut dirs = Vec::with_capacity(nd);
            for _ in 0..nd {
                let (line, text) = lines.expect("direction")?;
                dirs.push(parse_point(line, &text, dim)?);
            }
            if let Some((line, text)) = lines.next_content()? {
                return Err(MeshError::Parse { line, message: format!("trailing content '{text}'") });
            }
            Some(dirs)
        }
    };
    Ok(RawMesh { dim, vertices, faces, elements, directions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_grid, BoundingBox, FaceClass, Violation};
    use proptest::prelude::*;

    fn round_trip(mesh: &PolyMesh) -> PolyMesh {
        let mut buf = Vec::new();
        write_mesh(mesh, &mut buf).unwrap();
        read_mesh(buf.as_slice()).unwrap()
    }

    #[test]
    fn hand_written_unit_cube_matches_generator() {
        // unit cube with vertices listed in a different order than the generator
        let text = "\
polymesh 3
vertices 8
1 1 1
0 0 0
1 0 0
0 1 0
1 1 0
0 0 1
1 0 1
0 1 1
faces 12
1 3 7 N
1 7 5 N
2 4 0 N
2 0 6 N
1 2 6 N
1 6 5 N
3 4 0 N
3 0 7 N
1 2 4 N
1 4 3 N
5 6 0 N
5 0 7 N
elements 1
0 1 2 3 4 5 6 7 8 9 10 11
";
        let mesh = read_mesh(text.as_bytes()).unwrap();
        let grid = build_cartesian_grid(3, &[1, 1, 1], &BoundingBox::unit(3)).unwrap();
        assert_eq!(mesh.n_elements(), grid.n_elements());
        assert_eq!(mesh.faces().len(), grid.faces().len());
        assert!((mesh.total_measure() - 1.0).abs() < 1e-14);
        assert!(mesh.elements()[0].is_box);
        assert_eq!(mesh.elements()[0].diameter, grid.elements()[0].diameter);
    }

    #[test]
    fn three_element_face_is_non_manifold() {
        let text = "\
polymesh 2
vertices 4
0 0
1 0
1 1
0 1
faces 4
0 1 N
1 2 I
2 3 N
3 0 N
elements 3
0 1 2 3
1
1
";
        match read_mesh(text.as_bytes()) {
            Err(MeshError::Invalid(v)) => assert!(v.contains(&Violation::NonManifold { face: 1, count: 3 })),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "polymesh 2\nvertices 2\n0 0\n1 x\n";
        match read_mesh(text.as_bytes()) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let truncated = "polymesh 2\nvertices 3\n0 0\n1 0\n";
        match read_mesh(truncated.as_bytes()) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_references_are_reported() {
        let text = "polymesh 2\nvertices 2\n0 0\n1 0\nfaces 1\n0 5 N\nelements 1\n0 3\n";
        match read_mesh(text.as_bytes()) {
            Err(MeshError::Invalid(v)) => {
                assert!(v.contains(&Violation::DanglingVertex { face: 0, vertex: 5 }));
                assert!(v.contains(&Violation::DanglingFace { element: 0, face: 3 }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn floats_survive_export_exactly() {
        let bbox = BoundingBox::new(Point::new(0.1, 0.2, 0.3), Point::new(1.0 / 3.0, 0.7, 0.9)).unwrap();
        let mesh = build_cartesian_grid(3, &[3, 2, 1], &bbox).unwrap();
        let back = round_trip(&mesh);
        assert_eq!(mesh.vertices(), back.vertices());
        assert_eq!(mesh.total_measure(), back.total_measure());
    }

    #[test]
    fn directions_section_round_trips() {
        let mesh = build_cartesian_grid(2, &[2, 1], &BoundingBox::unit(2)).unwrap();
        let s = 0.5f64.sqrt();
        let mesh = mesh.with_directions(vec![Point::new(1.0, 0.0, 0.0), Point::new(s, s, 0.0)]).unwrap();
        let back = round_trip(&mesh);
        assert_eq!(back.directions().unwrap(), mesh.directions().unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn export_import_preserves_connectivity(
            dim in 2usize..=3,
            nx in 1usize..4, ny in 1usize..4, nz in 1usize..3,
            lx in 0.5f64..3.0, ly in 0.5f64..3.0, lz in 0.5f64..3.0,
        ) {
            let cells: Vec<usize> = [nx, ny, nz][..dim].to_vec();
            let max = if dim == 2 { Point::new(lx, ly, 0.0) } else { Point::new(lx, ly, lz) };
            let bbox = BoundingBox::with_dim(dim, Point::zeros(), max).unwrap();
            let mesh = build_cartesian_grid(dim, &cells, &bbox).unwrap();
            let back = round_trip(&mesh);
            prop_assert_eq!(back.n_elements(), mesh.n_elements());
            for class in [FaceClass::Internal, FaceClass::DirichletBoundary, FaceClass::NeumannBoundary] {
                prop_assert_eq!(back.count_faces(class), mesh.count_faces(class));
            }
            prop_assert_eq!(back.total_measure(), mesh.total_measure());
            prop_assert_eq!(back.to_raw(), mesh.to_raw());
        }
    }
}
