//! Field output: legacy ASCII VTK on a sub-simplex tessellation and
//! per-element CSV.

use std::io::{BufRead, Write};

use super::SimError;
use crate::dgspace::DgSpace;
use crate::mesh::PolyMesh;
use crate::timestepping::State;

/// Simplices each element is split into: one per edge (2D) or per
/// fan triangle of each face (3D), all sharing the element center.
fn element_simplices(mesh: &PolyMesh, e: usize) -> Vec<Vec<usize>> {
    let el = &mesh.elements()[e];
    let mut out = Vec::new();
    for &f in &el.faces {
        let v = &mesh.faces()[f].vertices;
        if mesh.dim() == 2 {
            out.push(vec![v[0], v[1]]);
        } else {
            for k in 1..v.len() - 1 {
                out.push(vec![v[0], v[k], v[k + 1]]);
            }
        }
    }
    out
}

pub fn sub_simplex_count(mesh: &PolyMesh) -> usize {
    (0..mesh.n_elements()).map(|e| element_simplices(mesh, e).len()).sum()
}

/// Writes element-average `c` and `q` as cell data.
pub fn write_vtk<W: Write>(mut out: W, space: &DgSpace, state: &State) -> std::io::Result<()> {
    let mesh = space.mesh();
    let nv = mesh.vertices().len();
    let c = space.cell_averages(&state.c);
    let q = space.cell_averages(&state.q);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "heterodg fields t={}", state.t)?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", nv + mesh.n_elements())?;
    let points = mesh.vertices().iter().chain(mesh.elements().iter().map(|e| &e.center));
    for p in points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    let mut cells = Vec::new();
    let mut owners = Vec::new();
    for e in 0..mesh.n_elements() {
        for s in element_simplices(mesh, e) {
            let mut ids = vec![nv + e];
            ids.extend(s);
            cells.push(ids);
            owners.push(e);
        }
    }
    let size: usize = cells.iter().map(|c| c.len() + 1).sum();
    writeln!(out, "CELLS {} {}", cells.len(), size)?;
    for cell in &cells {
        let ids: Vec<String> = cell.iter().map(|i| i.to_string()).collect();
        writeln!(out, "{} {}", cell.len(), ids.join(" "))?;
    }
    writeln!(out, "CELL_TYPES {}", cells.len())?;
    let kind = if mesh.dim() == 2 { 5 } else { 10 };
    for _ in &cells {
        writeln!(out, "{kind}")?;
    }
    writeln!(out, "CELL_DATA {}", cells.len())?;
    for (name, values) in [("c", &c), ("q", &q)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for &e in &owners {
            writeln!(out, "{}", values[e])?;
        }
    }
    Ok(())
}

/// One row of the per-element field table.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRow {
    pub element: usize,
    pub center: [f64; 3],
    pub c: f64,
    pub q: f64,
}

/// Writes `element,x,y,z,c,q` with shortest round-trip formatting.
pub fn write_fields_csv<W: Write>(mut out: W, space: &DgSpace, state: &State) -> std::io::Result<()> {
    let c = space.cell_averages(&state.c);
    let q = space.cell_averages(&state.q);
    writeln!(out, "element,x,y,z,c,q")?;
    for (e, el) in space.mesh().elements().iter().enumerate() {
        let x = el.center;
        writeln!(out, "{e},{},{},{},{},{}", x.x, x.y, x.z, c[e], q[e])?;
    }
    Ok(())
}

pub fn read_fields_csv<R: BufRead>(input: R) -> Result<Vec<FieldRow>, SimError> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if n == 1 {
            if line.trim() != "element,x,y,z,c,q" {
                return Err(SimError::Parse { line: n, message: format!("unexpected header {line:?}") });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(SimError::Parse { line: n, message: format!("expected 6 fields, found {}", parts.len()) });
        }
        let bad = |s: &str| SimError::Parse { line: n, message: format!("invalid number {s:?}") };
        let element = parts[0].trim().parse().map_err(|_| bad(parts[0]))?;
        let mut v = [0.0; 5];
        for (slot, s) in v.iter_mut().zip(&parts[1..]) {
            *slot = s.trim().parse().map_err(|_| bad(s))?;
        }
        rows.push(FieldRow { element, center: [v[0], v[1], v[2]], c: v[3], q: v[4] });
    }
    Ok(rows)
}
