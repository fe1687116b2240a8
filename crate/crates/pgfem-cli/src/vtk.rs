//! Legacy-VTK ASCII output for unstructured triangle meshes, with point or
//! cell scalars. Deterministic formatting; files are written atomically.

use pgfem::mesh::SimplicialMesh;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub enum FieldData<'a> {
    Point(&'a [f64]),
    Cell(&'a [f64]),
}

/// Renders the mesh and one scalar field.
pub fn render(mesh: &SimplicialMesh, name: &str, data: &FieldData) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "pgfem field");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:.9e} {:.9e} 0.0", v[0], v[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.n_cells(), 4 * mesh.n_cells());
    for c in &mesh.cells {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_cells());
    for _ in 0..mesh.n_cells() {
        let _ = writeln!(s, "5");
    }
    match data {
        FieldData::Point(values) => {
            assert_eq!(values.len(), mesh.n_vertices());
            let _ = writeln!(s, "POINT_DATA {}", mesh.n_vertices());
            let _ = writeln!(s, "SCALARS {name} double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{v:.9e}");
            }
        }
        FieldData::Cell(values) => {
            assert_eq!(values.len(), mesh.n_cells());
            let _ = writeln!(s, "CELL_DATA {}", mesh.n_cells());
            let _ = writeln!(s, "SCALARS {name} double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{v:.9e}");
            }
        }
    }
    s
}

/// Writes via a temporary file and rename.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

/// Minimal reference parser for round-trip tests: returns (points, cells,
/// data name, values, is_point_data).
pub fn parse(text: &str) -> Option<(Vec<[f64; 2]>, Vec<[usize; 3]>, String, Vec<f64>, bool)> {
    let mut lines = text.lines();
    for _ in 0..4 {
        lines.next()?;
    }
    let npts: usize = lines.next()?.strip_prefix("POINTS ")?.split_whitespace().next()?.parse().ok()?;
    let mut points = Vec::with_capacity(npts);
    for _ in 0..npts {
        let l = lines.next()?;
        let mut it = l.split_whitespace();
        let x: f64 = it.next()?.parse().ok()?;
        let y: f64 = it.next()?.parse().ok()?;
        points.push([x, y]);
    }
    let ncells: usize = lines.next()?.strip_prefix("CELLS ")?.split_whitespace().next()?.parse().ok()?;
    let mut cells = Vec::with_capacity(ncells);
    for _ in 0..ncells {
        let l = lines.next()?;
        let idx: Vec<usize> = l.split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect();
        cells.push([idx[0], idx[1], idx[2]]);
    }
    lines.next()?; // CELL_TYPES header
    for _ in 0..ncells {
        lines.next()?;
    }
    let data_header = lines.next()?;
    let is_point = data_header.starts_with("POINT_DATA");
    let n: usize = data_header.split_whitespace().nth(1)?.parse().ok()?;
    let name = lines.next()?.split_whitespace().nth(1)?.to_string();
    lines.next()?; // lookup table
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(lines.next()?.parse().ok()?);
    }
    Some((points, cells, name, values, is_point))
}
