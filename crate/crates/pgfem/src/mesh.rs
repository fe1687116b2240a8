//! Conforming 2D simplicial meshes with tagged boundary parts.
//!
//! Every construction path (structured rectangles, uniform refinement,
//! ASCII import, sheared quadrilaterals) funnels through
//! [`SimplicialMesh::from_parts`], which validates orientation, conformity,
//! and boundary tagging. Meshes are immutable once built.
//!
//! ASCII format (line-oriented, 0-based indices):
//!
//! ```text
//! vi-mesh 1
//! vertices N
//! x y            (N lines)
//! cells M
//! i j k          (M lines)
//! boundary K
//! i j tagname    (K lines)
//! ```

use crate::Point;
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("degenerate bounding box: width and height must be positive")]
    DegenerateBbox,
    #[error("cell {cell} has vertex index {index} out of range (nv = {nv})")]
    VertexIndexOutOfRange { cell: usize, index: usize, nv: usize },
    #[error("cell {cell} is degenerate (signed area {area:.3e})")]
    DegenerateCell { cell: usize, area: f64 },
    #[error("facet ({a}, {b}) is shared by more than two cells")]
    NonConformingFacet { a: usize, b: usize },
    #[error("cells {c1} and {c2} traverse facet ({a}, {b}) in the same direction")]
    InconsistentOrientation { a: usize, b: usize, c1: usize, c2: usize },
    #[error("boundary facet {facet} (vertices {a}, {b}) carries no tag")]
    UntaggedBoundaryFacet { facet: usize, a: usize, b: usize },
    #[error("tag list references ({a}, {b}) which is not a boundary facet")]
    TagOnNonBoundaryFacet { a: usize, b: usize },
    #[error("boundary facet ({a}, {b}) tagged more than once")]
    DuplicateTag { a: usize, b: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("coordinate vectors must be strictly increasing with at least two entries")]
    BadCoordinateVector,
}

/// Warnings produced while building a mesh (non-fatal repairs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshWarning {
    /// A clockwise cell was reordered to counterclockwise.
    OrientationFixed { cell: usize },
}

/// An edge of the triangulation.
///
/// `cells[0]` is always valid; `cells[1]` is `None` on the boundary. The
/// unit normal points from the first adjacent cell into the second (outward
/// on the boundary) and is fixed at construction.
#[derive(Debug, Clone)]
pub struct Facet {
    pub vertices: [usize; 2],
    pub cells: (usize, Option<usize>),
    pub normal: [f64; 2],
    pub length: f64,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

/// Diagonal direction used when splitting structured quads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Bottom-right to top-left (`/`).
    #[default]
    Slash,
    /// Bottom-left to top-right (`\`).
    Backslash,
}

/// Axis-aligned rectangle given by two opposite corners.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

/// Immutable conforming triangulation with tagged boundary facets.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    pub vertices: Vec<Point>,
    /// Vertex index triples, counterclockwise.
    pub cells: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    /// Facet opposite local vertex `i` of each cell.
    pub cell_facets: Vec<[usize; 3]>,
    tag_names: Vec<String>,
    facet_tag: Vec<Option<u16>>,
}

impl SimplicialMesh {
    /// Builds and validates a mesh from raw vertices, cells, and boundary tags.
    ///
    /// Boundary tags are given as `(i, j, name)` vertex pairs in either
    /// order. With `fix_orientation`, clockwise cells are repaired and
    /// reported as warnings; otherwise they are errors.
    pub fn from_parts(
        vertices: Vec<Point>,
        mut cells: Vec<[usize; 3]>,
        boundary: &[(usize, usize, String)],
        fix_orientation: bool,
    ) -> Result<(Self, Vec<MeshWarning>), MeshError> {
        let nv = vertices.len();
        let mut warnings = Vec::new();
        for (c, cell) in cells.iter_mut().enumerate() {
            for &v in cell.iter() {
                if v >= nv {
                    return Err(MeshError::VertexIndexOutOfRange { cell: c, index: v, nv });
                }
            }
            let area = signed_area(&vertices, *cell);
            if area.abs() < 1e-300 {
                return Err(MeshError::DegenerateCell { cell: c, area });
            }
            if area < 0.0 {
                if !fix_orientation {
                    return Err(MeshError::DegenerateCell { cell: c, area });
                }
                cell.swap(1, 2);
                warnings.push(MeshWarning::OrientationFixed { cell: c });
            }
        }

        // facet key (min, max) -> (first cell, local idx, as-traversed pair), second cell
        struct Adj {
            first: (usize, usize, [usize; 2]),
            second: Option<(usize, [usize; 2])>,
        }
        let mut adj: HashMap<(usize, usize), Adj> = HashMap::new();
        for (c, cell) in cells.iter().enumerate() {
            for local in 0..3 {
                let a = cell[(local + 1) % 3];
                let b = cell[(local + 2) % 3];
                let key = (a.min(b), a.max(b));
                match adj.get_mut(&key) {
                    None => {
                        adj.insert(key, Adj { first: (c, local, [a, b]), second: None });
                    }
                    Some(e) => {
                        if e.second.is_some() {
                            return Err(MeshError::NonConformingFacet { a: key.0, b: key.1 });
                        }
                        e.second = Some((c, [a, b]));
                    }
                }
            }
        }

        // deterministic facet order: sorted by (min, max) vertex pair
        let mut keys: Vec<(usize, usize)> = adj.keys().copied().collect();
        keys.sort_unstable();

        let mut facets = Vec::with_capacity(keys.len());
        let mut facet_of_key: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_facets = vec![[usize::MAX; 3]; cells.len()];
        for key in keys {
            let e = &adj[&key];
            let (c1, local1, [a, b]) = e.first;
            if let Some((c2, [a2, _])) = e.second {
                if a2 == a {
                    return Err(MeshError::InconsistentOrientation { a, b, c1, c2 });
                }
            }
            let pa = vertices[a];
            let pb = vertices[b];
            let dx = pb[0] - pa[0];
            let dy = pb[1] - pa[1];
            let length = dx.hypot(dy);
            // cells are CCW, so the outward normal of the edge (a, b) of the
            // first cell is the tangent rotated clockwise
            let normal = [dy / length, -dx / length];
            let idx = facets.len();
            facet_of_key.insert(key, idx);
            cell_facets[c1][local1] = idx;
            let mut second_cell = None;
            if let Some((c2, _)) = e.second {
                second_cell = Some(c2);
                let local2 = (0..3)
                    .find(|&l| {
                        let x = cells[c2][(l + 1) % 3];
                        let y = cells[c2][(l + 2) % 3];
                        (x.min(y), x.max(y)) == key
                    })
                    .expect("facet must appear in its adjacent cell");
                cell_facets[c2][local2] = idx;
            }
            facets.push(Facet { vertices: [a, b], cells: (c1, second_cell), normal, length });
        }

        let mut tag_names: Vec<String> = Vec::new();
        let mut facet_tag = vec![None; facets.len()];
        for (i, j, name) in boundary {
            let key = (*i.min(j), *i.max(j));
            let f = *facet_of_key
                .get(&key)
                .ok_or(MeshError::TagOnNonBoundaryFacet { a: key.0, b: key.1 })?;
            if !facets[f].is_boundary() {
                return Err(MeshError::TagOnNonBoundaryFacet { a: key.0, b: key.1 });
            }
            if facet_tag[f].is_some() {
                return Err(MeshError::DuplicateTag { a: key.0, b: key.1 });
            }
            let tid = match tag_names.iter().position(|t| t == name) {
                Some(t) => t,
                None => {
                    tag_names.push(name.clone());
                    tag_names.len() - 1
                }
            };
            facet_tag[f] = Some(tid as u16);
        }
        for (f, facet) in facets.iter().enumerate() {
            if facet.is_boundary() && facet_tag[f].is_none() {
                return Err(MeshError::UntaggedBoundaryFacet {
                    facet: f,
                    a: facet.vertices[0],
                    b: facet.vertices[1],
                });
            }
        }

        Ok((
            Self { vertices, cells, facets, cell_facets, tag_names, facet_tag },
            warnings,
        ))
    }

    /// Structured triangulation of a rectangle, boundary tagged by side
    /// (`left`, `right`, `bottom`, `top`).
    pub fn structured_rectangle(
        nx: usize,
        ny: usize,
        bbox: Rect,
        diagonal: Diagonal,
    ) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::DegenerateBbox);
        }
        let (w, h) = (bbox.x1 - bbox.x0, bbox.y1 - bbox.y0);
        if w <= 0.0 || h <= 0.0 {
            return Err(MeshError::DegenerateBbox);
        }
        let xs: Vec<f64> = (0..=nx).map(|i| bbox.x0 + w * i as f64 / nx as f64).collect();
        let ys: Vec<f64> = (0..=ny).map(|j| bbox.y0 + h * j as f64 / ny as f64).collect();
        Self::structured_rectangle_with_coords(&xs, &ys, diagonal)
    }

    /// Structured triangulation from explicit strictly increasing coordinate
    /// vectors (used for graded meshes). Tags as in `structured_rectangle`.
    pub fn structured_rectangle_with_coords(
        xs: &[f64],
        ys: &[f64],
        diagonal: Diagonal,
    ) -> Result<Self, MeshError> {
        if xs.len() < 2 || ys.len() < 2 {
            return Err(MeshError::BadCoordinateVector);
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MeshError::BadCoordinateVector);
        }
        let nx = xs.len() - 1;
        let ny = ys.len() - 1;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for &y in ys {
            for &x in xs {
                vertices.push([x, y]);
            }
        }
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let a = vid(i, j);
                let b = vid(i + 1, j);
                let c = vid(i + 1, j + 1);
                let d = vid(i, j + 1);
                match diagonal {
                    Diagonal::Slash => {
                        cells.push([a, b, d]);
                        cells.push([b, c, d]);
                    }
                    Diagonal::Backslash => {
                        cells.push([a, b, c]);
                        cells.push([a, c, d]);
                    }
                }
            }
        }
        let mut boundary = Vec::new();
        for i in 0..nx {
            boundary.push((vid(i, 0), vid(i + 1, 0), "bottom".to_string()));
            boundary.push((vid(i, ny), vid(i + 1, ny), "top".to_string()));
        }
        for j in 0..ny {
            boundary.push((vid(0, j), vid(0, j + 1), "left".to_string()));
            boundary.push((vid(nx, j), vid(nx, j + 1), "right".to_string()));
        }
        let (mesh, warnings) = Self::from_parts(vertices, cells, &boundary, false)?;
        debug_assert!(warnings.is_empty());
        Ok(mesh)
    }

    /// Structured mesh of the quadrilateral with corners `o, a, b, c`
    /// (counterclockwise), built by mapping the unit square bilinearly.
    /// Boundary tags: `bottom` (o-a), `right` (a-b), `top` (b-c),
    /// `sloping` (c-o).
    pub fn sheared_quadrilateral(
        nx: usize,
        ny: usize,
        corners: [Point; 4],
    ) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::DegenerateBbox);
        }
        let [o, a, b, c] = corners;
        let map = |s: f64, t: f64| -> Point {
            [
                (1.0 - s) * (1.0 - t) * o[0] + s * (1.0 - t) * a[0] + s * t * b[0] + (1.0 - s) * t * c[0],
                (1.0 - s) * (1.0 - t) * o[1] + s * (1.0 - t) * a[1] + s * t * b[1] + (1.0 - s) * t * c[1],
            ]
        };
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(map(i as f64 / nx as f64, j as f64 / ny as f64));
            }
        }
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (p, q, r, s) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                cells.push([p, q, s]);
                cells.push([q, r, s]);
            }
        }
        let mut boundary = Vec::new();
        for i in 0..nx {
            boundary.push((vid(i, 0), vid(i + 1, 0), "bottom".to_string()));
            boundary.push((vid(i, ny), vid(i + 1, ny), "top".to_string()));
        }
        for j in 0..ny {
            boundary.push((vid(0, j), vid(0, j + 1), "sloping".to_string()));
            boundary.push((vid(nx, j), vid(nx, j + 1), "right".to_string()));
        }
        let (mesh, _) = Self::from_parts(vertices, cells, &boundary, false)?;
        Ok(mesh)
    }

    /// Splits every cell into 4 congruent children by edge midpoints.
    /// Boundary tags are inherited by the two child facets of each tagged
    /// facet; the mesh size halves.
    pub fn refine_uniform(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let pa = vertices[a];
                let pb = vertices[b];
                vertices.push([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]);
                vertices.len() - 1
            })
        };
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for &[v0, v1, v2] in &self.cells {
            let m01 = mid(v0, v1, &mut vertices);
            let m12 = mid(v1, v2, &mut vertices);
            let m20 = mid(v2, v0, &mut vertices);
            cells.push([v0, m01, m20]);
            cells.push([v1, m12, m01]);
            cells.push([v2, m20, m12]);
            cells.push([m01, m12, m20]);
        }
        let mut boundary = Vec::new();
        for (f, facet) in self.facets.iter().enumerate() {
            if let Some(tid) = self.facet_tag[f] {
                let [a, b] = facet.vertices;
                let m = mid(a, b, &mut vertices);
                let name = self.tag_names[tid as usize].clone();
                boundary.push((a, m, name.clone()));
                boundary.push((m, b, name));
            }
        }
        let (mesh, warnings) = Self::from_parts(vertices, cells, &boundary, false)
            .expect("refinement of a valid mesh is valid");
        debug_assert!(warnings.is_empty());
        mesh
    }

    /// Parses the ASCII mesh format. Clockwise cells are repaired with a
    /// warning; structural defects are errors carrying the offending index.
    pub fn from_text(text: &str) -> Result<(Self, Vec<MeshWarning>), MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line: usize, message: &str| MeshError::Parse { line, message: message.into() };

        let (ln, header) = lines.next().ok_or_else(|| perr(0, "empty file"))?;
        if header != "vi-mesh 1" {
            return Err(perr(ln, "expected header `vi-mesh 1`"));
        }
        let expect_count = |tok: Option<(usize, &str)>, kw: &str| -> Result<usize, MeshError> {
            let (ln, l) = tok.ok_or_else(|| perr(0, &format!("missing `{kw}` section")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(kw) {
                return Err(perr(ln, &format!("expected `{kw} N`")));
            }
            let n = it
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| perr(ln, &format!("expected `{kw} N`")))?;
            if it.next().is_some() {
                return Err(perr(ln, "trailing tokens"));
            }
            Ok(n)
        };

        let nv = expect_count(lines.next(), "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of vertex list"))?;
            let mut it = l.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| perr(ln, "expected `x y`"))?;
            let y: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| perr(ln, "expected `x y`"))?;
            if it.next().is_some() {
                return Err(perr(ln, "trailing tokens"));
            }
            vertices.push([x, y]);
        }

        let nc = expect_count(lines.next(), "cells")?;
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of cell list"))?;
            let idx: Vec<usize> = l.split_whitespace().map(|s| s.parse()).collect::<Result<_, _>>()
                .map_err(|_| perr(ln, "expected `i j k`"))?;
            if idx.len() != 3 {
                return Err(perr(ln, "expected `i j k`"));
            }
            cells.push([idx[0], idx[1], idx[2]]);
        }

        let nb = expect_count(lines.next(), "boundary")?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of boundary list"))?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(perr(ln, "expected `i j tagname`"));
            }
            let i: usize = toks[0].parse().map_err(|_| perr(ln, "expected `i j tagname`"))?;
            let j: usize = toks[1].parse().map_err(|_| perr(ln, "expected `i j tagname`"))?;
            boundary.push((i, j, toks[2].to_string()));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "trailing garbage after boundary section"));
        }
        Self::from_parts(vertices, cells, &boundary, true)
    }

    /// Serializes to the ASCII mesh format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vi-mesh 1");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(s, "cells {}", self.cells.len());
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        let tagged: Vec<usize> =
            (0..self.facets.len()).filter(|&f| self.facet_tag[f].is_some()).collect();
        let _ = writeln!(s, "boundary {}", tagged.len());
        for f in tagged {
            let [a, b] = self.facets[f].vertices;
            let _ = writeln!(s, "{} {} {}", a, b, self.tag_name(f).unwrap());
        }
        s
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    /// Tag of a boundary facet, if any.
    pub fn tag_name(&self, facet: usize) -> Option<&str> {
        self.facet_tag[facet].map(|t| self.tag_names[t as usize].as_str())
    }

    /// Indices of boundary facets carrying the given tag.
    pub fn facets_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = usize> + 'a {
        (0..self.facets.len()).filter(move |&f| self.tag_name(f) == Some(tag))
    }

    pub fn tag_names(&self) -> &[String] {
        &self.tag_names
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let [a, b, c] = self.cells[cell];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        signed_area(&self.vertices, self.cells[cell])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    /// Longest edge of a cell.
    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let [p0, p1, p2] = self.cell_vertices(cell);
        let d = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
        d(p0, p1).max(d(p1, p2)).max(d(p2, p0))
    }

    /// Mesh size: maximum cell diameter (longest-edge convention).
    pub fn mesh_size(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_diameter(c)).fold(0.0, f64::max)
    }

    /// Maximum circumradius/inradius ratio over all cells.
    pub fn shape_regularity(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.n_cells() {
            let [p0, p1, p2] = self.cell_vertices(c);
            let d = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
            let (la, lb, lc) = (d(p1, p2), d(p2, p0), d(p0, p1));
            let area = self.cell_area(c);
            let s = 0.5 * (la + lb + lc);
            let circum = la * lb * lc / (4.0 * area);
            let inr = area / s;
            worst = worst.max(circum / inr);
        }
        worst
    }

    /// V - E + T; equals 1 for simply connected domains, 1 - holes in general.
    pub fn euler_characteristic(&self) -> isize {
        self.n_vertices() as isize - self.n_facets() as isize + self.n_cells() as isize
    }

    /// Number of connected boundary loops.
    pub fn boundary_loops(&self) -> usize {
        let mut next: HashMap<usize, usize> = HashMap::new();
        for f in &self.facets {
            if f.is_boundary() {
                next.insert(f.vertices[0], f.vertices[1]);
            }
        }
        let mut visited: Vec<usize> = Vec::new();
        let mut loops = 0;
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        for s in starts {
            if visited.contains(&s) {
                continue;
            }
            loops += 1;
            let mut v = s;
            loop {
                visited.push(v);
                v = next[&v];
                if v == s {
                    break;
                }
            }
        }
        loops
    }

    /// Locates the cell containing a point (barycentric tolerance `tol`).
    pub fn locate(&self, p: Point, tol: f64) -> Option<usize> {
        for c in 0..self.n_cells() {
            let b = self.barycentric(c, p);
            if b.iter().all(|&x| x >= -tol) {
                return Some(c);
            }
        }
        None
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, cell: usize, p: Point) -> [f64; 3] {
        let [p0, p1, p2] = self.cell_vertices(cell);
        let area = signed_area(&self.vertices, self.cells[cell]);
        let part = |a: Point, b: Point| 0.5 * ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]));
        [part(p1, p2) / area, part(p2, p0) / area, part(p0, p1) / area]
    }

    /// Signature used to detect space/mesh mismatches.
    pub(crate) fn fingerprint(&self) -> (usize, usize, usize) {
        (self.n_vertices(), self.n_cells(), self.n_facets())
    }
}

fn signed_area(vertices: &[Point], [a, b, c]: [usize; 3]) -> f64 {
    let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
    0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
}
