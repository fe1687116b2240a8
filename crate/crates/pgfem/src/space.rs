//! Discrete spaces: dof enumeration, Dirichlet constraints, and basis
//! evaluation on cells and facets.
//!
//! Scalar kinds: continuous P1, P1 enriched with the cubic cell bubble,
//! broken P0/P1. Vector kinds: broken Raviart-Thomas of degree 0 and 1,
//! constructed on the reference cell from facet-moment and interior-moment
//! dofs and mapped with the contravariant Piola transform. Facet kinds:
//! per-facet P0/P1 multiplier spaces, optionally restricted to a tagged
//! boundary part.

use crate::dense::DMat;
use crate::mesh::SimplicialMesh;
use crate::quadrature::{segment_rule, triangle_rule};
use crate::Point;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("space was built for a different mesh")]
    MeshMismatch,
    #[error("polynomial degree {0} not supported for this space family")]
    UnsupportedDegree(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    P1,
    P1Bubble,
    DgP0,
    DgP1,
    Rt0Broken,
    Rt1Broken,
    FacetP0,
    FacetP1,
}

impl SpaceKind {
    pub fn is_facet(self) -> bool {
        matches!(self, SpaceKind::FacetP0 | SpaceKind::FacetP1)
    }

    pub fn is_vector(self) -> bool {
        matches!(self, SpaceKind::Rt0Broken | SpaceKind::Rt1Broken)
    }

    pub fn dofs_per_cell(self) -> usize {
        match self {
            SpaceKind::P1 => 3,
            SpaceKind::P1Bubble => 4,
            SpaceKind::DgP0 => 1,
            SpaceKind::DgP1 => 3,
            SpaceKind::Rt0Broken => 3,
            SpaceKind::Rt1Broken => 8,
            SpaceKind::FacetP0 | SpaceKind::FacetP1 => 0,
        }
    }

    pub fn dofs_per_facet(self) -> usize {
        match self {
            SpaceKind::FacetP0 => 1,
            SpaceKind::FacetP1 => 2,
            _ => 0,
        }
    }
}

/// Which facets a facet space covers.
#[derive(Debug, Clone)]
pub enum FacetSubset {
    All,
    Tag(String),
}

/// Enumerated degrees of freedom for one space on one mesh.
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    pub kind: SpaceKind,
    pub ndofs: usize,
    /// Dirichlet dofs and their prescribed values.
    pub constrained: BTreeMap<usize, f64>,
    facet_offset: Vec<Option<usize>>,
    nv: usize,
    fp: (usize, usize, usize),
}

impl DiscreteSpace {
    /// Cell-based space (everything except facet multipliers).
    pub fn new(mesh: &SimplicialMesh, kind: SpaceKind) -> Self {
        assert!(!kind.is_facet(), "use DiscreteSpace::facet for facet spaces");
        let ndofs = match kind {
            SpaceKind::P1 => mesh.n_vertices(),
            SpaceKind::P1Bubble => mesh.n_vertices() + mesh.n_cells(),
            SpaceKind::DgP0 => mesh.n_cells(),
            SpaceKind::DgP1 => 3 * mesh.n_cells(),
            SpaceKind::Rt0Broken => 3 * mesh.n_cells(),
            SpaceKind::Rt1Broken => 8 * mesh.n_cells(),
            _ => unreachable!(),
        };
        Self {
            kind,
            ndofs,
            constrained: BTreeMap::new(),
            facet_offset: Vec::new(),
            nv: mesh.n_vertices(),
            fp: mesh.fingerprint(),
        }
    }

    /// Facet multiplier space of degree `p` over the given facet subset.
    pub fn facet(mesh: &SimplicialMesh, p: usize, subset: FacetSubset) -> Result<Self, SpaceError> {
        let kind = match p {
            0 => SpaceKind::FacetP0,
            1 => SpaceKind::FacetP1,
            d => return Err(SpaceError::UnsupportedDegree(d)),
        };
        let per = kind.dofs_per_facet();
        let mut facet_offset = vec![None; mesh.n_facets()];
        let mut next = 0;
        for f in 0..mesh.n_facets() {
            let include = match &subset {
                FacetSubset::All => true,
                FacetSubset::Tag(t) => mesh.tag_name(f) == Some(t.as_str()),
            };
            if include {
                facet_offset[f] = Some(next);
                next += per;
            }
        }
        Ok(Self {
            kind,
            ndofs: next,
            constrained: BTreeMap::new(),
            facet_offset,
            nv: mesh.n_vertices(),
            fp: mesh.fingerprint(),
        })
    }

    pub fn check_mesh(&self, mesh: &SimplicialMesh) -> Result<(), SpaceError> {
        if self.fp != mesh.fingerprint() {
            return Err(SpaceError::MeshMismatch);
        }
        Ok(())
    }

    /// Global dofs attached to a cell, in local order.
    pub fn cell_dofs(&self, mesh: &SimplicialMesh, cell: usize, out: &mut Vec<usize>) {
        out.clear();
        match self.kind {
            SpaceKind::P1 => out.extend_from_slice(&mesh.cells[cell]),
            SpaceKind::P1Bubble => {
                out.extend_from_slice(&mesh.cells[cell]);
                out.push(self.nv + cell);
            }
            SpaceKind::DgP0 => out.push(cell),
            SpaceKind::DgP1 => out.extend([3 * cell, 3 * cell + 1, 3 * cell + 2]),
            SpaceKind::Rt0Broken => out.extend([3 * cell, 3 * cell + 1, 3 * cell + 2]),
            SpaceKind::Rt1Broken => out.extend((0..8).map(|k| 8 * cell + k)),
            SpaceKind::FacetP0 | SpaceKind::FacetP1 => {
                for &f in &mesh.cell_facets[cell] {
                    if let Some(start) = self.facet_offset[f] {
                        out.extend((0..self.kind.dofs_per_facet()).map(|k| start + k));
                    }
                }
            }
        }
    }

    /// Global dofs of one facet (facet spaces only); empty if uncovered.
    pub fn facet_dofs(&self, facet: usize) -> Vec<usize> {
        match self.facet_offset.get(facet).copied().flatten() {
            Some(start) => (0..self.kind.dofs_per_facet()).map(|k| start + k).collect(),
            None => Vec::new(),
        }
    }

    pub fn covers_facet(&self, facet: usize) -> bool {
        self.facet_offset.get(facet).map(|o| o.is_some()).unwrap_or(false)
    }

    /// Imposes `u = g` on the boundary part with the given tag.
    ///
    /// Vertex dofs take nodal values; facet-P1 dofs take the L2 projection
    /// of `g` onto the facet (nodal-at-endpoints basis), facet-P0 the mean.
    pub fn constrain_dirichlet(
        &mut self,
        mesh: &SimplicialMesh,
        tag: &str,
        g: &dyn Fn(Point) -> f64,
    ) {
        match self.kind {
            SpaceKind::P1 | SpaceKind::P1Bubble => {
                for f in mesh.facets_with_tag(tag) {
                    for &v in &mesh.facets[f].vertices {
                        self.constrained.insert(v, g(mesh.vertices[v]));
                    }
                }
            }
            SpaceKind::FacetP0 => {
                let rule = segment_rule(5);
                for f in mesh.facets_with_tag(tag) {
                    if let Some(start) = self.facet_offset[f] {
                        let [a, b] = mesh.facets[f].vertices;
                        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                        let mut mean = 0.0;
                        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                            mean += w * g(x);
                        }
                        self.constrained.insert(start, mean);
                    }
                }
            }
            SpaceKind::FacetP1 => {
                let rule = segment_rule(5);
                for f in mesh.facets_with_tag(tag) {
                    if let Some(start) = self.facet_offset[f] {
                        let [a, b] = mesh.facets[f].vertices;
                        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                        let mut m = [0.0; 2];
                        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                            let gv = g(x);
                            m[0] += w * gv * (1.0 - s);
                            m[1] += w * gv * s;
                        }
                        // invert [[1/3,1/6],[1/6,1/3]] (unit-measure facet mass)
                        let c0 = 12.0 * (m[0] * (1.0 / 3.0) - m[1] * (1.0 / 6.0));
                        let c1 = 12.0 * (m[1] * (1.0 / 3.0) - m[0] * (1.0 / 6.0));
                        self.constrained.insert(start, c0);
                        self.constrained.insert(start + 1, c1);
                    }
                }
            }
            _ => panic!("Dirichlet constraints not supported for {:?}", self.kind),
        }
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained.contains_key(&dof)
    }
}

/// Affine geometry of one cell, precomputed for basis evaluation.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub verts: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
    /// Jacobian of the reference map (columns v1-v0, v2-v0).
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

impl CellGeometry {
    pub fn new(mesh: &SimplicialMesh, cell: usize) -> Self {
        let verts = mesh.cell_vertices(cell);
        let [p0, p1, p2] = verts;
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let area = det / 2.0;
        let gl = |a: Point, b: Point| [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        let grad_lambda = [gl(p1, p2), gl(p2, p0), gl(p0, p1)];
        Self { verts, area, grad_lambda, jac, det }
    }

    /// Physical coordinates of a barycentric point.
    pub fn point(&self, bary: [f64; 3]) -> Point {
        [
            bary[0] * self.verts[0][0] + bary[1] * self.verts[1][0] + bary[2] * self.verts[2][0],
            bary[0] * self.verts[0][1] + bary[1] * self.verts[1][1] + bary[2] * self.verts[2][1],
        ]
    }
}

/// Values and gradients of a scalar basis at one barycentric point.
pub struct ScalarBasisEval {
    pub n: usize,
    pub values: [f64; 4],
    pub gradients: [[f64; 2]; 4],
}

/// Evaluates a scalar cell basis (P1, P1-bubble, broken P0/P1).
pub fn scalar_basis(kind: SpaceKind, geom: &CellGeometry, bary: [f64; 3]) -> ScalarBasisEval {
    let mut values = [0.0; 4];
    let mut gradients = [[0.0; 2]; 4];
    let n = match kind {
        SpaceKind::DgP0 => {
            values[0] = 1.0;
            1
        }
        SpaceKind::P1 | SpaceKind::DgP1 => {
            values[..3].copy_from_slice(&bary);
            gradients[..3].copy_from_slice(&geom.grad_lambda);
            3
        }
        SpaceKind::P1Bubble => {
            values[..3].copy_from_slice(&bary);
            gradients[..3].copy_from_slice(&geom.grad_lambda);
            values[3] = 27.0 * bary[0] * bary[1] * bary[2];
            for d in 0..2 {
                gradients[3][d] = 27.0
                    * (bary[1] * bary[2] * geom.grad_lambda[0][d]
                        + bary[0] * bary[2] * geom.grad_lambda[1][d]
                        + bary[0] * bary[1] * geom.grad_lambda[2][d]);
            }
            4
        }
        k => panic!("scalar_basis called with {k:?}"),
    };
    ScalarBasisEval { n, values, gradients }
}

/// Raviart-Thomas basis on one cell: reference construction with
/// facet-moment and interior-moment dofs, contravariant Piola map.
pub struct RtBasis {
    pub n: usize,
    order: usize,
    /// coeff[(m, j)]: coefficient of reference monomial m in basis function j.
    coeff: DMat,
    jac: [[f64; 2]; 2],
    det: f64,
}

/// Reference RT monomials: value and divergence at a reference point.
fn rt_monomials(order: usize, x: f64, y: f64) -> (Vec<[f64; 2]>, Vec<f64>) {
    match order {
        0 => (vec![[1.0, 0.0], [0.0, 1.0], [x, y]], vec![0.0, 0.0, 2.0]),
        1 => (
            vec![
                [1.0, 0.0],
                [0.0, 1.0],
                [x, 0.0],
                [y, 0.0],
                [0.0, x],
                [0.0, y],
                [x * x, x * y],
                [x * y, y * y],
            ],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 3.0 * x, 3.0 * y],
        ),
        _ => panic!("RT order {order} not supported"),
    }
}

impl RtBasis {
    pub fn new(geom: &CellGeometry, order: usize) -> Self {
        let n = match order {
            0 => 3,
            1 => 8,
            _ => panic!("RT order {order} not supported"),
        };
        // reference vertices and edges, edge i opposite vertex i
        let rv: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let edges = [(1usize, 2usize), (2, 0), (0, 1)];
        let mut d = DMat::zeros(n, n);
        let seg = segment_rule(5);
        for (i, &(a, b)) in edges.iter().enumerate() {
            let (pa, pb) = (rv[a], rv[b]);
            let dx = pb[0] - pa[0];
            let dy = pb[1] - pa[1];
            let len = dx.hypot(dy);
            // outward normal of the reference cell on this edge
            let nrm = [dy / len, -dx / len];
            for (&s, &w) in seg.points.iter().zip(&seg.weights) {
                let x = pa[0] + s * dx;
                let y = pa[1] + s * dy;
                let (vals, _) = rt_monomials(order, x, y);
                for (m, v) in vals.iter().enumerate() {
                    let qn = v[0] * nrm[0] + v[1] * nrm[1];
                    let base = if order == 0 { i } else { 2 * i };
                    d[(base, m)] += w * len * qn;
                    if order == 1 {
                        d[(base + 1, m)] += w * len * qn * (2.0 * s - 1.0);
                    }
                }
            }
        }
        if order == 1 {
            let tri = triangle_rule(4);
            for (bary, &w) in tri.points.iter().zip(&tri.weights) {
                let (x, y) = (bary[1], bary[2]);
                let (vals, _) = rt_monomials(order, x, y);
                for (m, v) in vals.iter().enumerate() {
                    d[(6, m)] += w * v[0];
                    d[(7, m)] += w * v[1];
                }
            }
        }
        // coeff = D^{-1}: columns are the dual-basis coefficients
        let lu = d.lu().expect("RT dof matrix is invertible");
        let coeff = lu.solve_mat(&DMat::identity(n));
        Self { n, order, coeff, jac: geom.jac, det: geom.det }
    }

    /// Physical values and divergences of all basis functions at a
    /// barycentric point.
    pub fn eval(&self, bary: [f64; 3]) -> (Vec<[f64; 2]>, Vec<f64>) {
        let (x, y) = (bary[1], bary[2]);
        let (mono, mono_div) = rt_monomials(self.order, x, y);
        let mut values = vec![[0.0; 2]; self.n];
        let mut divs = vec![0.0; self.n];
        for j in 0..self.n {
            let mut vx = 0.0;
            let mut vy = 0.0;
            let mut dv = 0.0;
            for m in 0..self.n {
                let c = self.coeff[(m, j)];
                vx += c * mono[m][0];
                vy += c * mono[m][1];
                dv += c * mono_div[m];
            }
            // contravariant Piola: q = J qref / det, div q = divref / det
            values[j] = [
                (self.jac[0][0] * vx + self.jac[0][1] * vy) / self.det,
                (self.jac[1][0] * vx + self.jac[1][1] * vy) / self.det,
            ];
            divs[j] = dv / self.det;
        }
        (values, divs)
    }
}

/// Values of the two facet-P1 basis functions (or one facet-P0) at
/// parameter `s` measured from `facet.vertices[0]`.
pub fn facet_basis(kind: SpaceKind, s: f64) -> ([f64; 2], usize) {
    match kind {
        SpaceKind::FacetP0 => ([1.0, 0.0], 1),
        SpaceKind::FacetP1 => ([1.0 - s, s], 2),
        k => panic!("facet_basis called with {k:?}"),
    }
}
