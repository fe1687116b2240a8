//! Averaging reconstructions from broken fields: the convex-weight
//! quasi-interpolant (nodal values from cell averages, boundary values from
//! facet dual-basis moments), the Oswald nodal average, and feasible
//! reconstructions for obstacle problems.

use crate::mesh::SimplicialMesh;
use crate::quadrature::{segment_rule, triangle_rule};
use crate::space::{facet_basis, scalar_basis, CellGeometry, DiscreteSpace};
use crate::Point;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("cell {cell} has negative mean of (u - phi) = {mean:.3e}; reconstruction is infeasible")]
    NegativeCellMean { cell: usize, mean: f64 },
    #[error("no convex centroid weights exist for vertex {vertex}")]
    NoConvexWeights { vertex: usize },
}

/// Precomputed interpolation data: convex centroid weights at interior
/// vertices and a fixed boundary facet per boundary vertex.
pub struct ClementMap {
    /// Per vertex: (cells, weights) for interior vertices.
    interior: Vec<Option<(Vec<usize>, Vec<f64>)>>,
    /// Per vertex: (facet, vertex-is-second-endpoint) for boundary vertices.
    boundary: Vec<Option<(usize, bool)>>,
}

impl ClementMap {
    pub fn new(mesh: &SimplicialMesh) -> Result<Self, ReconstructError> {
        let nv = mesh.n_vertices();
        let mut on_boundary = vec![false; nv];
        // lowest-index adjacent boundary facet per boundary vertex
        let mut boundary = vec![None; nv];
        for (f, facet) in mesh.facets.iter().enumerate() {
            if facet.is_boundary() {
                for (pos, &v) in facet.vertices.iter().enumerate() {
                    on_boundary[v] = true;
                    if boundary[v].is_none() {
                        boundary[v] = Some((f, pos == 1));
                    }
                }
            }
        }
        let mut star: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (c, cell) in mesh.cells.iter().enumerate() {
            for &v in cell {
                star[v].push(c);
            }
        }
        let mut interior = vec![None; nv];
        for v in 0..nv {
            if on_boundary[v] {
                continue;
            }
            let cells = &star[v];
            let centroids: Vec<Point> = cells
                .iter()
                .map(|&c| {
                    let [p0, p1, p2] = mesh.cell_vertices(c);
                    [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]
                })
                .collect();
            let z = mesh.vertices[v];
            let weights = convex_weights(z, &centroids)
                .ok_or(ReconstructError::NoConvexWeights { vertex: v })?;
            interior[v] = Some((cells.clone(), weights));
        }
        Ok(Self { interior, boundary })
    }

    /// Applies the map: interior nodal values are convex combinations of
    /// `cell_means`; boundary nodal values are dual-basis moments of the
    /// facet field `(facet, s) -> value`.
    pub fn apply(
        &self,
        mesh: &SimplicialMesh,
        cell_means: &[f64],
        facet_field: &dyn Fn(usize, f64) -> f64,
    ) -> Vec<f64> {
        let rule = segment_rule(5);
        let mut nodal = vec![0.0; mesh.n_vertices()];
        for v in 0..mesh.n_vertices() {
            if let Some((cells, weights)) = &self.interior[v] {
                nodal[v] = cells.iter().zip(weights).map(|(&c, w)| w * cell_means[c]).sum();
            } else if let Some((f, second)) = self.boundary[v] {
                // dual basis of the endpoint's P1 function on the facet
                let mut acc = 0.0;
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    let chi = if second { 6.0 * s - 2.0 } else { 4.0 - 6.0 * s };
                    acc += w * chi * facet_field(f, s);
                }
                nodal[v] = acc;
            }
        }
        nodal
    }
}

/// Finds nonnegative weights with `sum w = 1` and `sum w_i c_i = z`
/// supported on at most three of the candidate points.
fn convex_weights(z: Point, candidates: &[Point]) -> Option<Vec<f64>> {
    let n = candidates.len();
    if n == 0 {
        return None;
    }
    let tol = 1e-12;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (candidates[i], candidates[j], candidates[k]);
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                if det.abs() < 1e-14 {
                    continue;
                }
                let l1 = ((z[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (z[1] - a[1])) / det;
                let l2 = ((b[0] - a[0]) * (z[1] - a[1]) - (z[0] - a[0]) * (b[1] - a[1])) / det;
                let l0 = 1.0 - l1 - l2;
                if l0 >= -tol && l1 >= -tol && l2 >= -tol {
                    let mut w = vec![0.0; n];
                    w[i] = l0.max(0.0);
                    w[j] = l1.max(0.0);
                    w[k] = l2.max(0.0);
                    let s: f64 = w.iter().sum();
                    for v in w.iter_mut() {
                        *v /= s;
                    }
                    return Some(w);
                }
            }
        }
    }
    None
}

/// Cell means of a broken scalar field.
pub fn cell_means(mesh: &SimplicialMesh, space: &DiscreteSpace, coeffs: &[f64]) -> Vec<f64> {
    let rule = triangle_rule(4);
    let mut out = vec![0.0; mesh.n_cells()];
    let mut dofs = Vec::new();
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        space.cell_dofs(mesh, c, &mut dofs);
        let mut acc = 0.0;
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let b = scalar_basis(space.kind, &geom, *bary);
            let v: f64 = (0..b.n).map(|i| coeffs[dofs[i]] * b.values[i]).sum();
            acc += w * 2.0 * v;
        }
        out[c] = acc; // weights sum to 1/2, so 2w integrates the mean
    }
    out
}

/// Continuous P1 interpolant of a broken field with facet boundary data.
pub fn clement_interpolate(
    mesh: &SimplicialMesh,
    u_space: &DiscreteSpace,
    u: &[f64],
    m_space: &DiscreteSpace,
    uhat: &[f64],
) -> Result<Vec<f64>, ReconstructError> {
    let map = ClementMap::new(mesh)?;
    let means = cell_means(mesh, u_space, u);
    let field = |f: usize, s: f64| -> f64 {
        let dofs = m_space.facet_dofs(f);
        let (vals, n) = facet_basis(m_space.kind, s);
        (0..n).map(|i| uhat[dofs[i]] * vals[i]).sum()
    };
    Ok(map.apply(mesh, &means, &field))
}

/// Feasible reconstruction: interpolate `(u - phi, uhat - phi)` and add
/// back the obstacle's nodal values, so the result stays above `phi` at
/// every node. Fails when some cell mean of `u - phi` is negative.
pub fn reconstruct_feasible(
    mesh: &SimplicialMesh,
    u_space: &DiscreteSpace,
    u: &[f64],
    m_space: &DiscreteSpace,
    uhat: &[f64],
    phi: &dyn Fn(Point) -> f64,
) -> Result<Vec<f64>, ReconstructError> {
    let map = ClementMap::new(mesh)?;
    let means_u = cell_means(mesh, u_space, u);
    let rule = triangle_rule(4);
    let mut means = vec![0.0; mesh.n_cells()];
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        let mut phi_mean = 0.0;
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            phi_mean += w * 2.0 * phi(geom.point(*bary));
        }
        let m = means_u[c] - phi_mean;
        if m < -1e-12 {
            return Err(ReconstructError::NegativeCellMean { cell: c, mean: m });
        }
        means[c] = m.max(0.0);
    }
    let field = |f: usize, s: f64| -> f64 {
        let dofs = m_space.facet_dofs(f);
        let (vals, n) = facet_basis(m_space.kind, s);
        let uhat_s: f64 = (0..n).map(|i| uhat[dofs[i]] * vals[i]).sum();
        let [a, b] = mesh.facets[f].vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
        uhat_s - phi(x)
    };
    let mut nodal = map.apply(mesh, &means, &field);
    for (v, val) in nodal.iter_mut().enumerate() {
        *val += phi(mesh.vertices[v]);
    }
    Ok(nodal)
}

/// Bound-preserving reconstruction for problems with mixed boundary
/// conditions: interior nodes use the convex centroid weights, boundary
/// nodes adjacent to a Dirichlet facet use that facet's dual-basis moment
/// (the multiplier there carries boundary data), and the remaining
/// boundary nodes average the adjacent cell means. Every nodal value is a
/// convex combination of in-bound quantities.
pub fn reconstruct_bounded(
    mesh: &SimplicialMesh,
    u_space: &DiscreteSpace,
    u: &[f64],
    m_space: &DiscreteSpace,
    uhat: &[f64],
    dirichlet_facet: &dyn Fn(usize) -> bool,
) -> Result<Vec<f64>, ReconstructError> {
    let map = ClementMap::new(mesh)?;
    let means = cell_means(mesh, u_space, u);
    let field = |f: usize, s: f64| -> f64 {
        let dofs = m_space.facet_dofs(f);
        let (vals, n) = facet_basis(m_space.kind, s);
        (0..n).map(|i| uhat[dofs[i]] * vals[i]).sum()
    };
    let mut nodal = map.apply(mesh, &means, &field);

    // classify boundary nodes and their Dirichlet facets
    let mut star: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
    for (c, cell) in mesh.cells.iter().enumerate() {
        for &v in cell {
            star[v].push(c);
        }
    }
    let mut dirichlet_of: Vec<Option<usize>> = vec![None; mesh.n_vertices()];
    let mut on_boundary = vec![false; mesh.n_vertices()];
    for (f, facet) in mesh.facets.iter().enumerate() {
        if facet.is_boundary() {
            for &v in &facet.vertices {
                on_boundary[v] = true;
                if dirichlet_facet(f) && dirichlet_of[v].is_none() {
                    dirichlet_of[v] = Some(f);
                }
            }
        }
    }
    let rule = segment_rule(5);
    for v in 0..mesh.n_vertices() {
        if !on_boundary[v] {
            continue;
        }
        match dirichlet_of[v] {
            Some(f) => {
                let second = mesh.facets[f].vertices[1] == v;
                let mut acc = 0.0;
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    let chi = if second { 6.0 * s - 2.0 } else { 4.0 - 6.0 * s };
                    acc += w * chi * field(f, s);
                }
                nodal[v] = acc;
            }
            None => {
                let cells = &star[v];
                nodal[v] = cells.iter().map(|&c| means[c]).sum::<f64>() / cells.len() as f64;
            }
        }
    }
    Ok(nodal)
}

/// Oswald average of a broken P1 field: nodal value = arithmetic mean of
/// the adjacent cells' values at that node.
pub fn oswald_average(mesh: &SimplicialMesh, u_space: &DiscreteSpace, u: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; mesh.n_vertices()];
    let mut counts = vec![0usize; mesh.n_vertices()];
    let mut dofs = Vec::new();
    for c in 0..mesh.n_cells() {
        u_space.cell_dofs(mesh, c, &mut dofs);
        for (local, &v) in mesh.cells[c].iter().enumerate() {
            // broken P1 coefficient at this cell's copy of vertex v
            sums[v] += u[dofs[local]];
            counts[v] += 1;
        }
    }
    sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect()
}

/// L2 distance between a broken P1 field and a vertex-valued P1 field.
pub fn broken_vs_nodal_l2(
    mesh: &SimplicialMesh,
    u_space: &DiscreteSpace,
    u: &[f64],
    nodal: &[f64],
) -> f64 {
    let rule = triangle_rule(4);
    let mut acc = 0.0;
    let mut dofs = Vec::new();
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        u_space.cell_dofs(mesh, c, &mut dofs);
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let b = scalar_basis(u_space.kind, &geom, *bary);
            let uh: f64 = (0..b.n).map(|i| u[dofs[i]] * b.values[i]).sum();
            let vh: f64 = mesh.cells[c]
                .iter()
                .zip(bary.iter())
                .map(|(&v, l)| nodal[v] * l)
                .sum();
            let d = uh - vh;
            acc += w * 2.0 * geom.area * d * d;
        }
    }
    acc.sqrt()
}
