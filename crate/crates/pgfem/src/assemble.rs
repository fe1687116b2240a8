//! Assembly of conforming bilinear forms, mass pairings, and load vectors.
//!
//! Coefficient fields are sampled at quadrature points. The quadrature
//! degree must cover the polynomial part of the integrand (checked), which
//! makes under-integration of the basis itself impossible; variable
//! coefficients commit the usual variational crime.

use crate::mesh::SimplicialMesh;
use crate::quadrature::{segment_rule, triangle_rule};
use crate::space::{facet_basis, scalar_basis, CellGeometry, DiscreteSpace, SpaceKind};
use crate::sparse::SparseSystem;
use crate::Point;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("space was built for a different mesh")]
    MeshMismatch,
    #[error("quadrature degree {given} is below the minimum {needed} for this form")]
    QuadratureTooWeak { given: usize, needed: usize },
    #[error("kind {0:?} is not a scalar cell space")]
    NotScalar(&'static str),
}

/// Coefficients of the operator `-div(kappa grad u) + beta . grad u + c u`,
/// plus an optional antisymmetric term `s(x) (u_x v_y - v_x u_y)`.
pub struct Coefficients<'a> {
    pub kappa: &'a (dyn Fn(Point) -> [[f64; 2]; 2] + Sync),
    pub beta: &'a (dyn Fn(Point) -> [f64; 2] + Sync),
    pub reaction: &'a (dyn Fn(Point) -> f64 + Sync),
    pub skew: Option<&'a (dyn Fn(Point) -> f64 + Sync)>,
}

pub(crate) fn poly_degree(kind: SpaceKind) -> usize {
    match kind {
        SpaceKind::DgP0 => 0,
        SpaceKind::P1 | SpaceKind::DgP1 => 1,
        SpaceKind::P1Bubble => 3,
        _ => panic!("not a scalar cell space"),
    }
}

fn min_operator_degree(kind: SpaceKind) -> usize {
    // gradient products dominate for the bubble; plain mass for P1
    match kind {
        SpaceKind::DgP0 => 0,
        SpaceKind::P1 | SpaceKind::DgP1 => 2,
        SpaceKind::P1Bubble => 4,
        _ => panic!("not a scalar cell space"),
    }
}

/// Assembles `A[i][j] = A(phi_j, phi_i)` for the operator above.
pub fn assemble_operator(
    mesh: &SimplicialMesh,
    space: &DiscreteSpace,
    coeffs: &Coefficients,
    quad_degree: usize,
) -> Result<SparseSystem, AssembleError> {
    space.check_mesh(mesh).map_err(|_| AssembleError::MeshMismatch)?;
    let needed = min_operator_degree(space.kind);
    if quad_degree < needed {
        return Err(AssembleError::QuadratureTooWeak { given: quad_degree, needed });
    }
    let rule = triangle_rule(quad_degree);
    let mut sys = SparseSystem::new(space.ndofs, space.ndofs);
    let mut dofs = Vec::new();
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        space.cell_dofs(mesh, c, &mut dofs);
        let scale = 2.0 * geom.area;
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let x = geom.point(*bary);
            let b = scalar_basis(space.kind, &geom, *bary);
            let kappa = (coeffs.kappa)(x);
            let beta = (coeffs.beta)(x);
            let cx = (coeffs.reaction)(x);
            let sx = coeffs.skew.map(|s| s(x)).unwrap_or(0.0);
            let wq = w * scale;
            for i in 0..b.n {
                let gi = b.gradients[i];
                let vi = b.values[i];
                for j in 0..b.n {
                    let gj = b.gradients[j];
                    let vj = b.values[j];
                    let kgrad = [
                        kappa[0][0] * gj[0] + kappa[0][1] * gj[1],
                        kappa[1][0] * gj[0] + kappa[1][1] * gj[1],
                    ];
                    let mut val = kgrad[0] * gi[0] + kgrad[1] * gi[1];
                    val += (beta[0] * gj[0] + beta[1] * gj[1]) * vi;
                    val += cx * vj * vi;
                    if sx != 0.0 {
                        val += sx * (gj[0] * gi[1] - gi[0] * gj[1]);
                    }
                    sys.add(dofs[i], dofs[j], wq * val);
                }
            }
        }
    }
    Ok(sys)
}

/// Volume load `(f, v)` for a scalar space.
pub fn assemble_load(
    mesh: &SimplicialMesh,
    space: &DiscreteSpace,
    f: &dyn Fn(Point) -> f64,
    quad_degree: usize,
) -> Vec<f64> {
    let rule = triangle_rule(quad_degree);
    let mut rhs = vec![0.0; space.ndofs];
    let mut dofs = Vec::new();
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        space.cell_dofs(mesh, c, &mut dofs);
        let scale = 2.0 * geom.area;
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let x = geom.point(*bary);
            let b = scalar_basis(space.kind, &geom, *bary);
            let fv = f(x);
            for i in 0..b.n {
                rhs[dofs[i]] += w * scale * fv * b.values[i];
            }
        }
    }
    rhs
}

/// Adds the boundary load `(g, v)` over a tagged part to `rhs`.
pub fn add_neumann_load(
    mesh: &SimplicialMesh,
    space: &DiscreteSpace,
    tag: &str,
    g: &dyn Fn(Point) -> f64,
    rhs: &mut [f64],
) {
    let rule = segment_rule(5);
    let mut dofs = Vec::new();
    for f in mesh.facets_with_tag(tag) {
        let facet = &mesh.facets[f];
        let cell = facet.cells.0;
        let geom = CellGeometry::new(mesh, cell);
        space.cell_dofs(mesh, cell, &mut dofs);
        let [a, b] = facet.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let bary = mesh.barycentric(cell, x);
            let bv = scalar_basis(space.kind, &geom, bary);
            let gv = g(x);
            for i in 0..bv.n {
                rhs[dofs[i]] += w * facet.length * gv * bv.values[i];
            }
        }
    }
}

/// Integration region of a mass pairing.
pub enum Region<'a> {
    Volume,
    Boundary(&'a str),
}

/// Assembles the rectangular pairing `M[i][j] = (w * B trial_j, test_i)`
/// over the region, where `B` is the identity (volume) or the trace
/// (boundary part). Facet spaces are only meaningful on the boundary.
pub fn assemble_mass(
    mesh: &SimplicialMesh,
    trial: &DiscreteSpace,
    test: &DiscreteSpace,
    weight: Option<&dyn Fn(Point) -> f64>,
    region: Region,
) -> Result<SparseSystem, AssembleError> {
    trial.check_mesh(mesh).map_err(|_| AssembleError::MeshMismatch)?;
    test.check_mesh(mesh).map_err(|_| AssembleError::MeshMismatch)?;
    let mut sys = SparseSystem::new(test.ndofs, trial.ndofs);
    match region {
        Region::Volume => {
            let degree = (poly_degree(trial.kind) + poly_degree(test.kind) + 2).min(6);
            let rule = triangle_rule(degree);
            let mut tr_dofs = Vec::new();
            let mut te_dofs = Vec::new();
            for c in 0..mesh.n_cells() {
                let geom = CellGeometry::new(mesh, c);
                trial.cell_dofs(mesh, c, &mut tr_dofs);
                test.cell_dofs(mesh, c, &mut te_dofs);
                let scale = 2.0 * geom.area;
                for (bary, &w) in rule.points.iter().zip(&rule.weights) {
                    let x = geom.point(*bary);
                    let bt = scalar_basis(trial.kind, &geom, *bary);
                    let bs = scalar_basis(test.kind, &geom, *bary);
                    let wq = w * scale * weight.map(|f| f(x)).unwrap_or(1.0);
                    for i in 0..bs.n {
                        for j in 0..bt.n {
                            sys.add(te_dofs[i], tr_dofs[j], wq * bs.values[i] * bt.values[j]);
                        }
                    }
                }
            }
        }
        Region::Boundary(tag) => {
            let rule = segment_rule(5);
            for f in mesh.facets_with_tag(tag) {
                let facet = &mesh.facets[f];
                let cell = facet.cells.0;
                let geom = CellGeometry::new(mesh, cell);
                let [a, b] = facet.vertices;
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let wq = w * facet.length * weight.map(|g| g(x)).unwrap_or(1.0);
                    let (tr_vals, tr_dofs) = trace_values(mesh, trial, f, cell, &geom, x, s);
                    let (te_vals, te_dofs) = trace_values(mesh, test, f, cell, &geom, x, s);
                    for (vi, &di) in te_vals.iter().zip(&te_dofs) {
                        for (vj, &dj) in tr_vals.iter().zip(&tr_dofs) {
                            sys.add(di, dj, wq * vi * vj);
                        }
                    }
                }
            }
        }
    }
    Ok(sys)
}

/// Trace of a space's basis at a point on a boundary facet.
fn trace_values(
    mesh: &SimplicialMesh,
    space: &DiscreteSpace,
    facet: usize,
    cell: usize,
    geom: &CellGeometry,
    x: Point,
    s: f64,
) -> (Vec<f64>, Vec<usize>) {
    if space.kind.is_facet() {
        let dofs = space.facet_dofs(facet);
        if dofs.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let (vals, n) = facet_basis(space.kind, s);
        (vals[..n].to_vec(), dofs)
    } else {
        let bary = mesh.barycentric(cell, x);
        let b = scalar_basis(space.kind, geom, bary);
        let mut dofs = Vec::new();
        space.cell_dofs(mesh, cell, &mut dofs);
        (b.values[..b.n].to_vec(), dofs)
    }
}
