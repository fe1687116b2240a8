//! Field evaluation, error norms, and level-set extraction.

use crate::mesh::SimplicialMesh;
use crate::quadrature::triangle_rule;
use crate::space::{scalar_basis, CellGeometry, DiscreteSpace, RtBasis};
use crate::Point;

/// Value of a scalar FE field at a barycentric point of a cell.
pub fn eval_scalar(
    mesh: &SimplicialMesh,
    space: &DiscreteSpace,
    coeffs: &[f64],
    cell: usize,
    bary: [f64; 3],
) -> f64 {
    let geom = CellGeometry::new(mesh, cell);
    let b = scalar_basis(space.kind, &geom, bary);
    let mut dofs = Vec::new();
    space.cell_dofs(mesh, cell, &mut dofs);
    (0..b.n).map(|i| coeffs[dofs[i]] * b.values[i]).sum()
}

/// Gradient of a scalar FE field at a barycentric point of a cell.
pub fn eval_scalar_gradient(
    mesh: &SimplicialMesh,
    space: &DiscreteSpace,
    coeffs: &[f64],
    cell: usize,
    bary: [f64; 3],
) -> [f64; 2] {
    let geom = CellGeometry::new(mesh, cell);
    let b = scalar_basis(space.kind, &geom, bary);
    let mut dofs = Vec::new();
    space.cell_dofs(mesh, cell, &mut dofs);
    let mut g = [0.0; 2];
    for i in 0..b.n {
        g[0] += coeffs[dofs[i]] * b.gradients[i][0];
        g[1] += coeffs[dofs[i]] * b.gradients[i][1];
    }
    g
}

/// L2 norm of the difference between a scalar field and a reference function.
pub fn l2_error(
    mesh: &SimplicialMesh,
    space: &DiscreteSpace,
    coeffs: &[f64],
    exact: &dyn Fn(Point) -> f64,
    degree: usize,
) -> f64 {
    let rule = triangle_rule(degree);
    let mut acc = 0.0;
    let mut dofs = Vec::new();
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        space.cell_dofs(mesh, c, &mut dofs);
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let b = scalar_basis(space.kind, &geom, *bary);
            let uh: f64 = (0..b.n).map(|i| coeffs[dofs[i]] * b.values[i]).sum();
            let d = uh - exact(geom.point(*bary));
            acc += w * 2.0 * geom.area * d * d;
        }
    }
    acc.sqrt()
}

/// Broken H1 seminorm of the difference against a reference gradient.
pub fn h1_semi_error(
    mesh: &SimplicialMesh,
    space: &DiscreteSpace,
    coeffs: &[f64],
    exact_grad: &dyn Fn(Point) -> [f64; 2],
    degree: usize,
) -> f64 {
    let rule = triangle_rule(degree);
    let mut acc = 0.0;
    let mut dofs = Vec::new();
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        space.cell_dofs(mesh, c, &mut dofs);
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let b = scalar_basis(space.kind, &geom, *bary);
            let mut g = [0.0; 2];
            for i in 0..b.n {
                g[0] += coeffs[dofs[i]] * b.gradients[i][0];
                g[1] += coeffs[dofs[i]] * b.gradients[i][1];
            }
            let ge = exact_grad(geom.point(*bary));
            let (dx, dy) = (g[0] - ge[0], g[1] - ge[1]);
            acc += w * 2.0 * geom.area * (dx * dx + dy * dy);
        }
    }
    acc.sqrt()
}

/// L2 norm of the difference of two coefficient vectors on the same space.
pub fn l2_diff(mesh: &SimplicialMesh, space: &DiscreteSpace, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2_error(mesh, space, &diff, &|_| 0.0, 4)
}

/// Broken H1 seminorm of the difference of two coefficient vectors.
pub fn h1_semi_diff(mesh: &SimplicialMesh, space: &DiscreteSpace, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    h1_semi_error(mesh, space, &diff, &|_| [0.0, 0.0], 4)
}

/// L2 error of a broken RT field against a reference vector field.
pub fn rt_l2_error(
    mesh: &SimplicialMesh,
    order: usize,
    coeffs: &[f64],
    exact: &dyn Fn(Point) -> [f64; 2],
    degree: usize,
) -> f64 {
    let rule = triangle_rule(degree);
    let per = if order == 0 { 3 } else { 8 };
    let mut acc = 0.0;
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        let rt = RtBasis::new(&geom, order);
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let (vals, _) = rt.eval(*bary);
            let mut qh = [0.0; 2];
            for i in 0..per {
                qh[0] += coeffs[per * c + i] * vals[i][0];
                qh[1] += coeffs[per * c + i] * vals[i][1];
            }
            let qe = exact(geom.point(*bary));
            let (dx, dy) = (qh[0] - qe[0], qh[1] - qe[1]);
            acc += w * 2.0 * geom.area * (dx * dx + dy * dy);
        }
    }
    acc.sqrt()
}

/// Marching-edges extraction of the level set of a vertex-valued P1 field.
///
/// Returns chained polylines (one per connected contour component). Levels
/// outside the field's range give no polylines.
pub fn extract_level_polylines(
    mesh: &SimplicialMesh,
    nodal: &[f64],
    level: f64,
) -> Vec<Vec<Point>> {
    assert_eq!(nodal.len(), mesh.n_vertices());
    // crossing point on a mesh edge, keyed by the (min, max) vertex pair
    let crossing = |a: usize, b: usize| -> Option<Point> {
        let (fa, fb) = (nodal[a] - level, nodal[b] - level);
        // vertex values equal to the level count as the positive side
        let sa = fa >= 0.0;
        let sb = fb >= 0.0;
        if sa == sb {
            return None;
        }
        let t = fa / (fa - fb);
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        Some([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])])
    };

    // per cell, connect the two crossed edges
    let mut segments: Vec<[(usize, usize); 2]> = Vec::new();
    let mut pts: std::collections::HashMap<(usize, usize), Point> = Default::default();
    for cell in &mesh.cells {
        let mut hit = Vec::new();
        for l in 0..3 {
            let a = cell[l];
            let b = cell[(l + 1) % 3];
            let key = (a.min(b), a.max(b));
            if let Some(p) = crossing(a, b) {
                pts.insert(key, p);
                hit.push(key);
            }
        }
        if hit.len() == 2 {
            segments.push([hit[0], hit[1]]);
        }
    }

    // chain segments that share edge keys
    let mut adjacency: std::collections::HashMap<(usize, usize), Vec<usize>> = Default::default();
    for (s, seg) in segments.iter().enumerate() {
        for key in seg {
            adjacency.entry(*key).or_default().push(s);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        // walk both directions from the starting segment
        let mut chain = vec![segments[start][0], segments[start][1]];
        used[start] = true;
        loop {
            let tail = *chain.last().unwrap();
            let next = adjacency[&tail].iter().find(|&&s| !used[s]).copied();
            match next {
                Some(s) => {
                    used[s] = true;
                    let seg = segments[s];
                    chain.push(if seg[0] == tail { seg[1] } else { seg[0] });
                }
                None => break,
            }
        }
        loop {
            let head = chain[0];
            let next = adjacency[&head].iter().find(|&&s| !used[s]).copied();
            match next {
                Some(s) => {
                    used[s] = true;
                    let seg = segments[s];
                    chain.insert(0, if seg[0] == head { seg[1] } else { seg[0] });
                }
                None => break,
            }
        }
        polylines.push(chain.into_iter().map(|k| pts[&k]).collect());
    }
    polylines
}
