//! Obstacle problem with a biactive region: on half the domain the solution
//! touches the zero obstacle while the residual also vanishes, which defeats
//! strict-complementarity assumptions.

use super::{identity_kappa, ExactSolution, VIProblem};
use crate::entropy::LegendreMap;
use crate::mesh::SimplicialMesh;
use crate::Point;

fn exact_u(p: Point) -> f64 {
    if p[0] > 0.0 {
        p[0].powi(4)
    } else {
        0.0
    }
}

fn exact_grad(p: Point) -> [f64; 2] {
    if p[0] > 0.0 {
        [4.0 * p[0].powi(3), 0.0]
    } else {
        [0.0, 0.0]
    }
}

/// Forcing with `L u = F` for `L = -lap + (1,1) . grad`, so the biactive
/// region is (-1,0) x (-1,1).
fn source(p: Point) -> f64 {
    if p[0] > 0.0 {
        -12.0 * p[0] * p[0] + 4.0 * p[0].powi(3)
    } else {
        0.0
    }
}

pub fn biactive_problem(mesh: SimplicialMesh) -> VIProblem {
    let dirichlet = ["left", "right", "bottom", "top"]
        .into_iter()
        .map(|t| -> (String, super::ScalarField) { (t.to_string(), Box::new(exact_u)) })
        .collect();
    VIProblem {
        name: "biactive".to_string(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [1.0, 1.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(source),
        skew: None,
        dirichlet,
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(|_| 0.0)),
        locus: super::ConstraintLocus::Volume,
        exact: Some(ExactSolution { u: Box::new(exact_u), grad_u: Box::new(exact_grad) }),
    }
}
