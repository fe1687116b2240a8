//! Advected circular obstacle problem on (-1,1)^2 with a known solution:
//! a spherical-cap obstacle with C1 linear extension, log-shaped solution
//! outside the contact disk, and forcing chosen so the advection term does
//! not move the free boundary.

use super::{identity_kappa, ExactSolution, VIProblem};
use crate::entropy::LegendreMap;
use crate::mesh::SimplicialMesh;
use crate::Point;

/// Lambert W, branch -1, for arguments in [-1/e, 0).
///
/// Newton iteration on `w e^w = x` seeded with the asymptotic expansion
/// `ln(-x) - ln(-ln(-x))`.
pub fn lambert_w_minus1(x: f64) -> f64 {
    assert!(x < 0.0 && x >= -(-1.0f64).exp(), "W_-1 needs x in [-1/e, 0)");
    if (x + (-1.0f64).exp()).abs() < 1e-15 {
        return -1.0;
    }
    let l = (-x).ln();
    let mut w = l - (-l).ln();
    for _ in 0..50 {
        let ew = w.exp();
        let f = w * ew - x;
        let df = ew * (1.0 + w);
        let step = f / df;
        w -= step;
        if step.abs() < 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Contact-disk radius of the exact solution.
pub fn contact_radius() -> f64 {
    (lambert_w_minus1(-1.0 / (2.0 * std::f64::consts::E * std::f64::consts::E)) / 2.0 + 1.0).exp()
}

const R_JOIN: f64 = 0.45;

fn obstacle(p: Point) -> f64 {
    let r = p[0].hypot(p[1]);
    if r <= R_JOIN {
        (0.25 - r * r).sqrt()
    } else {
        // C1 linear extension: value sqrt(19)/20, slope -9/sqrt(19) at r = 9/20
        let v = 19.0f64.sqrt() / 20.0;
        let s = -9.0 / 19.0f64.sqrt();
        v + s * (r - R_JOIN)
    }
}

/// The benchmark problem with exact solution attached.
pub fn circular_obstacle_problem(mesh: SimplicialMesh) -> VIProblem {
    let a = contact_radius();
    let q_coef = (0.25 - a * a).sqrt() / a.ln();

    let exact_u = move |p: Point| -> f64 {
        let r = p[0].hypot(p[1]);
        if r > a {
            q_coef * r.ln()
        } else {
            (0.25 - r * r).sqrt()
        }
    };
    let exact_grad = move |p: Point| -> [f64; 2] {
        let r2 = p[0] * p[0] + p[1] * p[1];
        let r = r2.sqrt();
        if r > a {
            [q_coef * p[0] / r2, q_coef * p[1] / r2]
        } else {
            let d = (0.25 - r2).sqrt();
            [-p[0] / d, -p[1] / d]
        }
    };
    // f = beta . grad u* with beta = (1, 1)
    let source = move |p: Point| -> f64 {
        let g = exact_grad(p);
        g[0] + g[1]
    };

    let dirichlet = ["left", "right", "bottom", "top"]
        .into_iter()
        .map(|t| -> (String, super::ScalarField) { (t.to_string(), Box::new(exact_u)) })
        .collect();

    VIProblem {
        name: "circular_obstacle".to_string(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [1.0, 1.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(source),
        skew: None,
        dirichlet,
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(obstacle)),
        locus: super::ConstraintLocus::Volume,
        exact: Some(ExactSolution { u: Box::new(exact_u), grad_u: Box::new(exact_grad) }),
    }
}
