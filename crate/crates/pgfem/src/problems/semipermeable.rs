//! Convection-diffusion in a punctured channel whose cylinder boundary is a
//! semi-permeable membrane: the trace of the solution is constrained from
//! below on that boundary part only.
//!
//! The convective field is an analytic divergence-free stream-function
//! flow: a parabolic channel profile shut off smoothly at the cylinder, so
//! the normal velocity vanishes on both the cylinder and the walls and the
//! inlet profile is exactly (1 - y^2).

use super::{ConstraintLocus, VIProblem};
use crate::entropy::LegendreMap;
use crate::mesh::SimplicialMesh;
use crate::Point;

const CYLINDER_RADIUS: f64 = 0.3;
const CUTOFF_WIDTH: f64 = 0.4;
/// Source strength calibrated so the unconstrained solution peaks just
/// below 1 on the membrane (the interesting regime for the phi sweep).
const SOURCE: f64 = 0.6;
const DIFFUSION: f64 = 0.1;

/// Committed channel mesh text at the given resolution level.
pub fn channel_mesh_text(level: usize) -> &'static str {
    match level {
        0 => include_str!("../../meshes/channel_0.msh"),
        1 => include_str!("../../meshes/channel_1.msh"),
        _ => panic!("channel mesh level {level} not shipped (0..=1)"),
    }
}

fn load_mesh(level: usize) -> SimplicialMesh {
    let (mesh, warnings) =
        SimplicialMesh::from_text(channel_mesh_text(level)).expect("committed mesh is valid");
    assert!(warnings.is_empty());
    mesh
}

/// Divergence-free convective field: curl of
/// `psi(x, y) = (y - y^3/3) * mu(r)` with a C1 cutoff `mu` vanishing at the
/// cylinder. Zero on the cylinder, parabolic (1 - y^2, 0) away from it.
pub fn semipermeable_velocity(p: Point) -> [f64; 2] {
    let r = p[0].hypot(p[1]).max(1e-30);
    let t = ((r - CYLINDER_RADIUS) / CUTOFF_WIDTH).clamp(0.0, 1.0);
    let mu = t * t * (3.0 - 2.0 * t);
    let dmu_dr = if (0.0..1.0).contains(&t) { 6.0 * t * (1.0 - t) / CUTOFF_WIDTH } else { 0.0 };
    let stream = p[1] - p[1] * p[1] * p[1] / 3.0;
    let dstream_dy = 1.0 - p[1] * p[1];
    [
        dstream_dy * mu + stream * dmu_dr * p[1] / r,
        -stream * dmu_dr * p[0] / r,
    ]
}

/// The membrane problem with threshold `phi` on the cylinder.
pub fn semipermeable_problem(phi: f64, level: usize) -> VIProblem {
    let mesh = load_mesh(level);
    VIProblem {
        name: format!("semipermeable_phi{phi}"),
        mesh,
        kappa: Box::new(|_| [[DIFFUSION, 0.0], [0.0, DIFFUSION]]),
        beta: Box::new(semipermeable_velocity),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| SOURCE),
        skew: None,
        dirichlet: vec![
            ("inlet".to_string(), Box::new(|_| 0.0)),
            ("walls".to_string(), Box::new(|_| 0.0)),
        ],
        neumann: vec![("outlet".to_string(), Box::new(|_| 0.0))],
        constraint: LegendreMap::lower(Box::new(move |_| phi)),
        locus: ConstraintLocus::BoundaryTag("cylinder".to_string()),
        exact: None,
    }
}
