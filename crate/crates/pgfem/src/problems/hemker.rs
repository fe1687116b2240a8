//! Convection-dominated flow past a cylinder on a punctured rectangle with
//! the maximum principle enforced as a bilateral constraint. The meshes are
//! committed ASCII files (generated offline, validated on load).

use super::{ConstraintLocus, VIProblem};
use crate::entropy::LegendreMap;
use crate::mesh::SimplicialMesh;

/// Committed mesh text at the given resolution level (0 = coarsest).
pub fn hemker_mesh_text(level: usize) -> &'static str {
    match level {
        0 => include_str!("../../meshes/hemker_0.msh"),
        1 => include_str!("../../meshes/hemker_1.msh"),
        2 => include_str!("../../meshes/hemker_2.msh"),
        _ => panic!("hemker mesh level {level} not shipped (0..=2)"),
    }
}

fn load_mesh(level: usize) -> SimplicialMesh {
    let (mesh, warnings) =
        SimplicialMesh::from_text(hemker_mesh_text(level)).expect("committed mesh is valid");
    assert!(warnings.is_empty(), "committed mesh should need no repairs");
    mesh
}

/// The benchmark at diffusion 1e-3.
pub fn hemker_problem(level: usize) -> VIProblem {
    hemker_problem_with_eps(1e-3, level)
}

/// Same problem with adjustable diffusion (eps = 1 is the smooth control).
pub fn hemker_problem_with_eps(eps: f64, level: usize) -> VIProblem {
    let mesh = load_mesh(level);
    VIProblem {
        name: format!("hemker_eps{eps}"),
        mesh,
        kappa: Box::new(move |_| [[eps, 0.0], [0.0, eps]]),
        beta: Box::new(|_| [1.0, 0.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| 0.0),
        skew: None,
        dirichlet: vec![
            ("left".to_string(), Box::new(|_| 0.0)),
            ("circle".to_string(), Box::new(|_| 1.0)),
        ],
        neumann: vec![("outflow".to_string(), Box::new(|_| 0.0))],
        constraint: LegendreMap::bilateral(Box::new(|_| 0.0), Box::new(|_| 1.0)),
        locus: ConstraintLocus::Volume,
        exact: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn committed_meshes_load_with_expected_tags() {
        for level in 0..=2 {
            let mesh = load_mesh(level);
            for tag in ["left", "circle", "outflow"] {
                assert!(
                    mesh.facets_with_tag(tag).count() > 0,
                    "level {level}: tag {tag} missing"
                );
            }
            // punctured rectangle: one hole
            assert_eq!(mesh.euler_characteristic(), 0, "level {level}");
            assert_eq!(mesh.boundary_loops(), 2, "level {level}");
            // circle facets lie near radius 1 (polygonal rim, within a
            // mesh-size band)
            let band = 1.5 * mesh.mesh_size();
            for f in mesh.facets_with_tag("circle") {
                for &v in &mesh.facets[f].vertices {
                    let p = mesh.vertices[v];
                    let r = p[0].hypot(p[1]);
                    assert!(r > 1.0 - 1e-9 && r < 1.0 + band, "level {level}: r = {r}");
                }
            }
        }
    }
}
