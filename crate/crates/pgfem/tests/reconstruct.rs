//! Averaging-reconstruction checks: interpolation exactness, positivity
//! preservation, Oswald jump decay, and the bound-preserving average
//! identity on a converged obstacle run.

use pgfem::fospg::{FospgConfig, FospgSolver};
use pgfem::mesh::{Diagonal, Rect, SimplicialMesh};
use pgfem::problems::circular_obstacle_problem;
use pgfem::reconstruct::{
    broken_vs_nodal_l2, cell_means, clement_interpolate, oswald_average, reconstruct_feasible,
    ClementMap,
};
use pgfem::space::{DiscreteSpace, FacetSubset, SpaceKind};

fn unit_square(n: usize) -> SimplicialMesh {
    SimplicialMesh::structured_rectangle(n, n, Rect::new(0.0, 0.0, 1.0, 1.0), Diagonal::Slash)
        .unwrap()
}

fn interior_vertices(mesh: &SimplicialMesh) -> Vec<bool> {
    let mut boundary = vec![false; mesh.n_vertices()];
    for f in &mesh.facets {
        if f.is_boundary() {
            boundary[f.vertices[0]] = true;
            boundary[f.vertices[1]] = true;
        }
    }
    boundary.iter().map(|b| !b).collect()
}

/// DG-P1 nodal interpolation of a function, per cell.
fn dg_interpolate(mesh: &SimplicialMesh, f: &dyn Fn(pgfem::Point) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; 3 * mesh.n_cells()];
    for (c, cell) in mesh.cells.iter().enumerate() {
        for (l, &v) in cell.iter().enumerate() {
            out[3 * c + l] = f(mesh.vertices[v]);
        }
    }
    out
}

/// Facet-P1 interpolation of a function on every facet.
fn facet_interpolate(
    mesh: &SimplicialMesh,
    m_space: &DiscreteSpace,
    f: &dyn Fn(pgfem::Point) -> f64,
) -> Vec<f64> {
    let mut out = vec![0.0; m_space.ndofs];
    for facet in 0..mesh.n_facets() {
        let dofs = m_space.facet_dofs(facet);
        let [a, b] = mesh.facets[facet].vertices;
        out[dofs[0]] = f(mesh.vertices[a]);
        out[dofs[1]] = f(mesh.vertices[b]);
    }
    out
}

#[test]
fn constant_input_reproduced_exactly() {
    let mesh = unit_square(4);
    let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
    let m_space = DiscreteSpace::facet(&mesh, 1, FacetSubset::All).unwrap();
    let u = dg_interpolate(&mesh, &|_| 3.25);
    let uhat = facet_interpolate(&mesh, &m_space, &|_| 3.25);
    let nodal = clement_interpolate(&mesh, &u_space, &u, &m_space, &uhat).unwrap();
    for v in nodal {
        assert!((v - 3.25).abs() < 1e-13);
    }
}

#[test]
fn linear_functions_reproduced_at_interior_nodes() {
    let mesh = unit_square(5);
    let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
    let m_space = DiscreteSpace::facet(&mesh, 1, FacetSubset::All).unwrap();
    let p = |x: pgfem::Point| x[0] + 2.0 * x[1];
    let u = dg_interpolate(&mesh, &p);
    let uhat = facet_interpolate(&mesh, &m_space, &p);
    let nodal = clement_interpolate(&mesh, &u_space, &u, &m_space, &uhat).unwrap();
    let interior = interior_vertices(&mesh);
    for (v, (&val, &is_int)) in nodal.iter().zip(interior.iter()).enumerate().map(|(i, z)| (i, (z.0, z.1))) {
        if is_int {
            let want = p(mesh.vertices[v]);
            assert!((val - want).abs() < 1e-13, "node {v}: {val} vs {want}");
        }
    }
}

#[test]
fn nonnegative_data_gives_nonnegative_nodal_values() {
    let mesh = unit_square(6);
    let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
    let m_space = DiscreteSpace::facet(&mesh, 1, FacetSubset::All).unwrap();
    let f = |x: pgfem::Point| (x[0] - 0.4).abs() + 0.1 * x[1];
    let u = dg_interpolate(&mesh, &f);
    let uhat = facet_interpolate(&mesh, &m_space, &f);
    let nodal = clement_interpolate(&mesh, &u_space, &u, &m_space, &uhat).unwrap();
    assert!(nodal.iter().all(|&v| v >= 0.0));
}

#[test]
fn convex_weights_reconstruct_node_positions() {
    // the centroid weights must average cell means of linear functions back
    // to the nodal value; checked implicitly above, here check the map
    // builds on an unstructured-ish sheared mesh too
    let mesh = SimplicialMesh::sheared_quadrilateral(
        8,
        4,
        [[0.0, 0.0], [3.0, 0.0], [3.0, 1.0], [1.0, 1.0]],
    )
    .unwrap();
    let map = ClementMap::new(&mesh).unwrap();
    let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
    let p = |x: pgfem::Point| 2.0 * x[0] - x[1] + 0.3;
    let u = dg_interpolate(&mesh, &p);
    let means = cell_means(&mesh, &u_space, &u);
    let nodal = map.apply(&mesh, &means, &|_, _| 0.0);
    let interior = interior_vertices(&mesh);
    for v in 0..mesh.n_vertices() {
        if interior[v] {
            assert!((nodal[v] - p(mesh.vertices[v])).abs() < 1e-12);
        }
    }
}

#[test]
fn feasible_reconstruction_respects_obstacle_and_boundary() {
    let mesh = unit_square(4);
    let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
    let m_space = DiscreteSpace::facet(&mesh, 1, FacetSubset::All).unwrap();
    let phi = |_: pgfem::Point| -0.25;
    // u = phi everywhere: reconstruction returns the nodal interpolant of phi
    let u = dg_interpolate(&mesh, &phi);
    let uhat = facet_interpolate(&mesh, &m_space, &phi);
    let nodal = reconstruct_feasible(&mesh, &u_space, &u, &m_space, &uhat, &phi).unwrap();
    for v in &nodal {
        assert!((v - (-0.25)).abs() < 1e-12);
    }

    // feasible data above the obstacle stays above it; homogeneous boundary
    // data is honored for constant nonpositive obstacles
    let f = |x: pgfem::Point| if x[0] > 0.3 { 0.5 * x[0] } else { 0.0 };
    let u2 = dg_interpolate(&mesh, &f);
    let uhat2 = facet_interpolate(&mesh, &m_space, &|_| 0.0);
    let nodal2 = reconstruct_feasible(&mesh, &u_space, &u2, &m_space, &uhat2, &phi).unwrap();
    let interior = interior_vertices(&mesh);
    for v in 0..mesh.n_vertices() {
        assert!(nodal2[v] >= -0.25 - 1e-12);
        if !interior[v] {
            assert!(nodal2[v].abs() < 1e-12, "boundary node {v}: {}", nodal2[v]);
        }
    }
}

#[test]
fn infeasible_cell_means_are_reported() {
    let mesh = unit_square(2);
    let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
    let m_space = DiscreteSpace::facet(&mesh, 1, FacetSubset::All).unwrap();
    let u = dg_interpolate(&mesh, &|_| -1.0);
    let uhat = facet_interpolate(&mesh, &m_space, &|_| 0.0);
    let r = reconstruct_feasible(&mesh, &u_space, &u, &m_space, &uhat, &|_| 0.0);
    assert!(r.is_err());
}

#[test]
fn oswald_average_basics() {
    // continuous input is unchanged
    let mesh = unit_square(3);
    let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
    let p = |x: pgfem::Point| 1.0 - x[0] + 3.0 * x[1];
    let u = dg_interpolate(&mesh, &p);
    let nodal = oswald_average(&mesh, &u_space, &u);
    for (v, &val) in nodal.iter().enumerate() {
        assert!((val - p(mesh.vertices[v])).abs() < 1e-13);
    }

    // checkerboard +-1 on the 2-cell mesh: shared nodes average to zero
    let two = unit_square(1);
    let u2 = vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
    let space2 = DiscreteSpace::new(&two, SpaceKind::DgP1);
    let nodal2 = oswald_average(&two, &space2, &u2);
    // vertices 1 and 2 are shared by both cells
    assert_eq!(nodal2[1], 0.0);
    assert_eq!(nodal2[2], 0.0);
}

#[test]
fn oswald_jump_decay_under_refinement() {
    // a smooth function sampled discontinuously: per-cell nodal samples
    // shifted by +-(h/10) in x depending on cell parity, giving O(h) jumps
    let smooth = |x: pgfem::Point| (std::f64::consts::PI * x[0]).sin() * (2.0 * x[1] - 1.0);
    let mut ratios = Vec::new();
    let mut prev: Option<f64> = None;
    for n in [8usize, 16, 32] {
        let mesh = unit_square(n);
        let h = 1.0 / n as f64;
        let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
        let mut u = vec![0.0; 3 * mesh.n_cells()];
        for (c, cell) in mesh.cells.iter().enumerate() {
            let shift = if c % 2 == 0 { 0.1 * h } else { -0.1 * h };
            for (l, &v) in cell.iter().enumerate() {
                let p = mesh.vertices[v];
                u[3 * c + l] = smooth([p[0] + shift, p[1]]);
            }
        }
        let nodal = oswald_average(&mesh, &u_space, &u);
        let err = broken_vs_nodal_l2(&mesh, &u_space, &u, &nodal);
        if let Some(p) = prev {
            ratios.push(err / p);
        }
        prev = Some(err);
    }
    for r in &ratios {
        assert!((0.4..=0.6).contains(r), "refinement ratio {r} outside [0.4, 0.6]");
    }
}

/// Bound-preserving average: equals the piecewise means of the weighted
/// average and never drops below the cellwise obstacle minimum.
#[test]
fn bound_preserving_average_identity_on_obstacle_run() {
    let mesh = SimplicialMesh::structured_rectangle(
        8,
        8,
        Rect::new(-1.0, -1.0, 1.0, 1.0),
        Diagonal::Slash,
    )
    .unwrap();
    let problem = circular_obstacle_problem(mesh);
    // the identity holds exactly at the subproblem solutions; solve deep
    // enough that Newton tolerance stays below the 1e-12 comparison
    let config =
        FospgConfig { p: 1, q: 0, stop_tol: 1e-10, newton_tol: 1e-13, ..FospgConfig::default() };
    let mut solver = FospgSolver::new(&problem, config).unwrap();
    let run = solver.run().unwrap();
    let obs_avg = run.obs_avg_cell.as_ref().unwrap();

    // identity with the L2 projection of the weighted primal average
    let means = cell_means(&problem.mesh, &solver.u_space, &run.u_avg);
    for (a, b) in obs_avg.iter().zip(&means) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    // feasibility against the cellwise obstacle minimum (sampled)
    let tri = pgfem::quadrature::triangle_rule(6);
    for (c, &val) in obs_avg.iter().enumerate() {
        let geom = pgfem::space::CellGeometry::new(&problem.mesh, c);
        let phi_min = tri
            .points
            .iter()
            .map(|b| problem.constraint.lower_bound(geom.point(*b)))
            .fold(f64::INFINITY, f64::min);
        assert!(val >= phi_min - 1e-12);
    }
    // single iterate: the average equals the first observable
    let p2 = circular_obstacle_problem(
        SimplicialMesh::structured_rectangle(4, 4, Rect::new(-1.0, -1.0, 1.0, 1.0), Diagonal::Slash)
            .unwrap(),
    );
    let config1 = FospgConfig {
        p: 1,
        q: 0,
        max_prox_iters: 1,
        require_convergence: false,
        ..FospgConfig::default()
    };
    let mut s1 = FospgSolver::new(&p2, config1).unwrap();
    let r1 = s1.run().unwrap();
    let avg1 = r1.obs_avg_cell.as_ref().unwrap();
    for (a, b) in avg1.iter().zip(s1.observable_cell_means()) {
        assert!((a - b).abs() < 1e-13);
    }
}
