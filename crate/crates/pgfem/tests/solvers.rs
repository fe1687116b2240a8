//! Solver-level checks: trivial fixed points, dense Newton oracles on tiny
//! meshes, and agreement between the condensed and monolithic paths.

mod common;

use pgfem::assemble::{assemble_load, assemble_mass, assemble_operator, Coefficients, Region};
use pgfem::dense::DMat;
use pgfem::entropy::LegendreMap;
use pgfem::fospg::{FospgConfig, FospgSolver};
use pgfem::mesh::{Diagonal, Rect, SimplicialMesh};
use pgfem::pg::{self, ConformingPg, PairKind, PgConfig};
use pgfem::problems::{
    identity_kappa, ConstraintLocus, ScalarField, VIProblem,
};
use pgfem::quadrature::triangle_rule;
use pgfem::space::{CellGeometry, DiscreteSpace, SpaceKind};

fn unit_square_mesh(n: usize) -> SimplicialMesh {
    SimplicialMesh::structured_rectangle(n, n, Rect::new(0.0, 0.0, 1.0, 1.0), Diagonal::Slash)
        .unwrap()
}

fn trivial_problem(mesh: SimplicialMesh) -> VIProblem {
    let zero: ScalarField = Box::new(|_| 0.0);
    VIProblem {
        name: "trivial".into(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [1.0, 1.0]),
        reaction: Box::new(|_| 0.0),
        source: zero,
        skew: None,
        dirichlet: vec![
            ("left".into(), Box::new(|_| 0.0)),
            ("right".into(), Box::new(|_| 0.0)),
            ("bottom".into(), Box::new(|_| 0.0)),
            ("top".into(), Box::new(|_| 0.0)),
        ],
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(|_| -1.0)),
        locus: ConstraintLocus::Volume,
        exact: None,
    }
}

#[test]
fn conforming_trivial_problem_converges_immediately() {
    let problem = trivial_problem(unit_square_mesh(2));
    let run = pg::run(&problem, PairKind::P1BubbleP0, PgConfig::default()).unwrap();
    assert!(run.converged);
    assert!(run.prox_iters() <= 2, "took {} iterations", run.prox_iters());
    assert!(run.u.iter().all(|&v| v.abs() < 1e-12));
    assert!(run.psi.iter().all(|&v| v.abs() < 1e-12));
}

#[test]
fn fospg_trivial_problem_converges_immediately() {
    let problem = trivial_problem(unit_square_mesh(2));
    let mut solver = FospgSolver::new(&problem, FospgConfig::default()).unwrap();
    let run = solver.run().unwrap();
    assert!(run.converged);
    assert!(run.prox_iters() <= 2);
    assert!(solver.primal().iter().all(|&v| v.abs() < 1e-11));
    assert!(solver.flux().iter().all(|&v| v.abs() < 1e-11));
    assert!(solver.psi.iter().all(|&v| v.abs() < 1e-11));
}

/// Dense Newton on the one-cell conforming step equations, written
/// independently with dense linear algebra; the solver's Newton iterates
/// must match it to 1e-12.
#[test]
fn conforming_newton_matches_dense_oracle_per_iterate() {
    let (mesh, _) = SimplicialMesh::from_parts(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2]],
        &[(0, 1, "b".into()), (1, 2, "h".into()), (2, 0, "l".into())],
        false,
    )
    .unwrap();
    let problem = VIProblem {
        name: "one_cell".into(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [0.0, 0.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| -5.0),
        skew: None,
        dirichlet: vec![
            ("b".into(), Box::new(|_| 1.0)),
            ("h".into(), Box::new(|_| 1.0)),
            ("l".into(), Box::new(|_| 1.0)),
        ],
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(|_| 0.0)),
        locus: ConstraintLocus::Volume,
        exact: None,
    };

    // trace the solver's Newton iterates for one proximal step
    let config = PgConfig { max_newton_iters: 60, ..PgConfig::default() };
    let mut solver = ConformingPg::new(&problem, PairKind::P1BubbleP0, config).unwrap();
    let mut iterates: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let alpha = 1.0;
    solver
        .step(1, alpha, Some(&mut |u: &[f64], psi: &[f64]| {
            iterates.push((u.to_vec(), psi.to_vec()));
        }))
        .unwrap();
    assert!(!iterates.is_empty());

    // independent dense Newton on the same equations: unknowns (u_bubble, delta)
    // with the three vertex dofs pinned at 1
    let mesh = &problem.mesh;
    let v_space = {
        let mut s = DiscreteSpace::new(mesh, SpaceKind::P1Bubble);
        for tag in ["b", "h", "l"] {
            s.constrain_dirichlet(mesh, tag, &|_| 1.0);
        }
        s
    };
    let w_space = DiscreteSpace::new(mesh, SpaceKind::DgP0);
    let coeffs = Coefficients {
        kappa: &|_| [[1.0, 0.0], [0.0, 1.0]],
        beta: &|_| [0.0, 0.0],
        reaction: &|_| 0.0,
        skew: None,
    };
    let a = assemble_operator(mesh, &v_space, &coeffs, 4).unwrap().to_dense();
    let b = assemble_mass(mesh, &v_space, &w_space, None, Region::Volume)
        .unwrap()
        .to_dense();
    let f = assemble_load(mesh, &v_space, &|_| -5.0, 4);
    let rule = triangle_rule(4);
    let geom = CellGeometry::new(mesh, 0);
    let map = &problem.constraint;

    // moments of the observable and its derivative on the single cell
    let observable = |psi: f64| -> (f64, f64) {
        let mut m = 0.0;
        let mut d = 0.0;
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let x = geom.point(*bary);
            m += w * 2.0 * geom.area * map.grad_dual(psi, x);
            d += w * 2.0 * geom.area * map.grad_dual_derivative(psi, x);
        }
        (m, d)
    };

    let mut u = vec![1.0, 1.0, 1.0, 0.0];
    let mut delta = 0.0;
    let psi_prev = 0.0;
    let free = 3usize; // bubble dof
    for (u_solver, psi_solver) in &iterates {
        // residual: free row of (A u + B^T delta - F) and the latent row
        let mut r = vec![0.0; 2];
        for j in 0..4 {
            r[0] += a[(free, j)] * u[j];
        }
        r[0] += b[(0, free)] * delta - f[free];
        let (m, dm) = observable(psi_prev + alpha * delta);
        for j in 0..4 {
            r[1] += b[(0, j)] * u[j];
        }
        r[1] -= m;
        // dense Jacobian in (u_bubble, delta)
        let jac = DMat::from_rows(&[
            &[a[(free, free)], b[(0, free)]],
            &[b[(0, free)], -alpha * dm],
        ]);
        let step = jac.solve(&[-r[0], -r[1]]).unwrap();
        u[free] += step[0];
        delta += step[1];
        let psi = psi_prev + alpha * delta;
        assert!(
            (u[free] - u_solver[free]).abs() < 1e-12,
            "bubble dof: {} vs {}",
            u[free],
            u_solver[free]
        );
        assert!((psi - psi_solver[0]).abs() < 1e-12, "latent: {} vs {}", psi, psi_solver[0]);
    }
}

/// One-cell hybrid VI against a dense direct Newton solve of the same
/// nonlinear system assembled from the standalone forms.
#[test]
fn fospg_single_cell_matches_dense_oracle() {
    let (mesh, _) = SimplicialMesh::from_parts(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2]],
        &[(0, 1, "b".into()), (1, 2, "h".into()), (2, 0, "l".into())],
        false,
    )
    .unwrap();
    let problem = VIProblem {
        name: "one_cell_hybrid".into(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [0.0, 0.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| -3.0),
        skew: None,
        dirichlet: vec![
            ("b".into(), Box::new(|_| 0.5)),
            ("h".into(), Box::new(|_| 0.5)),
            ("l".into(), Box::new(|_| 0.5)),
        ],
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(|_| 0.0)),
        locus: ConstraintLocus::Volume,
        exact: None,
    };
    let config = FospgConfig {
        p: 0,
        q: 0,
        condensed: false,
        newton_tol: 1e-13,
        ..FospgConfig::default()
    };
    let mut solver = FospgSolver::new(&problem, config).unwrap();
    let alpha = 1.0;
    solver.step(1, alpha).unwrap();

    // dense oracle: unknowns (q0, q1, q2, u, delta); multipliers are fixed
    // Dirichlet values, so only the interior block remains
    let mesh = &problem.mesh;
    let geom = CellGeometry::new(mesh, 0);
    let rt = pgfem::space::RtBasis::new(&geom, 0);
    let rule = triangle_rule(4);
    // (q_j, r_i) mass and (r_i, grad u) = 0 for P0; facet terms couple u, uhat
    let mut mq = DMat::zeros(3, 3);
    for (bary, &w) in rule.points.iter().zip(&rule.weights) {
        let (vals, _) = rt.eval(*bary);
        for i in 0..3 {
            for j in 0..3 {
                mq[(i, j)] +=
                    w * 2.0 * geom.area * (vals[i][0] * vals[j][0] + vals[i][1] * vals[j][1]);
            }
        }
    }
    // facet integrals of r . n against (u - uhat); uhat = 0.5 everywhere
    let seg = pgfem::quadrature::segment_rule(5);
    let mut c_u = vec![0.0; 3]; // coefficient of u in the q-rows
    let mut rhs_q = vec![0.0; 3]; // from uhat
    let mut row_u_q = vec![0.0; 3]; // (v, q.n) in the u-row
    for f in 0..3 {
        let facet = &mesh.facets[f];
        let [a, b] = facet.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        for (&s, &w) in seg.points.iter().zip(&seg.weights) {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let bary = mesh.barycentric(0, x);
            let (vals, _) = rt.eval(bary);
            for i in 0..3 {
                let rin = vals[i][0] * facet.normal[0] + vals[i][1] * facet.normal[1];
                c_u[i] -= w * facet.length * rin;
                rhs_q[i] -= w * facet.length * 0.5 * rin;
                row_u_q[i] += w * facet.length * rin;
            }
        }
    }
    let area = geom.area;
    let f_load = -3.0 * area;
    let map = &problem.constraint;
    // Newton on (q, u, delta)
    let mut z = [0.0f64; 5];
    for _ in 0..60 {
        let psi = alpha * z[4];
        let x0 = geom.point([1.0 / 3.0; 3]);
        let o = map.grad_dual(psi, x0);
        let od = map.grad_dual_derivative(psi, x0);
        let mut r = [0.0f64; 5];
        for i in 0..3 {
            r[i] = -rhs_q[i] + c_u[i] * z[3];
            for j in 0..3 {
                r[i] += mq[(i, j)] * z[j];
            }
        }
        for j in 0..3 {
            r[3] += row_u_q[j] * z[j];
        }
        r[3] += area * z[4] - f_load;
        r[4] = area * z[3] - area * o;
        let mut jac = DMat::zeros(5, 5);
        for i in 0..3 {
            for j in 0..3 {
                jac[(i, j)] = mq[(i, j)];
            }
            jac[(i, 3)] = c_u[i];
            jac[(3, i)] = row_u_q[i];
        }
        jac[(3, 4)] = area;
        jac[(4, 3)] = area;
        jac[(4, 4)] = -alpha * area * od;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dz = jac.solve(&neg).unwrap();
        for (zi, di) in z.iter_mut().zip(&dz) {
            *zi += di;
        }
        if dz.iter().map(|d| d.abs()).fold(0.0, f64::max) < 1e-14 {
            break;
        }
    }
    for i in 0..3 {
        assert!(
            (solver.flux()[i] - z[i]).abs() < 1e-11,
            "flux dof {i}: {} vs {}",
            solver.flux()[i],
            z[i]
        );
    }
    assert!((solver.primal()[0] - z[3]).abs() < 1e-11);
    assert!((solver.psi[0] - alpha * z[4]).abs() < 1e-11);
}

#[test]
fn condensed_and_monolithic_paths_agree() {
    let mesh = unit_square_mesh(2);
    let mk = |mesh: SimplicialMesh| VIProblem {
        name: "cmp".into(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [1.0, 0.5]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| -4.0),
        skew: None,
        dirichlet: vec![
            ("left".into(), Box::new(|_| 0.0)),
            ("right".into(), Box::new(|_| 0.0)),
            ("bottom".into(), Box::new(|_| 0.0)),
            ("top".into(), Box::new(|_| 0.0)),
        ],
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(|_| -0.05)),
        locus: ConstraintLocus::Volume,
        exact: None,
    };
    let p1 = mk(mesh.clone());
    let p2 = mk(mesh);
    for (p, q) in [(1usize, 0usize), (1, 1), (0, 0)] {
        let base = FospgConfig { p, q, stop_tol: 1e-10, ..FospgConfig::default() };
        let mut cond = FospgSolver::new(&p1, FospgConfig { condensed: true, ..base.clone() }).unwrap();
        let mut mono =
            FospgSolver::new(&p2, FospgConfig { condensed: false, ..base.clone() }).unwrap();
        let rc = cond.run().unwrap();
        let rm = mono.run().unwrap();
        assert_eq!(rc.prox_iters(), rm.prox_iters(), "p={p} q={q}");
        let dmax = cond
            .multiplier()
            .iter()
            .zip(mono.multiplier())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dmax < 1e-10, "p={p} q={q}: facet solutions differ by {dmax}");
        let umax = cond
            .primal()
            .iter()
            .zip(mono.primal())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(umax < 1e-9, "p={p} q={q}: primal differs by {umax}");
    }
}

#[test]
fn conforming_pg_matches_active_set_qp_oracle() {
    // symmetric case (beta = 0) on the 2x2-cell mesh
    let mesh = unit_square_mesh(2);
    let phi = -0.05;
    let problem = VIProblem {
        name: "qp_sym".into(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [0.0, 0.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| -8.0),
        skew: None,
        dirichlet: vec![
            ("left".into(), Box::new(|_| 0.0)),
            ("right".into(), Box::new(|_| 0.0)),
            ("bottom".into(), Box::new(|_| 0.0)),
            ("top".into(), Box::new(|_| 0.0)),
        ],
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(move |_| phi)),
        locus: ConstraintLocus::Volume,
        exact: None,
    };
    let config = PgConfig { stop_tol: 1e-13, max_prox_iters: 70, ..PgConfig::default() };
    let run = pg::run(&problem, PairKind::P1BubbleP0, config).unwrap();

    let mesh = &problem.mesh;
    let mut v_space = DiscreteSpace::new(mesh, SpaceKind::P1Bubble);
    for tag in ["left", "right", "bottom", "top"] {
        v_space.constrain_dirichlet(mesh, tag, &|_| 0.0);
    }
    let w_space = DiscreteSpace::new(mesh, SpaceKind::DgP0);
    let coeffs = Coefficients {
        kappa: &|_| [[1.0, 0.0], [0.0, 1.0]],
        beta: &|_| [0.0, 0.0],
        reaction: &|_| 0.0,
        skew: None,
    };
    let a = assemble_operator(mesh, &v_space, &coeffs, 4).unwrap().to_dense();
    let b = assemble_mass(mesh, &v_space, &w_space, None, Region::Volume)
        .unwrap()
        .to_dense();
    let f = assemble_load(mesh, &v_space, &|_| -8.0, 4);
    let c: Vec<f64> = (0..mesh.n_cells()).map(|t| phi * mesh.cell_area(t)).collect();
    let mut free: Vec<usize> = common::interior_vertices(mesh);
    free.extend(mesh.n_vertices()..mesh.n_vertices() + mesh.n_cells());
    let oracle = common::qp_oracle(&a, &b, &f, &c, &free);

    let mut linf: f64 = 0.0;
    for (i, &dof) in free.iter().enumerate() {
        linf = linf.max((run.u[dof] - oracle[i]).abs());
    }
    assert!(linf <= 1e-7, "PG vs QP oracle: {linf}");
    // the constraint is genuinely active somewhere for this data
    let lambda = run.lambda_last().unwrap();
    assert!(lambda.iter().any(|&l| l > 1e-3), "test problem should have an active set");
}

#[test]
fn conforming_pg_matches_fixed_point_oracle_nonsymmetric() {
    let mesh = unit_square_mesh(2);
    let phi = -0.05;
    let problem = VIProblem {
        name: "qp_nonsym".into(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [1.0, 1.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| -8.0),
        skew: None,
        dirichlet: vec![
            ("left".into(), Box::new(|_| 0.0)),
            ("right".into(), Box::new(|_| 0.0)),
            ("bottom".into(), Box::new(|_| 0.0)),
            ("top".into(), Box::new(|_| 0.0)),
        ],
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(move |_| phi)),
        locus: ConstraintLocus::Volume,
        exact: None,
    };
    let config = PgConfig { stop_tol: 1e-13, max_prox_iters: 70, ..PgConfig::default() };
    let run = pg::run(&problem, PairKind::P1BubbleP0, config).unwrap();

    let mesh = &problem.mesh;
    let mut v_space = DiscreteSpace::new(mesh, SpaceKind::P1Bubble);
    for tag in ["left", "right", "bottom", "top"] {
        v_space.constrain_dirichlet(mesh, tag, &|_| 0.0);
    }
    let w_space = DiscreteSpace::new(mesh, SpaceKind::DgP0);
    let beta = |_: pgfem::Point| [1.0, 1.0];
    let coeffs = Coefficients {
        kappa: &|_| [[1.0, 0.0], [0.0, 1.0]],
        beta: &beta,
        reaction: &|_| 0.0,
        skew: None,
    };
    let a_full = assemble_operator(mesh, &v_space, &coeffs, 4).unwrap().to_dense();
    // symmetric/skew split
    let n = a_full.nrows;
    let mut a0 = DMat::zeros(n, n);
    let mut an = DMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a0[(i, j)] = 0.5 * (a_full[(i, j)] + a_full[(j, i)]);
            an[(i, j)] = 0.5 * (a_full[(i, j)] - a_full[(j, i)]);
        }
    }
    let b = assemble_mass(mesh, &v_space, &w_space, None, Region::Volume)
        .unwrap()
        .to_dense();
    let f = assemble_load(mesh, &v_space, &|_| -8.0, 4);
    let c: Vec<f64> = (0..mesh.n_cells()).map(|t| phi * mesh.cell_area(t)).collect();
    let mut free: Vec<usize> = common::interior_vertices(mesh);
    free.extend(mesh.n_vertices()..mesh.n_vertices() + mesh.n_cells());

    // fixed point: solve the symmetric QP with the skew part explicit
    let mut u = vec![0.0; n];
    for _ in 0..400 {
        let mut f_eff = f.clone();
        for i in 0..n {
            for j in 0..n {
                f_eff[i] -= an[(i, j)] * u[j];
            }
        }
        let sol = common::qp_oracle(&a0, &b, &f_eff, &c, &free);
        let mut u_next = vec![0.0; n];
        for (i, &dof) in free.iter().enumerate() {
            u_next[dof] = sol[i];
        }
        let diff: f64 =
            u.iter().zip(&u_next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        u = u_next;
        if diff < 1e-13 {
            break;
        }
    }
    let mut linf: f64 = 0.0;
    for &dof in &free {
        linf = linf.max((run.u[dof] - u[dof]).abs());
    }
    assert!(linf <= 1e-6, "PG vs fixed-point oracle: {linf}");
}

/// Saddle residual after convergence: plugging the final iterate into the
/// step equations gives residual norms below the Newton tolerance.
#[test]
fn converged_step_satisfies_saddle_equations() {
    let mesh = unit_square_mesh(3);
    let problem = VIProblem {
        name: "saddle".into(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [1.0, 1.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| -6.0),
        skew: None,
        dirichlet: vec![
            ("left".into(), Box::new(|_| 0.0)),
            ("right".into(), Box::new(|_| 0.0)),
            ("bottom".into(), Box::new(|_| 0.0)),
            ("top".into(), Box::new(|_| 0.0)),
        ],
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(|_| -0.02)),
        locus: ConstraintLocus::Volume,
        exact: None,
    };
    let config = PgConfig { newton_tol: 1e-11, ..PgConfig::default() };
    let run = pg::run(&problem, PairKind::P1P1, config).unwrap();
    assert!(run.converged);
    // residual of the first equation at the final state, with the dual:
    // A u - F - (lambda, v) = 0
    let mesh = &problem.mesh;
    let mut v_space = DiscreteSpace::new(mesh, SpaceKind::P1);
    for tag in ["left", "right", "bottom", "top"] {
        v_space.constrain_dirichlet(mesh, tag, &|_| 0.0);
    }
    let mut w_space = DiscreteSpace::new(mesh, SpaceKind::P1);
    for tag in ["left", "right", "bottom", "top"] {
        w_space.constrain_dirichlet(mesh, tag, &|_| 0.0);
    }
    let beta = |_: pgfem::Point| [1.0, 1.0];
    let coeffs = Coefficients {
        kappa: &|_| [[1.0, 0.0], [0.0, 1.0]],
        beta: &beta,
        reaction: &|_| 0.0,
        skew: None,
    };
    let a = assemble_operator(mesh, &v_space, &coeffs, 4).unwrap();
    let b = assemble_mass(mesh, &v_space, &w_space, None, Region::Volume).unwrap();
    let f = assemble_load(mesh, &v_space, &|_| -6.0, 4);
    let lambda = run.lambda_last().unwrap();
    let mut r = vec![0.0; v_space.ndofs];
    a.add_mul_vec(1.0, &run.u, &mut r);
    b.add_mul_transpose_vec(-1.0, &lambda, &mut r);
    for (i, rv) in r.iter_mut().enumerate() {
        *rv -= f[i];
        if v_space.is_constrained(i) {
            *rv = 0.0;
        }
    }
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(rn <= 1e-10, "saddle residual {rn}");

    // observable feasibility margins stay positive throughout
    for rec in &run.iterations {
        assert!(rec.feas_lower > 0.0);
    }
}

/// Weighted-average bookkeeping: the running sums match a recomputation
/// from the stored history, and the dual telescoping identity holds.
#[test]
fn average_and_dual_identities() {
    let mesh = unit_square_mesh(2);
    let problem = VIProblem {
        name: "avg".into(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [1.0, 1.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| -8.0),
        skew: None,
        dirichlet: vec![
            ("left".into(), Box::new(|_| 0.0)),
            ("right".into(), Box::new(|_| 0.0)),
            ("bottom".into(), Box::new(|_| 0.0)),
            ("top".into(), Box::new(|_| 0.0)),
        ],
        neumann: Vec::new(),
        constraint: LegendreMap::lower(Box::new(|_| -0.05)),
        locus: ConstraintLocus::Volume,
        exact: None,
    };
    let config = PgConfig { keep_history: true, ..PgConfig::default() };
    let run = pg::run(&problem, PairKind::P1BubbleP0, config).unwrap();
    let history = run.history.as_ref().unwrap();
    let mut sum = vec![0.0; run.u.len()];
    let mut sa = 0.0;
    for (alpha, u) in history {
        sa += alpha;
        for (s, &v) in sum.iter_mut().zip(u) {
            *s += alpha * v;
        }
    }
    assert!((sa - run.sum_alpha).abs() < 1e-12 * sa);
    for (s, &avg) in sum.iter().zip(&run.u_avg) {
        assert!((s / sa - avg).abs() < 1e-13);
    }
    // telescoping: lambda_bar * sum_alpha = psi0 - psi_l
    let lb = run.lambda_bar().unwrap();
    for ((l, p0), pl) in lb.iter().zip(&run.psi0).zip(&run.psi) {
        assert!((l * run.sum_alpha - (p0 - pl)).abs() < 1e-13 * (1.0 + pl.abs()));
    }
    // single-step average equals the first dual iterate
    let one = pg::run(
        &problem,
        PairKind::P1BubbleP0,
        PgConfig { max_prox_iters: 1, require_convergence: false, ..PgConfig::default() },
    )
    .unwrap();
    let lb1 = one.lambda_bar().unwrap();
    let ll1 = one.lambda_last().unwrap();
    for (a, b) in lb1.iter().zip(&ll1) {
        assert!((a - b).abs() < 1e-12);
    }
}

/// Conforming iteration counts stay within a +-5 band around their median
/// across uniform refinements.
#[test]
fn conforming_iteration_counts_are_mesh_independent() {
    use pgfem::problems::circular_obstacle_problem;
    let mut counts = Vec::new();
    for n in [8usize, 16, 32] {
        let mesh = SimplicialMesh::structured_rectangle(
            n,
            n,
            Rect::new(-1.0, -1.0, 1.0, 1.0),
            Diagonal::Slash,
        )
        .unwrap();
        let problem = circular_obstacle_problem(mesh);
        let run = pg::run(
            &problem,
            PairKind::P1P1,
            PgConfig { stop_tol: 1e-10, ..PgConfig::default() },
        )
        .unwrap();
        counts.push(run.prox_iters() as i64);
    }
    let mut sorted = counts.clone();
    sorted.sort_unstable();
    let median = sorted[sorted.len() / 2];
    for (i, c) in counts.iter().enumerate() {
        assert!(
            (c - median).abs() <= 5,
            "level {i}: count {c} strays from median {median} (all: {counts:?})"
        );
    }
}

/// Cellwise complementarity at convergence: the constraint gap and the
/// dual proxy cannot both be large.
#[test]
fn fospg_complementarity_at_convergence() {
    use pgfem::problems::circular_obstacle_problem;
    use pgfem::reconstruct::cell_means;
    let mesh = SimplicialMesh::structured_rectangle(
        32,
        32,
        Rect::new(-1.0, -1.0, 1.0, 1.0),
        Diagonal::Slash,
    )
    .unwrap();
    let problem = circular_obstacle_problem(mesh);
    let config = FospgConfig { p: 1, q: 0, stop_tol: 1e-12, ..FospgConfig::default() };
    let mut solver = FospgSolver::new(&problem, config).unwrap();
    solver.run().unwrap();
    let mesh = &problem.mesh;
    let means_u = cell_means(mesh, &solver.u_space, solver.primal());
    let rule = pgfem::quadrature::triangle_rule(4);
    let mut worst: f64 = 0.0;
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        let mut phi_mean = 0.0;
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            phi_mean += w * 2.0 * problem.constraint.lower_bound(geom.point(*bary));
        }
        let gap = means_u[c] - phi_mean;
        let lambda = -solver.last_delta()[c];
        worst = worst.max((gap.min(lambda)).abs().min(gap.abs() * lambda.abs()));
    }
    assert!(worst <= 1e-6, "complementarity product {worst:.2e}");
}
