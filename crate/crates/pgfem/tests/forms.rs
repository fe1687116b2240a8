//! Property tests for the standalone hybrid forms: flux-mass correctness
//! against closed-form integration, upwind nonnegativity, discrete
//! integration by parts, and consistency on exactly representable data.

use pgfem::dense::DMat;
use pgfem::fospg::assemble_fospg_forms;
use pgfem::mesh::{Diagonal, Rect, SimplicialMesh};
use pgfem::quadrature::segment_rule;
use pgfem::space::{CellGeometry, DiscreteSpace, FacetSubset, SpaceKind};

const ID: fn(pgfem::Point) -> [[f64; 2]; 2] = |_| [[1.0, 0.0], [0.0, 1.0]];

fn xorshift(state: &mut u64) -> f64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    (*state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn reference_triangle() -> SimplicialMesh {
    SimplicialMesh::from_parts(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2]],
        &[(0, 1, "b".into()), (1, 2, "h".into()), (2, 0, "l".into())],
        false,
    )
    .unwrap()
    .0
}

/// The flux-mass block of the diffusion form on the reference triangle
/// equals the analytic RT0 mass matrix computed by exact monomial
/// integration of the closed-form dual basis q_i = x - p_i.
#[test]
fn rt0_flux_mass_matches_symbolic_integration() {
    let mesh = reference_triangle();
    let beta = |_: pgfem::Point| [0.0, 0.0];
    let forms = assemble_fospg_forms(&mesh, 0, &ID, &beta, &[]).unwrap();
    let a_d = forms.a_d.to_dense();
    // exact integrals over the reference triangle:
    // int x = int y = 1/6, int x^2 = int y^2 = 1/12, |T| = 1/2
    let (ix2, ix1, one) = (1.0 / 12.0, 1.0 / 6.0, 0.5);
    let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    for i in 0..3 {
        for j in 0..3 {
            let part = |a: f64, c: f64| ix2 - (a + c) * ix1 + a * c * one;
            let want = part(p[i][0], p[j][0]) + part(p[i][1], p[j][1]);
            assert!(
                (a_d[(i, j)] - want).abs() < 1e-13,
                "M[{i}][{j}] = {} vs {}",
                a_d[(i, j)],
                want
            );
        }
    }
}

#[test]
fn zero_velocity_gives_zero_advection_form() {
    let mesh = SimplicialMesh::structured_rectangle(
        3,
        3,
        Rect::new(0.0, 0.0, 1.0, 1.0),
        Diagonal::Slash,
    )
    .unwrap();
    let beta = |_: pgfem::Point| [0.0, 0.0];
    let forms = assemble_fospg_forms(&mesh, 1, &ID, &beta, &[]).unwrap();
    assert!(forms.a_c.triplets().iter().all(|&(_, _, v)| v == 0.0));
}

/// Quadratic form of the upwinded advection on 100 random discrete pairs.
#[test]
fn advection_form_is_nonnegative_on_diagonal() {
    let mesh = SimplicialMesh::structured_rectangle(
        4,
        4,
        Rect::new(-1.0, -1.0, 1.0, 1.0),
        Diagonal::Slash,
    )
    .unwrap();
    let beta = |p: pgfem::Point| [1.0 + 0.3 * p[1], 0.5 - 0.3 * p[0]];
    // this beta is divergence-free: d/dx(1 + 0.3 y) + d/dy(0.5 - 0.3 x) = 0
    let forms = assemble_fospg_forms(&mesh, 1, &ID, &beta, &[]).unwrap();
    let n = forms.n_flux + forms.n_primal + forms.n_multiplier;
    let mut state = 24601u64;
    for _ in 0..100 {
        let mut x = vec![0.0; n];
        for v in x.iter_mut().skip(forms.n_flux) {
            *v = xorshift(&mut state);
        }
        let q = forms.a_c.quadratic_form(&x);
        assert!(q >= -1e-12, "A_C diagonal form = {q}");
    }
}

/// Discrete integration by parts: for constant (u, uhat) and a continuous
/// test pair, the advection form reduces to the volume term plus the
/// boundary flux (interior multiplier pairings cancel).
#[test]
fn upwind_consistency_for_constants() {
    let mesh = SimplicialMesh::structured_rectangle(
        3,
        4,
        Rect::new(0.0, 0.0, 1.0, 1.0),
        Diagonal::Backslash,
    )
    .unwrap();
    let beta = |p: pgfem::Point| [0.7 - 0.2 * p[1], 0.4 + 0.2 * p[0]];
    let neumann = ["right"];
    let forms = assemble_fospg_forms(&mesh, 1, &ID, &beta, &neumann).unwrap();
    let n = forms.n_flux + forms.n_primal + forms.n_multiplier;

    let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
    let m_space = DiscreteSpace::facet(&mesh, 1, FacetSubset::All).unwrap();

    // trial: u = uhat = c (constant)
    let c = 1.37;
    let mut x = vec![0.0; n];
    for d in 0..forms.n_primal {
        x[forms.n_flux + d] = c;
    }
    for d in 0..forms.n_multiplier {
        x[forms.n_flux + forms.n_primal + d] = c;
    }
    let ax = forms.a_c.matvec(&x);

    // test: continuous P1 v with vhat = trace of v
    let v_nodal: Vec<f64> = mesh.vertices.iter().map(|p| 0.3 + p[0] - 2.0 * p[1] + p[0] * p[1]).collect();
    let mut y = vec![0.0; n];
    let mut dofs = Vec::new();
    for cell in 0..mesh.n_cells() {
        u_space.cell_dofs(&mesh, cell, &mut dofs);
        for (l, &d) in dofs.iter().enumerate() {
            y[forms.n_flux + d] = v_nodal[mesh.cells[cell][l]];
        }
    }
    for f in 0..mesh.n_facets() {
        let md = m_space.facet_dofs(f);
        let [a, b] = mesh.facets[f].vertices;
        y[forms.n_flux + forms.n_primal + md[0]] = v_nodal[a];
        y[forms.n_flux + forms.n_primal + md[1]] = v_nodal[b];
    }
    let discrete: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();

    // independent quadrature of -(beta c, grad v) + boundary flux with the
    // multiplier pairing removed everywhere except the Neumann part
    let tri = pgfem::quadrature::triangle_rule(4);
    let mut direct = 0.0;
    for cell in 0..mesh.n_cells() {
        let geom = CellGeometry::new(&mesh, cell);
        for (bary, &w) in tri.points.iter().zip(&tri.weights) {
            let xq = geom.point(*bary);
            let b = beta(xq);
            // gradient of the P1 interpolant of v on this cell
            let mut g = [0.0, 0.0];
            for (l, &vtx) in mesh.cells[cell].iter().enumerate() {
                g[0] += v_nodal[vtx] * geom.grad_lambda[l][0];
                g[1] += v_nodal[vtx] * geom.grad_lambda[l][1];
            }
            direct -= w * 2.0 * geom.area * c * (b[0] * g[0] + b[1] * g[1]);
        }
    }
    let seg = segment_rule(5);
    for f in 0..mesh.n_facets() {
        let facet = &mesh.facets[f];
        if !facet.is_boundary() {
            continue;
        }
        let [a, b] = facet.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let neumann_facet = mesh.tag_name(f) == Some("right");
        for (&s, &w) in seg.points.iter().zip(&seg.weights) {
            let xq = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let bt = beta(xq);
            let bn = bt[0] * facet.normal[0] + bt[1] * facet.normal[1];
            let v = v_nodal[a] * (1.0 - s) + v_nodal[b] * s;
            // (bn c, v) stays; the multiplier pairing -(bn c, vhat) remains
            // only on Neumann facets
            direct += w * facet.length * bn * c * v;
            if !neumann_facet {
                direct -= w * facet.length * bn * c * v;
            }
        }
    }
    assert!(
        (discrete - direct).abs() < 1e-12 * (1.0 + direct.abs()),
        "discrete {discrete} vs direct {direct}"
    );
}

/// Consistency on exactly representable data: with u globally linear,
/// q = -grad u, uhat the trace, the flux and multiplier residual rows
/// vanish and the primal rows equal the strong-form advection integral.
#[test]
fn hybrid_forms_are_consistent_for_linear_solutions() {
    let mesh = SimplicialMesh::structured_rectangle(
        3,
        3,
        Rect::new(0.0, 0.0, 1.0, 1.0),
        Diagonal::Slash,
    )
    .unwrap();
    let beta = |_: pgfem::Point| [0.8, -0.45];
    let forms = assemble_fospg_forms(&mesh, 1, &ID, &beta, &[]).unwrap();
    let n = forms.n_flux + forms.n_primal + forms.n_multiplier;
    let u_exact = |p: pgfem::Point| 2.0 * p[0] - 3.0 * p[1] + 0.5;
    let grad = [2.0, -3.0];
    let flux = [-grad[0], -grad[1]];

    let u_space = DiscreteSpace::new(&mesh, SpaceKind::DgP1);
    let m_space = DiscreteSpace::facet(&mesh, 1, FacetSubset::All).unwrap();
    let mut x = vec![0.0; n];
    let mut dofs = Vec::new();
    for cell in 0..mesh.n_cells() {
        // RT1 coefficients of the constant flux via the dual dofs
        let geom = CellGeometry::new(&mesh, cell);
        let coeffs = rt1_dofs_of_constant(&geom, flux);
        for (i, v) in coeffs.iter().enumerate() {
            x[8 * cell + i] = *v;
        }
        u_space.cell_dofs(&mesh, cell, &mut dofs);
        for (l, &d) in dofs.iter().enumerate() {
            x[forms.n_flux + d] = u_exact(mesh.vertices[mesh.cells[cell][l]]);
        }
    }
    for f in 0..mesh.n_facets() {
        let md = m_space.facet_dofs(f);
        let [a, b] = mesh.facets[f].vertices;
        x[forms.n_flux + forms.n_primal + md[0]] = u_exact(mesh.vertices[a]);
        x[forms.n_flux + forms.n_primal + md[1]] = u_exact(mesh.vertices[b]);
    }
    let mut r = forms.a_d.matvec(&x);
    forms.a_c.add_mul_vec(1.0, &x, &mut r);

    // flux test rows vanish
    for i in 0..forms.n_flux {
        assert!(r[i].abs() < 1e-10, "flux row {i}: {}", r[i]);
    }
    // interior multiplier rows vanish (boundary rows see the domain flux)
    for f in 0..mesh.n_facets() {
        if mesh.facets[f].is_boundary() {
            continue;
        }
        for d in m_space.facet_dofs(f) {
            let i = forms.n_flux + forms.n_primal + d;
            assert!(r[i].abs() < 1e-10, "multiplier row {i}: {}", r[i]);
        }
    }
    // primal rows match (beta . grad u, v) by direct quadrature
    let tri = pgfem::quadrature::triangle_rule(4);
    for cell in 0..mesh.n_cells() {
        let geom = CellGeometry::new(&mesh, cell);
        u_space.cell_dofs(&mesh, cell, &mut dofs);
        for (l, &d) in dofs.iter().enumerate() {
            let mut want = 0.0;
            for (bary, &w) in tri.points.iter().zip(&tri.weights) {
                let xq = geom.point(*bary);
                let b = beta(xq);
                let basis = pgfem::space::scalar_basis(SpaceKind::DgP1, &geom, *bary);
                want += w * 2.0 * geom.area * (b[0] * grad[0] + b[1] * grad[1]) * basis.values[l];
            }
            assert!(
                (r[forms.n_flux + d] - want).abs() < 1e-10,
                "primal row cell {cell} local {l}: {} vs {}",
                r[forms.n_flux + d],
                want
            );
        }
    }
}

/// Reference dofs of a constant field pulled back through the Piola map.
fn rt1_dofs_of_constant(geom: &CellGeometry, c: [f64; 2]) -> Vec<f64> {
    let inv = [
        [geom.jac[1][1] / geom.det, -geom.jac[0][1] / geom.det],
        [-geom.jac[1][0] / geom.det, geom.jac[0][0] / geom.det],
    ];
    let qref = [
        geom.det * (inv[0][0] * c[0] + inv[0][1] * c[1]),
        geom.det * (inv[1][0] * c[0] + inv[1][1] * c[1]),
    ];
    let rv: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let edges = [(1usize, 2usize), (2, 0), (0, 1)];
    let mut dofs = Vec::new();
    for &(a, b) in &edges {
        let (pa, pb) = (rv[a], rv[b]);
        let dx = pb[0] - pa[0];
        let dy = pb[1] - pa[1];
        let len = dx.hypot(dy);
        let nrm = [dy / len, -dx / len];
        dofs.push((qref[0] * nrm[0] + qref[1] * nrm[1]) * len);
        dofs.push(0.0);
    }
    dofs.push(qref[0] * 0.5);
    dofs.push(qref[1] * 0.5);
    dofs
}

/// RT1 flux mass blocks are symmetric positive definite per cell.
#[test]
fn rt1_flux_mass_blocks_are_spd() {
    let mesh = SimplicialMesh::structured_rectangle(
        2,
        2,
        Rect::new(0.0, 0.0, 1.0, 2.0),
        Diagonal::Backslash,
    )
    .unwrap();
    let beta = |_: pgfem::Point| [0.0, 0.0];
    let forms = assemble_fospg_forms(&mesh, 1, &ID, &beta, &[]).unwrap();
    let dense = forms.a_d.to_dense();
    let mut state = 31u64;
    for cell in 0..mesh.n_cells() {
        let mut block = DMat::zeros(8, 8);
        for i in 0..8 {
            for j in 0..8 {
                block[(i, j)] = dense[(8 * cell + i, 8 * cell + j)];
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                assert!((block[(i, j)] - block[(j, i)]).abs() < 1e-13);
            }
        }
        for _ in 0..20 {
            let v: Vec<f64> = (0..8).map(|_| xorshift(&mut state)).collect();
            let q = block.matvec(&v).iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert!(q > 1e-12 * norm, "cell {cell}: not positive definite");
        }
    }
}

/// The B form links the flux rows of A_D: A_D((q,u,uhat),(r,0,0)) =
/// (kappa^{-1} q, r) + B(r, (u, uhat)).
#[test]
fn divergence_coupling_matches_b_form() {
    let mesh = SimplicialMesh::structured_rectangle(
        2,
        3,
        Rect::new(0.0, 0.0, 2.0, 1.0),
        Diagonal::Slash,
    )
    .unwrap();
    let beta = |_: pgfem::Point| [0.0, 0.0];
    let forms = assemble_fospg_forms(&mesh, 1, &ID, &beta, &[]).unwrap();
    let mut state = 99u64;
    let n = forms.n_flux + forms.n_primal + forms.n_multiplier;
    for _ in 0..10 {
        let x: Vec<f64> = (0..n).map(|_| xorshift(&mut state)).collect();
        let ax = forms.a_d.matvec(&x);
        // B acts on [u | uhat]
        let uv: Vec<f64> = x[forms.n_flux..].to_vec();
        let bx = forms.b.matvec(&uv);
        // subtract the flux-mass part
        let mut qpart = vec![0.0; forms.n_flux];
        for &(i, j, v) in forms.a_d.triplets() {
            if i < forms.n_flux && j < forms.n_flux {
                qpart[i] += v * x[j];
            }
        }
        for i in 0..forms.n_flux {
            assert!((ax[i] - qpart[i] - bx[i]).abs() < 1e-11);
        }
    }
}
