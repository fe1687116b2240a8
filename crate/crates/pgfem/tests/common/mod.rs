//! Shared oracle helpers for the integration suites.

use pgfem::dense::DMat;
use pgfem::mesh::SimplicialMesh;

/// Interior (non-boundary) vertices of a mesh.
pub fn interior_vertices(mesh: &SimplicialMesh) -> Vec<usize> {
    let mut boundary = vec![false; mesh.n_vertices()];
    for f in &mesh.facets {
        if f.is_boundary() {
            boundary[f.vertices[0]] = true;
            boundary[f.vertices[1]] = true;
        }
    }
    (0..mesh.n_vertices()).filter(|&v| !boundary[v]).collect()
}

/// Brute-force active-set QP oracle for `min 1/2 u'Au - f'u` subject to
/// `Bu >= c` (rows of `B` indexed by cells): enumerates every active
/// subset and returns the unique KKT-consistent solution on the free dofs.
pub fn qp_oracle(a: &DMat, b: &DMat, f: &[f64], c: &[f64], free: &[usize]) -> Vec<f64> {
    let nf = free.len();
    let nc = b.nrows;
    assert!(nc <= 16, "active-set enumeration needs few constraints");
    for mask in 0u32..(1 << nc) {
        let active: Vec<usize> = (0..nc).filter(|t| mask & (1 << t) != 0).collect();
        let na = active.len();
        let mut kkt = DMat::zeros(nf + na, nf + na);
        let mut rhs = vec![0.0; nf + na];
        for (i, &gi) in free.iter().enumerate() {
            for (j, &gj) in free.iter().enumerate() {
                kkt[(i, j)] = a[(gi, gj)];
            }
            rhs[i] = f[gi];
        }
        for (s, &t) in active.iter().enumerate() {
            for (j, &gj) in free.iter().enumerate() {
                kkt[(nf + s, j)] = b[(t, gj)];
                kkt[(j, nf + s)] = -b[(t, gj)];
            }
            rhs[nf + s] = c[t];
        }
        let sol = match kkt.solve(&rhs) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if sol[nf..].iter().any(|&m| m < -1e-10) {
            continue;
        }
        let mut feasible = true;
        for t in 0..nc {
            let mut bu = 0.0;
            for (j, &gj) in free.iter().enumerate() {
                bu += b[(t, gj)] * sol[j];
            }
            if bu < c[t] - 1e-10 {
                feasible = false;
                break;
            }
        }
        if feasible {
            return sol[..nf].to_vec();
        }
    }
    panic!("no KKT-feasible active set found");
}
