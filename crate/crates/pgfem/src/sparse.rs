//! Sparse systems, direct solves, and static condensation.
//!
//! Assembly accumulates triplets; duplicate entries sum. Solves go through
//! a sparse LU with fill-reducing ordering and are verified against the
//! residual contract `‖b − Ax‖ ≤ 1e−10·(1 + ‖b‖)`; a violation is reported
//! as a singular system together with the worst-residual row.

use crate::dense::DMat;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("system is not square ({nrows} x {ncols})")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("rhs length {len} does not match system dimension {dim}")]
    RhsMismatch { len: usize, dim: usize },
    #[error("structurally singular system: row/column {index} is empty")]
    StructurallySingular { index: usize },
    #[error("singular system: residual {residual:.3e} exceeds tolerance, worst row {row}")]
    Singular { row: usize, residual: f64 },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("interior dofs of distinct cells are coupled (dofs {a} and {b}); static condensation requires a cell-block-diagonal interior")]
    NotBlockDiagonal { a: usize, b: usize },
}

/// Triplet-backed sparse matrix with a symmetry hint.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub nrows: usize,
    pub ncols: usize,
    triplets: Vec<(usize, usize, f64)>,
    pub symmetric: bool,
}

impl SparseSystem {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, triplets: Vec::new(), symmetric: false }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            self.triplets.push((i, j, v));
        }
    }

    /// Adds an entry even when its value is zero, keeping the sparsity
    /// pattern stable across reassemblies (needed for factorization reuse).
    pub fn add_structural(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.triplets.push((i, j, v));
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn extend(&mut self, other: &SparseSystem) {
        self.triplets.extend_from_slice(&other.triplets);
    }

    /// y += s * A x
    pub fn add_mul_vec(&self, s: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for &(i, j, v) in &self.triplets {
            y[i] += s * v * x[j];
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.add_mul_vec(1.0, x, &mut y);
        y
    }

    /// y += s * Aᵀ x
    pub fn add_mul_transpose_vec(&self, s: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for &(i, j, v) in &self.triplets {
            y[j] += s * v * x[i];
        }
    }

    /// Dense copy (test oracles and tiny systems only).
    pub fn to_dense(&self) -> DMat {
        let mut m = DMat::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.triplets {
            m[(i, j)] += v;
        }
        m
    }

    /// Quadratic form xᵀ A x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.triplets {
            acc += x[i] * v * x[j];
        }
        acc
    }

    /// Replaces each `dof` row by the identity and zeroes its column.
    ///
    /// Meant for increment systems where the constrained entries of the
    /// solution are exactly zero, so no right-hand-side transfer is needed.
    pub fn constrain_rows_cols(&mut self, dofs: &dyn Fn(usize) -> bool) {
        self.triplets.retain(|&(i, j, _)| !dofs(i) && !dofs(j));
        for i in 0..self.nrows.min(self.ncols) {
            if dofs(i) {
                self.triplets.push((i, i, 1.0));
            }
        }
        self.symmetric = false;
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>, SolveError> {
        let entries: Vec<Triplet<usize, usize, f64>> =
            self.triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &entries)
            .map_err(|e| SolveError::Factorization(format!("{e:?}")))
    }

    /// Direct sparse solve with residual verification.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
        self.solve_with_cache(rhs, &mut LuCache::default())
    }

    /// Direct solve reusing a cached symbolic factorization when the
    /// sparsity pattern matches the cached one.
    pub fn solve_with_cache(&self, rhs: &[f64], cache: &mut LuCache) -> Result<Vec<f64>, SolveError> {
        if self.nrows != self.ncols {
            return Err(SolveError::NotSquare { nrows: self.nrows, ncols: self.ncols });
        }
        if rhs.len() != self.nrows {
            return Err(SolveError::RhsMismatch { len: rhs.len(), dim: self.nrows });
        }
        let n = self.nrows;
        let mut row_used = vec![false; n];
        let mut col_used = vec![false; n];
        let mut hash: u64 = 0xcbf29ce484222325;
        for &(i, j, _) in &self.triplets {
            row_used[i] = true;
            col_used[j] = true;
            hash = (hash ^ (i as u64).wrapping_mul(0x100000001b3) ^ (j as u64))
                .wrapping_mul(0x100000001b3);
        }
        if let Some(i) = (0..n).find(|&i| !row_used[i] || !col_used[i]) {
            return Err(SolveError::StructurallySingular { index: i });
        }

        let mat = self.to_faer()?;
        let fingerprint = (n, self.triplets.len(), hash);
        if cache.symbolic.is_none() || cache.fingerprint != fingerprint {
            cache.symbolic = Some(
                SymbolicLu::try_new(mat.symbolic())
                    .map_err(|e| SolveError::Factorization(format!("{e:?}")))?,
            );
            cache.fingerprint = fingerprint;
        }
        let lu = Lu::try_new_with_symbolic(cache.symbolic.clone().unwrap(), mat.as_ref())
            .map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
        let mut b = faer::Mat::<f64>::zeros(n, 1);
        for (i, &v) in rhs.iter().enumerate() {
            b[(i, 0)] = v;
        }
        let x = lu.solve(&b);
        let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();

        let mut residual = rhs.to_vec();
        self.add_mul_vec(-1.0, &x, &mut residual);
        let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let res_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !res_norm.is_finite() || res_norm > 1e-10 * (1.0 + rhs_norm) {
            let row = residual
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap_or(std::cmp::Ordering::Equal))
                .map(|(i, _)| i)
                .unwrap_or(0);
            return Err(SolveError::Singular { row, residual: res_norm });
        }
        Ok(x)
    }
}

/// Reusable symbolic LU analysis keyed by the sparsity pattern.
#[derive(Default)]
pub struct LuCache {
    symbolic: Option<SymbolicLu<usize>>,
    fingerprint: (usize, usize, u64),
}

/// A completed numeric factorization, reusable for repeated solves.
pub struct Factorized {
    lu: Lu<usize, f64>,
    n: usize,
}

impl Factorized {
    /// Triangular solves with the stored factors (no residual check; callers
    /// iterate on the nonlinear residual themselves).
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let mut b = faer::Mat::<f64>::zeros(self.n, 1);
        for (i, &v) in rhs.iter().enumerate() {
            b[(i, 0)] = v;
        }
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

impl SparseSystem {
    /// Numeric factorization with symbolic reuse.
    pub fn factorize_with_cache(&self, cache: &mut LuCache) -> Result<Factorized, SolveError> {
        if self.nrows != self.ncols {
            return Err(SolveError::NotSquare { nrows: self.nrows, ncols: self.ncols });
        }
        let n = self.nrows;
        let mut row_used = vec![false; n];
        let mut col_used = vec![false; n];
        let mut hash: u64 = 0xcbf29ce484222325;
        for &(i, j, _) in &self.triplets {
            row_used[i] = true;
            col_used[j] = true;
            hash = (hash ^ (i as u64).wrapping_mul(0x100000001b3) ^ (j as u64))
                .wrapping_mul(0x100000001b3);
        }
        if let Some(i) = (0..n).find(|&i| !row_used[i] || !col_used[i]) {
            return Err(SolveError::StructurallySingular { index: i });
        }
        let mat = self.to_faer()?;
        let fingerprint = (n, self.triplets.len(), hash);
        if cache.symbolic.is_none() || cache.fingerprint != fingerprint {
            cache.symbolic = Some(
                SymbolicLu::try_new(mat.symbolic())
                    .map_err(|e| SolveError::Factorization(format!("{e:?}")))?,
            );
            cache.fingerprint = fingerprint;
        }
        let lu = Lu::try_new_with_symbolic(cache.symbolic.clone().unwrap(), mat.as_ref())
            .map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
        Ok(Factorized { lu, n })
    }
}

/// Recovers eliminated interior unknowns from a condensed facet solution.
pub struct RecoveryMap {
    n_total: usize,
    facet_dofs: Vec<usize>,
    /// Per cell: (interior dofs, local facet dofs, W = Aii⁻¹ Aif, y = Aii⁻¹ bi)
    cells: Vec<(Vec<usize>, Vec<usize>, DMat, Vec<f64>)>,
}

impl RecoveryMap {
    /// Expands a facet solution to the full dof vector.
    pub fn recover(&self, facet_solution: &[f64]) -> Vec<f64> {
        assert_eq!(facet_solution.len(), self.facet_dofs.len());
        let mut full = vec![0.0; self.n_total];
        for (k, &g) in self.facet_dofs.iter().enumerate() {
            full[g] = facet_solution[k];
        }
        for (interior, local_facets, w, y) in &self.cells {
            for (r, &gi) in interior.iter().enumerate() {
                let mut v = y[r];
                for (c, &fj) in local_facets.iter().enumerate() {
                    v -= w[(r, c)] * facet_solution[fj];
                }
                full[gi] = v;
            }
        }
        full
    }

    pub fn facet_dofs(&self) -> &[usize] {
        &self.facet_dofs
    }
}

/// Cellwise elimination of interior dofs (Schur complement onto the rest).
///
/// `cell_interior[c]` lists the global dofs private to cell `c`; every other
/// dof is kept. Fails if two cells' interior dofs are directly coupled.
pub fn static_condense(
    system: &SparseSystem,
    rhs: &[f64],
    cell_interior: &[Vec<usize>],
) -> Result<(SparseSystem, Vec<f64>, RecoveryMap), SolveError> {
    let n = system.nrows;
    assert_eq!(system.ncols, n);
    assert_eq!(rhs.len(), n);

    const KEEP: usize = usize::MAX;
    // owner[d] = cell owning interior dof d, local index within the cell
    let mut owner = vec![(KEEP, 0usize); n];
    for (c, dofs) in cell_interior.iter().enumerate() {
        for (l, &d) in dofs.iter().enumerate() {
            owner[d] = (c, l);
        }
    }
    let facet_dofs: Vec<usize> = (0..n).filter(|&d| owner[d].0 == KEEP).collect();
    let mut facet_index = vec![KEEP; n];
    for (k, &d) in facet_dofs.iter().enumerate() {
        facet_index[d] = k;
    }
    let nf = facet_dofs.len();

    // split triplets into per-cell blocks and the facet-facet remainder
    let nc = cell_interior.len();
    let mut aii: Vec<DMat> = cell_interior.iter().map(|d| DMat::zeros(d.len(), d.len())).collect();
    // per cell: map global facet index -> local column, built lazily
    let mut aif: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nc]; // (local row, facet idx, v)
    let mut afi: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nc]; // (facet idx, local col, v)
    let mut condensed = SparseSystem::new(nf, nf);
    for &(i, j, v) in system.triplets() {
        match (owner[i], owner[j]) {
            ((KEEP, _), (KEEP, _)) => condensed.add(facet_index[i], facet_index[j], v),
            ((c, li), (KEEP, _)) => aif[c].push((li, facet_index[j], v)),
            ((KEEP, _), (c, lj)) => afi[c].push((facet_index[i], lj, v)),
            ((ci, li), (cj, lj)) => {
                if ci != cj {
                    return Err(SolveError::NotBlockDiagonal { a: i, b: j });
                }
                aii[ci][(li, lj)] += v;
            }
        }
    }

    let mut condensed_rhs: Vec<f64> = facet_dofs.iter().map(|&d| rhs[d]).collect();
    let mut recovery_cells = Vec::with_capacity(nc);
    for c in 0..nc {
        let ni = cell_interior[c].len();
        if ni == 0 {
            recovery_cells.push((Vec::new(), Vec::new(), DMat::zeros(0, 0), Vec::new()));
            continue;
        }
        // local facet columns touched by this cell
        let mut local_facets: Vec<usize> = aif[c]
            .iter()
            .map(|&(_, f, _)| f)
            .chain(afi[c].iter().map(|&(f, _, _)| f))
            .collect();
        local_facets.sort_unstable();
        local_facets.dedup();
        let fcol = |f: usize| local_facets.binary_search(&f).unwrap();

        let mut b_if = DMat::zeros(ni, local_facets.len());
        for &(li, f, v) in &aif[c] {
            b_if[(li, fcol(f))] += v;
        }
        let lu = aii[c]
            .lu()
            .map_err(|_| SolveError::Singular { row: cell_interior[c][0], residual: f64::INFINITY })?;
        let w = lu.solve_mat(&b_if); // Aii⁻¹ Aif
        let bi: Vec<f64> = cell_interior[c].iter().map(|&d| rhs[d]).collect();
        let y = lu.solve(&bi); // Aii⁻¹ bi

        // Schur update: S -= Afi W,  b_f -= Afi y
        for &(fi, lj, v) in &afi[c] {
            condensed_rhs[fi] -= v * y[lj];
            for (fc, &fglobal) in local_facets.iter().enumerate() {
                let s = v * w[(lj, fc)];
                if s != 0.0 {
                    condensed.add(fi, fglobal, -s);
                }
            }
        }
        recovery_cells.push((cell_interior[c].clone(), local_facets, w, y));
    }

    let recovery = RecoveryMap { n_total: n, facet_dofs, cells: recovery_cells };
    Ok((condensed, condensed_rhs, recovery))
}
