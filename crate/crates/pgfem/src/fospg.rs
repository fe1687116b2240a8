//! Hybridized first-order-system proximal Galerkin solver.
//!
//! Unknowns per cell: broken RT flux, broken DG primal field, and (for
//! volume constraints) a broken DG latent field; single-valued facet
//! multipliers glue the cells. Advection is upwinded per facet quadrature
//! point, with the mixed-boundary variant (the multiplier pairing skips
//! Neumann facets). Boundary-constrained problems keep the latent field on
//! the constrained facets instead of the cells.
//!
//! Newton steps solve for the scaled latent update
//! `delta = (psi_k - psi_{k-1}) / alpha_k`, which keeps the linearized
//! systems O(1)-scaled for geometric step-size schedules. Cell-interior
//! unknowns are eliminated by static condensation by default, leaving a
//! global system on the facet unknowns only.

use crate::dense::DMat;
use crate::log::IterationRecord;
use crate::mesh::SimplicialMesh;
use crate::norms::{h1_semi_diff, l2_diff, l2_error, rt_l2_error};
use crate::pg::{StopIterate, StopMetric};
use crate::problems::{ConstraintLocus, VIProblem};
use crate::quadrature::{segment_rule, triangle_rule};
use crate::space::{facet_basis, scalar_basis, CellGeometry, DiscreteSpace, FacetSubset, RtBasis, SpaceKind};
use crate::sparse::{LuCache, SolveError, SparseSystem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FospgError {
    #[error("polynomial degree p = {0} outside {{0, 1}}")]
    UnsupportedP(usize),
    #[error("latent degree q = {q} exceeds primal degree p = {p}")]
    QAboveP { p: usize, q: usize },
    #[error("Newton did not converge at proximal step {k}: residual {residual:.3e} after {newton_iters} iterations")]
    NewtonDiverged { k: usize, residual: f64, newton_iters: usize },
    #[error("proximal iteration limit {max} exceeded (last successive difference {last_diff:.3e})")]
    MaxProxIters { max: usize, last_diff: f64 },
    #[error("boundary-constrained problem needs a tagged constraint part")]
    MissingConstraintTag,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Space(#[from] crate::space::SpaceError),
}

#[derive(Debug, Clone)]
pub struct FospgConfig {
    pub p: usize,
    pub q: usize,
    pub alpha0: f64,
    pub growth: f64,
    pub stop_tol: f64,
    pub stop_metric: StopMetric,
    pub stop_iterate: StopIterate,
    pub max_prox_iters: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub initial_psi: f64,
    /// Eliminate cell-interior unknowns before the global solve.
    pub condensed: bool,
    pub require_convergence: bool,
}

impl Default for FospgConfig {
    fn default() -> Self {
        Self {
            p: 1,
            q: 0,
            alpha0: 1.0,
            growth: 2.0,
            stop_tol: 1e-10,
            stop_metric: StopMetric::L2,
            stop_iterate: StopIterate::Raw,
            max_prox_iters: 80,
            newton_tol: 1e-10,
            max_newton_iters: 50,
            initial_psi: 0.0,
            condensed: true,
            require_convergence: true,
        }
    }
}

/// Log and averages of one proximal loop.
pub struct FospgRun {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub sum_alpha: f64,
    pub q_avg: Vec<f64>,
    pub u_avg: Vec<f64>,
    pub uhat_avg: Vec<f64>,
    /// Cell means of the alpha-weighted observable average (volume, q = 0):
    /// the bound-preserving approximation.
    pub obs_avg_cell: Option<Vec<f64>>,
}

impl FospgRun {
    pub fn prox_iters(&self) -> usize {
        self.iterations.len()
    }
}

struct CellBlock {
    /// Global dofs in local order: q | u | (cell psi) | facet dofs.
    dofs: Vec<usize>,
    n_interior: usize,
    mat: DMat,
    rhs: Vec<f64>,
    rhs_base: Vec<f64>,
    /// Plain (u, v) mass block, kept for transient right-hand sides.
    mass_uu: DMat,
    /// Local dofs with Dirichlet-constrained multipliers.
    fixed: Vec<bool>,
}

/// Frozen Jacobian factorization for the modified Newton loop.
enum Frozen {
    Condensed {
        kept_start: usize,
        /// Per-cell interior LU and `W = A_II^{-1} A_IF`.
        cells: Vec<(crate::dense::DenseLu, DMat)>,
        facet: crate::sparse::Factorized,
    },
    Monolithic(crate::sparse::Factorized),
}

/// Hybrid FOSPG solver: assembled cell blocks plus the iterate state.
///
/// Global layout: `[flux | primal | latent | multiplier]`; during a Newton
/// solve the latent slots carry the scaled update `delta`.
pub struct FospgSolver<'p> {
    problem: &'p VIProblem,
    pub config: FospgConfig,
    pub u_space: DiscreteSpace,
    pub psi_space: DiscreteSpace,
    pub m_space: DiscreteSpace,
    volume_locus: bool,
    oq: usize,
    ou: usize,
    opsi: usize,
    ouhat: usize,
    ntotal: usize,
    nq_per_cell: usize,
    cells: Vec<CellBlock>,
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi0: Vec<f64>,
    last_delta: Vec<f64>,
    vol_degree: usize,
    reaction_shift: f64,
    lu_cache: std::cell::RefCell<LuCache>,
}

impl<'p> FospgSolver<'p> {
    pub fn new(problem: &'p VIProblem, config: FospgConfig) -> Result<Self, FospgError> {
        Self::new_with_shift(problem, config, 0.0)
    }

    /// `reaction_shift` adds `sigma (u, v)` to the primal equation (the
    /// backward Euler mass term); pair with [`Self::set_transient_load`].
    pub fn new_with_shift(
        problem: &'p VIProblem,
        config: FospgConfig,
        reaction_shift: f64,
    ) -> Result<Self, FospgError> {
        if config.p > 1 {
            return Err(FospgError::UnsupportedP(config.p));
        }
        if config.q > config.p {
            return Err(FospgError::QAboveP { p: config.p, q: config.q });
        }
        let mesh = &problem.mesh;
        let u_kind = if config.p == 0 { SpaceKind::DgP0 } else { SpaceKind::DgP1 };
        let u_space = DiscreteSpace::new(mesh, u_kind);
        let volume_locus = problem.locus == ConstraintLocus::Volume;
        let psi_space = match &problem.locus {
            ConstraintLocus::Volume => {
                let k = if config.q == 0 { SpaceKind::DgP0 } else { SpaceKind::DgP1 };
                DiscreteSpace::new(mesh, k)
            }
            ConstraintLocus::BoundaryTag(tag) => {
                DiscreteSpace::facet(mesh, config.q, FacetSubset::Tag(tag.clone()))?
            }
        };
        if !volume_locus && psi_space.ndofs == 0 {
            return Err(FospgError::MissingConstraintTag);
        }
        let mut m_space = DiscreteSpace::facet(mesh, config.p, FacetSubset::All)?;
        for (tag, g) in &problem.dirichlet {
            m_space.constrain_dirichlet(mesh, tag, g);
        }

        let nq_per_cell = if config.p == 0 { 3 } else { 8 };
        let oq = 0;
        let ou = nq_per_cell * mesh.n_cells();
        let opsi = ou + u_space.ndofs;
        let ouhat = opsi + psi_space.ndofs;
        let ntotal = ouhat + m_space.ndofs;

        let mut solver = Self {
            problem,
            config,
            u_space,
            psi_space,
            m_space,
            volume_locus,
            oq,
            ou,
            opsi,
            ouhat,
            ntotal,
            nq_per_cell,
            cells: Vec::new(),
            x: vec![0.0; ntotal],
            psi: Vec::new(),
            psi0: Vec::new(),
            last_delta: Vec::new(),
            vol_degree: if nq_per_cell == 8 { 6 } else { 4 },
            reaction_shift,
            lu_cache: std::cell::RefCell::new(LuCache::default()),
        };
        solver.assemble_cells();
        solver.psi = vec![solver.config.initial_psi; solver.psi_space.ndofs];
        solver.psi0 = solver.psi.clone();
        solver.last_delta = vec![0.0; solver.psi_space.ndofs];
        for (&dof, &val) in &solver.m_space.constrained {
            solver.x[solver.ouhat + dof] = val;
        }
        Ok(solver)
    }

    pub fn n_flux_dofs(&self) -> usize {
        self.ou - self.oq
    }

    pub fn flux(&self) -> &[f64] {
        &self.x[self.oq..self.ou]
    }

    pub fn primal(&self) -> &[f64] {
        &self.x[self.ou..self.opsi]
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.x[self.ouhat..]
    }

    /// Scaled last latent update; the dual iterate is `-delta`.
    pub fn last_delta(&self) -> &[f64] {
        &self.last_delta
    }

    pub fn mesh(&self) -> &SimplicialMesh {
        &self.problem.mesh
    }

    fn is_neumann_facet(&self, facet: usize) -> bool {
        match self.problem.mesh.tag_name(facet) {
            Some(t) => self.problem.neumann.iter().any(|(tag, _)| tag == t),
            None => false,
        }
    }

    fn assemble_cells(&mut self) {
        let mesh = &self.problem.mesh;
        let vol_rule = triangle_rule(self.vol_degree);
        let seg_rule = segment_rule(5);
        let p = self.config.p;
        let nq = self.nq_per_cell;
        let nu = self.u_space.kind.dofs_per_cell();
        let npsi_cell = if self.volume_locus { self.psi_space.kind.dofs_per_cell() } else { 0 };

        let mut u_dofs = Vec::new();
        let mut psi_dofs = Vec::new();
        for c in 0..mesh.n_cells() {
            let geom = CellGeometry::new(mesh, c);
            let rt = RtBasis::new(&geom, p);
            self.u_space.cell_dofs(mesh, c, &mut u_dofs);
            if self.volume_locus {
                self.psi_space.cell_dofs(mesh, c, &mut psi_dofs);
            } else {
                psi_dofs.clear();
            }

            let mut dofs: Vec<usize> = (0..nq).map(|i| self.oq + nq * c + i).collect();
            dofs.extend(u_dofs.iter().map(|&d| self.ou + d));
            dofs.extend(psi_dofs.iter().map(|&d| self.opsi + d));
            let lq = 0;
            let lu = nq;
            let lpsi = nq + nu;
            let mut lhat = [usize::MAX; 3];
            for (fi, &f) in mesh.cell_facets[c].iter().enumerate() {
                lhat[fi] = dofs.len();
                dofs.extend(self.m_space.facet_dofs(f).iter().map(|&d| self.ouhat + d));
            }
            let mut lpsihat = [usize::MAX; 3];
            if !self.volume_locus {
                for (fi, &f) in mesh.cell_facets[c].iter().enumerate() {
                    if self.psi_space.covers_facet(f) {
                        lpsihat[fi] = dofs.len();
                        dofs.extend(self.psi_space.facet_dofs(f).iter().map(|&d| self.opsi + d));
                    }
                }
            }
            let nloc = dofs.len();
            let n_interior = nq + nu + npsi_cell;
            let mut mat = DMat::zeros(nloc, nloc);
            let mut mass_uu = DMat::zeros(nu, nu);
            let mut rhs = vec![0.0; nloc];

            for (bary, &w) in vol_rule.points.iter().zip(&vol_rule.weights) {
                let x = geom.point(*bary);
                let wq = w * 2.0 * geom.area;
                let (qvals, _) = rt.eval(*bary);
                let ub = scalar_basis(self.u_space.kind, &geom, *bary);
                let kappa = (self.problem.kappa)(x);
                let detk = kappa[0][0] * kappa[1][1] - kappa[0][1] * kappa[1][0];
                let kinv = [
                    [kappa[1][1] / detk, -kappa[0][1] / detk],
                    [-kappa[1][0] / detk, kappa[0][0] / detk],
                ];
                let beta = (self.problem.beta)(x);
                let ceff = (self.problem.reaction)(x) + self.reaction_shift;
                let fv = (self.problem.source)(x);

                for i in 0..nq {
                    let ri = qvals[i];
                    for j in 0..nq {
                        let kq = [
                            kinv[0][0] * qvals[j][0] + kinv[0][1] * qvals[j][1],
                            kinv[1][0] * qvals[j][0] + kinv[1][1] * qvals[j][1],
                        ];
                        mat[(lq + i, lq + j)] += wq * (kq[0] * ri[0] + kq[1] * ri[1]);
                    }
                    for j in 0..nu {
                        let g = ub.gradients[j];
                        mat[(lq + i, lu + j)] += wq * (ri[0] * g[0] + ri[1] * g[1]);
                    }
                }
                for i in 0..nu {
                    let gi = ub.gradients[i];
                    let vi = ub.values[i];
                    for j in 0..nq {
                        mat[(lu + i, lq + j)] -= wq * (qvals[j][0] * gi[0] + qvals[j][1] * gi[1]);
                    }
                    for j in 0..nu {
                        let vj = ub.values[j];
                        mat[(lu + i, lu + j)] +=
                            wq * (ceff * vj * vi - vj * (beta[0] * gi[0] + beta[1] * gi[1]));
                        mass_uu[(i, j)] += wq * vj * vi;
                    }
                    rhs[lu + i] += wq * fv * vi;
                }
                if self.volume_locus {
                    let wb = scalar_basis(self.psi_space.kind, &geom, *bary);
                    for i in 0..nu {
                        for j in 0..npsi_cell {
                            mat[(lu + i, lpsi + j)] += wq * wb.values[j] * ub.values[i];
                        }
                    }
                    for i in 0..npsi_cell {
                        for j in 0..nu {
                            mat[(lpsi + i, lu + j)] += wq * ub.values[j] * wb.values[i];
                        }
                    }
                }
            }

            for (fi, &f) in mesh.cell_facets[c].iter().enumerate() {
                let facet = &mesh.facets[f];
                let sign = if facet.cells.0 == c { 1.0 } else { -1.0 };
                let nrm = [sign * facet.normal[0], sign * facet.normal[1]];
                let [a, b] = facet.vertices;
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let neumann = self.is_neumann_facet(f);
                for (&s, &w) in seg_rule.points.iter().zip(&seg_rule.weights) {
                    let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let wq = w * facet.length;
                    let bary = mesh.barycentric(c, x);
                    let (qvals, _) = rt.eval(bary);
                    let ub = scalar_basis(self.u_space.kind, &geom, bary);
                    let (fvals, nf) = facet_basis(self.m_space.kind, s);
                    let beta = (self.problem.beta)(x);
                    let bn = beta[0] * nrm[0] + beta[1] * nrm[1];

                    for i in 0..nq {
                        let rin = qvals[i][0] * nrm[0] + qvals[i][1] * nrm[1];
                        for j in 0..nu {
                            mat[(lq + i, lu + j)] -= wq * ub.values[j] * rin;
                        }
                        for j in 0..nf {
                            mat[(lq + i, lhat[fi] + j)] += wq * fvals[j] * rin;
                        }
                    }
                    for i in 0..nu {
                        let vi = ub.values[i];
                        for j in 0..nq {
                            let qjn = qvals[j][0] * nrm[0] + qvals[j][1] * nrm[1];
                            mat[(lu + i, lq + j)] += wq * vi * qjn;
                        }
                    }
                    for i in 0..nf {
                        for j in 0..nq {
                            let qjn = qvals[j][0] * nrm[0] + qvals[j][1] * nrm[1];
                            mat[(lhat[fi] + i, lq + j)] -= wq * fvals[i] * qjn;
                        }
                    }
                    // upwinded advective flux: inflow takes the multiplier
                    if bn < 0.0 {
                        for j in 0..nf {
                            let up = fvals[j];
                            for i in 0..nu {
                                mat[(lu + i, lhat[fi] + j)] += wq * bn * up * ub.values[i];
                            }
                            if !neumann {
                                for i in 0..nf {
                                    mat[(lhat[fi] + i, lhat[fi] + j)] -= wq * bn * up * fvals[i];
                                }
                            }
                        }
                    } else {
                        for j in 0..nu {
                            let up = ub.values[j];
                            for i in 0..nu {
                                mat[(lu + i, lu + j)] += wq * bn * up * ub.values[i];
                            }
                            if !neumann {
                                for i in 0..nf {
                                    mat[(lhat[fi] + i, lu + j)] -= wq * bn * up * fvals[i];
                                }
                            }
                        }
                    }
                    if !self.volume_locus && lpsihat[fi] != usize::MAX {
                        let (wvals, nw) = facet_basis(self.psi_space.kind, s);
                        for i in 0..nf {
                            for j in 0..nw {
                                mat[(lhat[fi] + i, lpsihat[fi] + j)] += wq * wvals[j] * fvals[i];
                            }
                        }
                        for i in 0..nw {
                            for j in 0..nf {
                                mat[(lpsihat[fi] + i, lhat[fi] + j)] += wq * fvals[j] * wvals[i];
                            }
                        }
                    }
                    if neumann {
                        if let Some((_, g)) = self
                            .problem
                            .neumann
                            .iter()
                            .find(|(t, _)| mesh.tag_name(f) == Some(t.as_str()))
                        {
                            let gv = g(x);
                            for i in 0..nf {
                                rhs[lhat[fi] + i] += wq * gv * fvals[i];
                            }
                        }
                    }
                }
            }

            // constrained multiplier dofs keep their couplings in the
            // residual but are filtered out of Jacobians (zero increments)
            let fixed: Vec<bool> = dofs
                .iter()
                .map(|&gd| {
                    gd >= self.ouhat && self.m_space.is_constrained(gd - self.ouhat)
                })
                .collect();

            let rhs_base = rhs.clone();
            self.cells.push(CellBlock { dofs, n_interior, mat, rhs, rhs_base, mass_uu, fixed });
        }
    }

    /// Sets the right-hand side to `base + sigma (u_prev, v)` (backward
    /// Euler); call before each time step.
    pub fn set_transient_load(&mut self, sigma: f64, u_prev: &[f64]) {
        let mesh = &self.problem.mesh;
        let nq = self.nq_per_cell;
        let nu = self.u_space.kind.dofs_per_cell();
        let mut u_dofs = Vec::new();
        for (c, block) in self.cells.iter_mut().enumerate() {
            self.u_space.cell_dofs(mesh, c, &mut u_dofs);
            for i in 0..nu {
                let mut acc = 0.0;
                for j in 0..nu {
                    acc += block.mass_uu[(i, j)] * u_prev[u_dofs[j]];
                }
                block.rhs[nq + i] = block.rhs_base[nq + i] + sigma * acc;
            }
        }
    }

    /// Latent field at a volume quadrature point, shifted by `alpha * delta`
    /// when `delta` is given.
    fn psi_value_cell(
        &self,
        c: usize,
        geom: &CellGeometry,
        bary: [f64; 3],
        delta: Option<(&[f64], f64)>,
    ) -> f64 {
        let mut dofs = Vec::new();
        self.psi_space.cell_dofs(&self.problem.mesh, c, &mut dofs);
        let wb = scalar_basis(self.psi_space.kind, geom, bary);
        (0..wb.n)
            .map(|i| {
                let base = self.psi[dofs[i]];
                let shift = delta.map(|(d, a)| a * d[dofs[i]]).unwrap_or(0.0);
                (base + shift) * wb.values[i]
            })
            .sum()
    }

    /// Residual at the state `x` whose latent slots carry `delta`.
    fn residual(&self, x: &[f64], alpha: f64) -> Vec<f64> {
        let mesh = &self.problem.mesh;
        let mut r = vec![0.0; self.ntotal];
        for block in &self.cells {
            let n = block.dofs.len();
            for i in 0..n {
                let mut acc = -block.rhs[i];
                let row = block.mat.row(i);
                for j in 0..n {
                    let v = row[j];
                    if v != 0.0 {
                        acc += v * x[block.dofs[j]];
                    }
                }
                r[block.dofs[i]] += acc;
            }
        }
        let map = &self.problem.constraint;
        let delta = &x[self.opsi..self.ouhat];
        if self.volume_locus {
            let rule = triangle_rule(self.vol_degree);
            let mut dofs = Vec::new();
            for c in 0..mesh.n_cells() {
                let geom = CellGeometry::new(mesh, c);
                self.psi_space.cell_dofs(mesh, c, &mut dofs);
                for (bary, &w) in rule.points.iter().zip(&rule.weights) {
                    let xq = geom.point(*bary);
                    let wb = scalar_basis(self.psi_space.kind, &geom, *bary);
                    let psi_x: f64 = (0..wb.n)
                        .map(|i| (self.psi[dofs[i]] + alpha * delta[dofs[i]]) * wb.values[i])
                        .sum();
                    let o = map.grad_dual(psi_x, xq);
                    for i in 0..wb.n {
                        r[self.opsi + dofs[i]] -= w * 2.0 * geom.area * o * wb.values[i];
                    }
                }
            }
        } else {
            let rule = segment_rule(5);
            for f in 0..mesh.n_facets() {
                if !self.psi_space.covers_facet(f) {
                    continue;
                }
                let dofs = self.psi_space.facet_dofs(f);
                let facet = &mesh.facets[f];
                let [a, b] = facet.vertices;
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    let xq = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let (wvals, nw) = facet_basis(self.psi_space.kind, s);
                    let psi_x: f64 = (0..nw)
                        .map(|i| (self.psi[dofs[i]] + alpha * delta[dofs[i]]) * wvals[i])
                        .sum();
                    let o = map.grad_dual(psi_x, xq);
                    for i in 0..nw {
                        r[self.opsi + dofs[i]] -= w * facet.length * o * wvals[i];
                    }
                }
            }
        }
        for &d in self.m_space.constrained.keys() {
            r[self.ouhat + d] = 0.0;
        }
        r
    }

    /// `-alpha * M'(psi + alpha delta)` blocks, per cell (volume) or per
    /// covered facet (boundary).
    fn latent_jacobian_blocks(&self, x: &[f64], alpha: f64) -> Vec<DMat> {
        let mesh = &self.problem.mesh;
        let map = &self.problem.constraint;
        let delta = &x[self.opsi..self.ouhat];
        let mut out = Vec::new();
        if self.volume_locus {
            let rule = triangle_rule(self.vol_degree);
            let mut dofs = Vec::new();
            for c in 0..mesh.n_cells() {
                let geom = CellGeometry::new(mesh, c);
                self.psi_space.cell_dofs(mesh, c, &mut dofs);
                let n = dofs.len();
                let mut m = DMat::zeros(n, n);
                for (bary, &w) in rule.points.iter().zip(&rule.weights) {
                    let xq = geom.point(*bary);
                    let wb = scalar_basis(self.psi_space.kind, &geom, *bary);
                    let psi_x: f64 = (0..wb.n)
                        .map(|i| (self.psi[dofs[i]] + alpha * delta[dofs[i]]) * wb.values[i])
                        .sum();
                    let d = map.grad_dual_derivative(psi_x, xq);
                    for i in 0..n {
                        for j in 0..n {
                            m[(i, j)] -=
                                alpha * w * 2.0 * geom.area * d * wb.values[i] * wb.values[j];
                        }
                    }
                }
                out.push(m);
            }
        } else {
            let rule = segment_rule(5);
            for f in 0..mesh.n_facets() {
                if !self.psi_space.covers_facet(f) {
                    continue;
                }
                let dofs = self.psi_space.facet_dofs(f);
                let facet = &mesh.facets[f];
                let [a, b] = facet.vertices;
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let n = dofs.len();
                let mut m = DMat::zeros(n, n);
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    let xq = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let (wvals, nw) = facet_basis(self.psi_space.kind, s);
                    let psi_x: f64 = (0..nw)
                        .map(|i| (self.psi[dofs[i]] + alpha * delta[dofs[i]]) * wvals[i])
                        .sum();
                    let d = map.grad_dual_derivative(psi_x, xq);
                    for i in 0..n {
                        for j in 0..n {
                            m[(i, j)] -= alpha * w * facet.length * d * wvals[i] * wvals[j];
                        }
                    }
                }
                out.push(m);
            }
        }
        out
    }

    /// Factorizes the current Jacobian (condensed by default).
    fn factorize(&self, x: &[f64], alpha: f64) -> Result<Frozen, FospgError> {
        let mesh = &self.problem.mesh;
        let latent_blocks = self.latent_jacobian_blocks(x, alpha);
        let nq = self.nq_per_cell;
        let nu = self.u_space.kind.dofs_per_cell();
        let lpsi = nq + nu;

        if !self.config.condensed {
            let mut sys = SparseSystem::new(self.ntotal, self.ntotal);
            for (c, block) in self.cells.iter().enumerate() {
                let n = block.dofs.len();
                for i in 0..n {
                    if block.fixed[i] {
                        continue;
                    }
                    for j in 0..n {
                        if block.fixed[j] {
                            continue;
                        }
                        let v = block.mat[(i, j)];
                        if v != 0.0 {
                            sys.add(block.dofs[i], block.dofs[j], v);
                        }
                    }
                }
                if self.volume_locus {
                    let m = &latent_blocks[c];
                    for i in 0..m.nrows {
                        for j in 0..m.ncols {
                            if m[(i, j)] != 0.0 {
                                sys.add(block.dofs[lpsi + i], block.dofs[lpsi + j], m[(i, j)]);
                            }
                        }
                    }
                }
            }
            if !self.volume_locus {
                let mut bi = 0;
                for f in 0..mesh.n_facets() {
                    if !self.psi_space.covers_facet(f) {
                        continue;
                    }
                    let dofs = self.psi_space.facet_dofs(f);
                    let m = &latent_blocks[bi];
                    bi += 1;
                    for i in 0..dofs.len() {
                        for j in 0..dofs.len() {
                            if m[(i, j)] != 0.0 {
                                sys.add(self.opsi + dofs[i], self.opsi + dofs[j], m[(i, j)]);
                            }
                        }
                    }
                }
            }
            for &d in self.m_space.constrained.keys() {
                sys.add(self.ouhat + d, self.ouhat + d, 1.0);
            }
            let fac = sys.factorize_with_cache(&mut self.lu_cache.borrow_mut())?;
            return Ok(Frozen::Monolithic(fac));
        }

        // condensed path: eliminate [q, u, (psi)] per cell; kept dofs are
        // the trailing [boundary psi | multiplier] range
        let kept_start = if self.volume_locus { self.ouhat } else { self.opsi };
        let n_kept = self.ntotal - kept_start;
        let mut sys = SparseSystem::new(n_kept, n_kept);
        let mut cells = Vec::with_capacity(self.cells.len());
        for (c, block) in self.cells.iter().enumerate() {
            let n = block.dofs.len();
            let ni = block.n_interior;
            let nf = n - ni;
            let mut a_ii = DMat::zeros(ni, ni);
            let mut a_if = DMat::zeros(ni, nf);
            for i in 0..ni {
                for j in 0..ni {
                    a_ii[(i, j)] = block.mat[(i, j)];
                }
                for j in 0..nf {
                    if !block.fixed[ni + j] {
                        a_if[(i, j)] = block.mat[(i, ni + j)];
                    }
                }
            }
            if self.volume_locus {
                let m = &latent_blocks[c];
                for i in 0..m.nrows {
                    for j in 0..m.ncols {
                        a_ii[(lpsi + i, lpsi + j)] += m[(i, j)];
                    }
                }
            }
            let lu = a_ii.lu().map_err(|_| SolveError::Singular {
                row: block.dofs[0],
                residual: f64::INFINITY,
            })?;
            let w = lu.solve_mat(&a_if);
            for i in 0..nf {
                if block.fixed[ni + i] {
                    continue;
                }
                let gi = block.dofs[ni + i] - kept_start;
                for j in 0..nf {
                    if block.fixed[ni + j] {
                        continue;
                    }
                    let gj = block.dofs[ni + j] - kept_start;
                    let mut v = block.mat[(ni + i, ni + j)];
                    for l in 0..ni {
                        v -= block.mat[(ni + i, l)] * w[(l, j)];
                    }
                    sys.add_structural(gi, gj, v);
                }
            }
            cells.push((lu, w));
        }
        if !self.volume_locus {
            let mut bi = 0;
            for f in 0..mesh.n_facets() {
                if !self.psi_space.covers_facet(f) {
                    continue;
                }
                let dofs = self.psi_space.facet_dofs(f);
                let m = &latent_blocks[bi];
                bi += 1;
                for i in 0..dofs.len() {
                    for j in 0..dofs.len() {
                        sys.add_structural(
                            self.opsi + dofs[i] - kept_start,
                            self.opsi + dofs[j] - kept_start,
                            m[(i, j)],
                        );
                    }
                }
            }
        }
        for &d in self.m_space.constrained.keys() {
            let gi = self.ouhat + d - kept_start;
            sys.add(gi, gi, 1.0);
        }
        let facet = sys.factorize_with_cache(&mut self.lu_cache.borrow_mut())?;
        Ok(Frozen::Condensed { kept_start, cells, facet })
    }

    /// Solves `J dx = -r` with a frozen factorization.
    fn apply_frozen(&self, frozen: &Frozen, r: &[f64]) -> Vec<f64> {
        match frozen {
            Frozen::Monolithic(fac) => {
                let neg: Vec<f64> = r.iter().map(|v| -v).collect();
                fac.solve(&neg)
            }
            Frozen::Condensed { kept_start, cells, facet } => {
                let kept_start = *kept_start;
                let mut rhs: Vec<f64> = r[kept_start..].iter().map(|v| -v).collect();
                let mut ys: Vec<Vec<f64>> = Vec::with_capacity(self.cells.len());
                for (c, block) in self.cells.iter().enumerate() {
                    let ni = block.n_interior;
                    let nf = block.dofs.len() - ni;
                    let (lu, _) = &cells[c];
                    let bi: Vec<f64> = (0..ni).map(|i| -r[block.dofs[i]]).collect();
                    let y = lu.solve(&bi);
                    for i in 0..nf {
                        if block.fixed[ni + i] {
                            continue;
                        }
                        let gi = block.dofs[ni + i] - kept_start;
                        let mut corr = 0.0;
                        for l in 0..ni {
                            corr += block.mat[(ni + i, l)] * y[l];
                        }
                        rhs[gi] -= corr;
                    }
                    ys.push(y);
                }
                for &d in self.m_space.constrained.keys() {
                    rhs[self.ouhat + d - kept_start] = 0.0;
                }
                let xf = facet.solve(&rhs);
                let mut dx = vec![0.0; self.ntotal];
                dx[kept_start..].copy_from_slice(&xf);
                for (c, block) in self.cells.iter().enumerate() {
                    let (_, w) = &cells[c];
                    let ni = block.n_interior;
                    for i in 0..ni {
                        let mut v = ys[c][i];
                        for j in 0..(block.dofs.len() - ni) {
                            v -= w[(i, j)] * xf[block.dofs[ni + j] - kept_start];
                        }
                        dx[block.dofs[i]] = v;
                    }
                }
                dx
            }
        }
    }

    /// One proximal step: modified Newton with a frozen Jacobian that is
    /// refreshed when convergence stalls. Returns the iteration count.
    pub fn step(&mut self, k: usize, alpha: f64) -> Result<usize, FospgError> {
        let mut x = self.x.clone();
        // latent slots carry delta, warm-started at zero
        x[self.opsi..self.ouhat].fill(0.0);
        let mut r = self.residual(&x, alpha);
        let mut rnorm = norm(&r);
        let mut frozen = self.factorize(&x, alpha)?;
        let mut fresh = true;
        let mut iters = 0;
        while rnorm > self.config.newton_tol {
            if iters >= self.config.max_newton_iters {
                return Err(FospgError::NewtonDiverged { k, residual: rnorm, newton_iters: iters });
            }
            let dx = self.apply_frozen(&frozen, &r);
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..=30 {
                let x_try: Vec<f64> =
                    x.iter().zip(&dx).map(|(v, d)| v + scale * d).collect();
                let r_try = self.residual(&x_try, alpha);
                let rn = norm(&r_try);
                if rn < rnorm || rn <= self.config.newton_tol {
                    let slow = rn > 0.7 * rnorm || scale < 0.26;
                    x = x_try;
                    r = r_try;
                    rnorm = rn;
                    accepted = true;
                    if slow && !fresh && rnorm > self.config.newton_tol {
                        frozen = self.factorize(&x, alpha)?;
                        fresh = true;
                    } else {
                        fresh = false;
                    }
                    break;
                }
                scale *= 0.5;
            }
            iters += 1;
            if !accepted {
                if fresh {
                    return Err(FospgError::NewtonDiverged { k, residual: rnorm, newton_iters: iters });
                }
                frozen = self.factorize(&x, alpha)?;
                fresh = true;
            }
        }
        let delta = x[self.opsi..self.ouhat].to_vec();
        for (p, d) in self.psi.iter_mut().zip(&delta) {
            *p += alpha * d;
        }
        self.last_delta = delta;
        self.x = x;
        self.x[self.opsi..self.ouhat].fill(0.0);
        Ok(iters)
    }

    /// Observable margins and range over constraint quadrature points.
    pub fn observable_stats(&self) -> (f64, f64, f64, f64) {
        let mesh = &self.problem.mesh;
        let map = &self.problem.constraint;
        let mut lo = f64::INFINITY;
        let mut hi = f64::INFINITY;
        let mut omin = f64::INFINITY;
        let mut omax = f64::NEG_INFINITY;
        if self.volume_locus {
            let rule = triangle_rule(self.vol_degree);
            for c in 0..mesh.n_cells() {
                let geom = CellGeometry::new(mesh, c);
                for bary in &rule.points {
                    let x = geom.point(*bary);
                    let o = map.grad_dual(self.psi_value_cell(c, &geom, *bary, None), x);
                    lo = lo.min(o - map.lower_bound(x));
                    hi = hi.min(map.upper_bound(x) - o);
                    omin = omin.min(o);
                    omax = omax.max(o);
                }
            }
        } else {
            let rule = segment_rule(5);
            for f in 0..mesh.n_facets() {
                if !self.psi_space.covers_facet(f) {
                    continue;
                }
                let dofs = self.psi_space.facet_dofs(f);
                let facet = &mesh.facets[f];
                let [a, b] = facet.vertices;
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                for &s in &rule.points {
                    let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let (wvals, nw) = facet_basis(self.psi_space.kind, s);
                    let psi_x: f64 = (0..nw).map(|i| self.psi[dofs[i]] * wvals[i]).sum();
                    let o = map.grad_dual(psi_x, x);
                    lo = lo.min(o - map.lower_bound(x));
                    hi = hi.min(map.upper_bound(x) - o);
                    omin = omin.min(o);
                    omax = omax.max(o);
                }
            }
        }
        (lo, hi, omin, omax)
    }

    /// Cell means of the observable field (volume locus).
    pub fn observable_cell_means(&self) -> Vec<f64> {
        let mesh = &self.problem.mesh;
        let map = &self.problem.constraint;
        let rule = triangle_rule(self.vol_degree);
        let mut out = vec![0.0; mesh.n_cells()];
        for c in 0..mesh.n_cells() {
            let geom = CellGeometry::new(mesh, c);
            let mut acc = 0.0;
            for (bary, &w) in rule.points.iter().zip(&rule.weights) {
                let x = geom.point(*bary);
                acc += w * 2.0 * geom.area * map.grad_dual(self.psi_value_cell(c, &geom, *bary, None), x);
            }
            out[c] = acc / geom.area;
        }
        out
    }

    /// Observable value at one point of a cell (volume locus).
    pub fn observable_at(&self, cell: usize, bary: [f64; 3]) -> f64 {
        let geom = CellGeometry::new(&self.problem.mesh, cell);
        let psi_x = self.psi_value_cell(cell, &geom, bary, None);
        self.problem.constraint.grad_dual(psi_x, geom.point(bary))
    }

    /// Full proximal loop with the configured schedule and stopping rule.
    pub fn run(&mut self) -> Result<FospgRun, FospgError> {
        let mesh = &self.problem.mesh;
        let mut iterations = Vec::new();
        let mut sum_alpha = 0.0;
        let mut qsum = vec![0.0; self.n_flux_dofs()];
        let mut usum = vec![0.0; self.u_space.ndofs];
        let mut hatsum = vec![0.0; self.m_space.ndofs];
        let mut obs_sum = if self.volume_locus && self.config.q == 0 {
            Some(vec![0.0; mesh.n_cells()])
        } else {
            None
        };
        let mut u_prev: Option<Vec<f64>> = None;
        let mut avg_prev: Option<Vec<f64>> = None;
        let mut converged = false;
        let mut last_diff = f64::INFINITY;

        for k in 1..=self.config.max_prox_iters {
            let alpha = self.config.alpha0 * self.config.growth.powi(k as i32 - 1);
            let newton_iters = self.step(k, alpha)?;
            let mut rec = IterationRecord::new(k, alpha);
            rec.newton_iters = newton_iters;

            sum_alpha += alpha;
            for (s, &v) in qsum.iter_mut().zip(self.flux()) {
                *s += alpha * v;
            }
            for (s, &v) in usum.iter_mut().zip(self.primal()) {
                *s += alpha * v;
            }
            for (s, &v) in hatsum.iter_mut().zip(self.multiplier()) {
                *s += alpha * v;
            }
            if let Some(os) = obs_sum.as_mut() {
                for (s, v) in os.iter_mut().zip(self.observable_cell_means()) {
                    *s += alpha * v;
                }
            }
            let u_avg: Vec<f64> = usum.iter().map(|s| s / sum_alpha).collect();

            let u_now = self.primal().to_vec();
            if let Some(prev) = &u_prev {
                rec.du_l2 = l2_diff(mesh, &self.u_space, &u_now, prev);
                rec.du_h1 = h1_semi_diff(mesh, &self.u_space, &u_now, prev);
            }
            if let Some(prev) = &avg_prev {
                rec.du_avg_l2 = l2_diff(mesh, &self.u_space, &u_avg, prev);
                rec.du_avg_h1 = h1_semi_diff(mesh, &self.u_space, &u_avg, prev);
            }
            if let Some(exact) = &self.problem.exact {
                rec.err_u_l2 = Some(l2_error(mesh, &self.u_space, &u_now, &*exact.u, 6));
                rec.err_avg_l2 = Some(l2_error(mesh, &self.u_space, &u_avg, &*exact.u, 6));
                let flux_exact = |p: crate::Point| self.problem.exact_flux(p).unwrap();
                rec.err_flux_l2 = Some(rt_l2_error(mesh, self.config.p, self.flux(), &flux_exact, 6));
            }
            let (lo, hi, omin, omax) = self.observable_stats();
            rec.feas_lower = lo;
            rec.feas_upper = hi;
            rec.dmp_min = omin;
            rec.dmp_max = omax;

            let diff = match (self.config.stop_iterate, self.config.stop_metric) {
                (StopIterate::Raw, StopMetric::L2) => rec.du_l2,
                (StopIterate::Raw, StopMetric::H1Semi) => rec.du_h1,
                (StopIterate::Averaged, StopMetric::L2) => rec.du_avg_l2,
                (StopIterate::Averaged, StopMetric::H1Semi) => rec.du_avg_h1,
            };
            last_diff = diff;
            iterations.push(rec);
            u_prev = Some(u_now);
            avg_prev = Some(u_avg);
            if diff <= self.config.stop_tol {
                converged = true;
                break;
            }
        }
        if !converged && self.config.require_convergence {
            return Err(FospgError::MaxProxIters { max: self.config.max_prox_iters, last_diff });
        }
        Ok(FospgRun {
            iterations,
            converged,
            sum_alpha,
            q_avg: qsum.iter().map(|s| s / sum_alpha).collect(),
            u_avg: usum.iter().map(|s| s / sum_alpha).collect(),
            uhat_avg: hatsum.iter().map(|s| s / sum_alpha).collect(),
            obs_avg_cell: obs_sum.map(|os| os.iter().map(|s| s / sum_alpha).collect()),
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Standalone hybrid forms on the combined `[flux | primal | multiplier]`
/// layout, for inspection and property tests.
pub struct FospgForms {
    /// Diffusion part: flux mass and the two divergence couplings.
    pub a_d: SparseSystem,
    /// Upwinded advection part (rows/cols of the flux block are empty).
    pub a_c: SparseSystem,
    /// `B(r, (v, vhat))`: rows are flux dofs, columns `[primal | multiplier]`.
    pub b: SparseSystem,
    pub n_flux: usize,
    pub n_primal: usize,
    pub n_multiplier: usize,
}

/// Assembles the hybrid forms of degree `p` with the given coefficients.
/// `neumann_tags` lists the boundary parts excluded from the multiplier
/// pairing of the advective flux.
pub fn assemble_fospg_forms(
    mesh: &SimplicialMesh,
    p: usize,
    kappa: &(dyn Fn(crate::Point) -> [[f64; 2]; 2] + Sync),
    beta: &(dyn Fn(crate::Point) -> [f64; 2] + Sync),
    neumann_tags: &[&str],
) -> Result<FospgForms, FospgError> {
    if p > 1 {
        return Err(FospgError::UnsupportedP(p));
    }
    let u_kind = if p == 0 { SpaceKind::DgP0 } else { SpaceKind::DgP1 };
    let u_space = DiscreteSpace::new(mesh, u_kind);
    let m_space = DiscreteSpace::facet(mesh, p, FacetSubset::All)?;
    let nq_per_cell = if p == 0 { 3 } else { 8 };
    let n_flux = nq_per_cell * mesh.n_cells();
    let n_primal = u_space.ndofs;
    let n_multiplier = m_space.ndofs;
    let ou = n_flux;
    let ohat = n_flux + n_primal;
    let ntotal = ohat + n_multiplier;

    let mut a_d = SparseSystem::new(ntotal, ntotal);
    let mut a_c = SparseSystem::new(ntotal, ntotal);
    let mut b = SparseSystem::new(n_flux, n_primal + n_multiplier);

    let vol_rule = triangle_rule(if p == 1 { 6 } else { 4 });
    let seg_rule = segment_rule(5);
    let mut u_dofs = Vec::new();
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        let rt = RtBasis::new(&geom, p);
        u_space.cell_dofs(mesh, c, &mut u_dofs);
        let qg: Vec<usize> = (0..nq_per_cell).map(|i| nq_per_cell * c + i).collect();

        for (bary, &w) in vol_rule.points.iter().zip(&vol_rule.weights) {
            let x = geom.point(*bary);
            let wq = w * 2.0 * geom.area;
            let (qvals, _) = rt.eval(*bary);
            let ub = scalar_basis(u_kind, &geom, *bary);
            let k = kappa(x);
            let detk = k[0][0] * k[1][1] - k[0][1] * k[1][0];
            let kinv = [
                [k[1][1] / detk, -k[0][1] / detk],
                [-k[1][0] / detk, k[0][0] / detk],
            ];
            let bt = beta(x);
            for i in 0..nq_per_cell {
                for j in 0..nq_per_cell {
                    let kq = [
                        kinv[0][0] * qvals[j][0] + kinv[0][1] * qvals[j][1],
                        kinv[1][0] * qvals[j][0] + kinv[1][1] * qvals[j][1],
                    ];
                    a_d.add(qg[i], qg[j], wq * (kq[0] * qvals[i][0] + kq[1] * qvals[i][1]));
                }
                for j in 0..ub.n {
                    let g = ub.gradients[j];
                    let v = wq * (qvals[i][0] * g[0] + qvals[i][1] * g[1]);
                    a_d.add(qg[i], ou + u_dofs[j], v);
                    a_d.add(ou + u_dofs[j], qg[i], -v);
                    b.add(qg[i], u_dofs[j], v);
                }
            }
            for i in 0..ub.n {
                let gi = ub.gradients[i];
                for j in 0..ub.n {
                    a_c.add(
                        ou + u_dofs[i],
                        ou + u_dofs[j],
                        -wq * ub.values[j] * (bt[0] * gi[0] + bt[1] * gi[1]),
                    );
                }
            }
        }

        for (fi, &f) in mesh.cell_facets[c].iter().enumerate() {
            let _ = fi;
            let facet = &mesh.facets[f];
            let sign = if facet.cells.0 == c { 1.0 } else { -1.0 };
            let nrm = [sign * facet.normal[0], sign * facet.normal[1]];
            let [va, vb] = facet.vertices;
            let (pa, pb) = (mesh.vertices[va], mesh.vertices[vb]);
            let hat = m_space.facet_dofs(f);
            let neumann = neumann_tags
                .iter()
                .any(|t| mesh.tag_name(f) == Some(*t));
            for (&s, &w) in seg_rule.points.iter().zip(&seg_rule.weights) {
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let wq = w * facet.length;
                let bary = mesh.barycentric(c, x);
                let (qvals, _) = rt.eval(bary);
                let ub = scalar_basis(u_kind, &geom, bary);
                let (fvals, nf) = facet_basis(m_space.kind, s);
                let bt = beta(x);
                let bn = bt[0] * nrm[0] + bt[1] * nrm[1];
                for i in 0..nq_per_cell {
                    let rin = qvals[i][0] * nrm[0] + qvals[i][1] * nrm[1];
                    for j in 0..ub.n {
                        let v = wq * ub.values[j] * rin;
                        a_d.add(qg[i], ou + u_dofs[j], -v);
                        a_d.add(ou + u_dofs[j], qg[i], v);
                        b.add(qg[i], u_dofs[j], -v);
                    }
                    for j in 0..nf {
                        let v = wq * fvals[j] * rin;
                        a_d.add(qg[i], ohat + hat[j], v);
                        a_d.add(ohat + hat[j], qg[i], -v);
                        b.add(qg[i], n_primal + hat[j], v);
                    }
                }
                if bn < 0.0 {
                    for j in 0..nf {
                        for i in 0..ub.n {
                            a_c.add(ou + u_dofs[i], ohat + hat[j], wq * bn * fvals[j] * ub.values[i]);
                        }
                        if !neumann {
                            for i in 0..nf {
                                a_c.add(ohat + hat[i], ohat + hat[j], -wq * bn * fvals[j] * fvals[i]);
                            }
                        }
                    }
                } else {
                    for j in 0..ub.n {
                        for i in 0..ub.n {
                            a_c.add(ou + u_dofs[i], ou + u_dofs[j], wq * bn * ub.values[j] * ub.values[i]);
                        }
                        if !neumann {
                            for i in 0..nf {
                                a_c.add(ohat + hat[i], ou + u_dofs[j], -wq * bn * ub.values[j] * fvals[i]);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(FospgForms { a_d, a_c, b, n_flux, n_primal, n_multiplier })
}
