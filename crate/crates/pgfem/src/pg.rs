//! Conforming proximal Galerkin iteration.
//!
//! Each proximal step solves the coupled saddle system in the primal field
//! and the scaled latent update `delta = (psi_k - psi_{k-1}) / alpha_k` by
//! Newton's method with backtracking. Working in `delta` keeps the
//! linearized systems O(1)-scaled for geometrically growing step sizes and
//! yields the dual iterate directly (`lambda_k = -delta`).

use crate::assemble::{add_neumann_load, assemble_load, assemble_mass, assemble_operator, Coefficients, Region};
use crate::log::IterationRecord;
use crate::mesh::SimplicialMesh;
use crate::norms::{h1_semi_diff, h1_semi_error, l2_diff, l2_error};
use crate::problems::{ConstraintLocus, VIProblem};
use crate::quadrature::triangle_rule;
use crate::space::{scalar_basis, CellGeometry, DiscreteSpace, SpaceKind};
use crate::sparse::{SolveError, SparseSystem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgError {
    #[error("Newton did not converge at proximal step {k}: residual {residual:.3e} after {newton_iters} iterations")]
    NewtonDiverged { k: usize, residual: f64, newton_iters: usize },
    #[error("proximal iteration limit {max} exceeded (last successive difference {last_diff:.3e})")]
    MaxProxIters { max: usize, last_diff: f64 },
    #[error("dual recovery requires at least one completed proximal step")]
    NoSteps,
    #[error("conforming solver requires a volume constraint (boundary-constrained problems use the hybrid solver)")]
    UnsupportedLocus,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Assemble(#[from] crate::assemble::AssembleError),
}

/// Norm used by the stopping test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopMetric {
    #[default]
    L2,
    H1Semi,
}

/// Which iterate the stopping test measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopIterate {
    #[default]
    Raw,
    Averaged,
}

/// Finite element pair (primal space, latent space).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairKind {
    #[default]
    P1BubbleP0,
    P1P1,
}

#[derive(Debug, Clone)]
pub struct PgConfig {
    pub alpha0: f64,
    /// alpha_k = alpha0 * growth^(k-1)
    pub growth: f64,
    pub stop_tol: f64,
    pub stop_metric: StopMetric,
    pub stop_iterate: StopIterate,
    pub max_prox_iters: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub initial_psi: f64,
    /// Keep (alpha_k, u_k) history (memory-heavy; off by default).
    pub keep_history: bool,
    /// Error out when `max_prox_iters` is reached without convergence.
    pub require_convergence: bool,
}

impl Default for PgConfig {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            growth: 2.0,
            stop_tol: 1e-10,
            stop_metric: StopMetric::L2,
            stop_iterate: StopIterate::Raw,
            max_prox_iters: 80,
            newton_tol: 1e-11,
            max_newton_iters: 50,
            initial_psi: 0.0,
            keep_history: false,
            require_convergence: true,
        }
    }
}

/// Completed run: final state, averages, and the per-iteration log.
pub struct PgRun {
    pub v_space: DiscreteSpace,
    pub w_space: DiscreteSpace,
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi0: Vec<f64>,
    /// Scaled last update; the dual iterate is `lambda = -delta`.
    pub delta_last: Vec<f64>,
    pub u_avg: Vec<f64>,
    pub sum_alpha: f64,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub history: Option<Vec<(f64, Vec<f64>)>>,
}

impl PgRun {
    pub fn prox_iters(&self) -> usize {
        self.iterations.len()
    }

    /// Last dual iterate `lambda_l = (psi_{l-1} - psi_l)/alpha_l`.
    pub fn lambda_last(&self) -> Result<Vec<f64>, PgError> {
        if self.iterations.is_empty() {
            return Err(PgError::NoSteps);
        }
        Ok(self.delta_last.iter().map(|d| -d).collect())
    }

    /// Weighted dual average `(psi_0 - psi_l) / sum(alpha)`.
    pub fn lambda_bar(&self) -> Result<Vec<f64>, PgError> {
        if self.iterations.is_empty() {
            return Err(PgError::NoSteps);
        }
        Ok(self
            .psi0
            .iter()
            .zip(&self.psi)
            .map(|(p0, pl)| (p0 - pl) / self.sum_alpha)
            .collect())
    }
}

/// Recovers the dual field: `(lambda_bar, lambda_last)`.
pub fn recover_dual(run: &PgRun) -> Result<(Vec<f64>, Vec<f64>), PgError> {
    Ok((run.lambda_bar()?, run.lambda_last()?))
}

/// Conforming solver with assembled operators, reusable across steps.
pub struct ConformingPg<'p> {
    problem: &'p VIProblem,
    config: PgConfig,
    pub v_space: DiscreteSpace,
    pub w_space: DiscreteSpace,
    a: SparseSystem,
    b: SparseSystem,
    rhs: Vec<f64>,
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    last_delta: Option<Vec<f64>>,
    quad_degree: usize,
}

impl<'p> ConformingPg<'p> {
    pub fn new(problem: &'p VIProblem, pair: PairKind, config: PgConfig) -> Result<Self, PgError> {
        if problem.locus != ConstraintLocus::Volume {
            return Err(PgError::UnsupportedLocus);
        }
        let mesh = &problem.mesh;
        let (v_kind, w_kind) = match pair {
            PairKind::P1BubbleP0 => (SpaceKind::P1Bubble, SpaceKind::DgP0),
            PairKind::P1P1 => (SpaceKind::P1, SpaceKind::P1),
        };
        let mut v_space = DiscreteSpace::new(mesh, v_kind);
        for (tag, g) in &problem.dirichlet {
            v_space.constrain_dirichlet(mesh, tag, g);
        }
        let mut w_space = DiscreteSpace::new(mesh, w_kind);
        if w_kind == SpaceKind::P1 {
            // latent space vanishes on the Dirichlet part
            for (tag, _) in &problem.dirichlet {
                w_space.constrain_dirichlet(mesh, tag, &|_| 0.0);
            }
        }
        let quad_degree = 4;
        let coeffs = Coefficients {
            kappa: &*problem.kappa,
            beta: &*problem.beta,
            reaction: &*problem.reaction,
            skew: problem
                .skew
                .as_deref()
                .map(|f| f as &(dyn Fn(crate::Point) -> f64 + Sync)),
        };
        let a = assemble_operator(mesh, &v_space, &coeffs, quad_degree)?;
        let b = assemble_mass(mesh, &v_space, &w_space, None, Region::Volume)?;
        let mut rhs = assemble_load(mesh, &v_space, &*problem.source, quad_degree);
        for (tag, g) in &problem.neumann {
            add_neumann_load(mesh, &v_space, tag, g, &mut rhs);
        }

        let mut u = vec![0.0; v_space.ndofs];
        for (&dof, &val) in &v_space.constrained {
            u[dof] = val;
        }
        let mut psi = vec![config.initial_psi; w_space.ndofs];
        for &dof in w_space.constrained.keys() {
            psi[dof] = 0.0;
        }
        Ok(Self {
            problem,
            config,
            v_space,
            w_space,
            a,
            b,
            rhs,
            u,
            psi,
            last_delta: None,
            quad_degree,
        })
    }

    fn nv(&self) -> usize {
        self.v_space.ndofs
    }

    fn nw(&self) -> usize {
        self.w_space.ndofs
    }

    /// Integrals of the observable against the latent test functions:
    /// `n_i = (grad_dual(psi), chi_i)`.
    fn observable_moments(&self, psi: &[f64]) -> Vec<f64> {
        let mesh = &self.problem.mesh;
        let rule = triangle_rule(self.quad_degree);
        let map = &self.problem.constraint;
        let mut out = vec![0.0; self.nw()];
        let mut dofs = Vec::new();
        for c in 0..mesh.n_cells() {
            let geom = CellGeometry::new(mesh, c);
            self.w_space.cell_dofs(mesh, c, &mut dofs);
            for (bary, &w) in rule.points.iter().zip(&rule.weights) {
                let x = geom.point(*bary);
                let bw = scalar_basis(self.w_space.kind, &geom, *bary);
                let psi_x: f64 = (0..bw.n).map(|i| psi[dofs[i]] * bw.values[i]).sum();
                let o = map.grad_dual(psi_x, x);
                for i in 0..bw.n {
                    out[dofs[i]] += w * 2.0 * geom.area * o * bw.values[i];
                }
            }
        }
        out
    }

    /// Latent-space mass weighted by the derivative of the observable map.
    fn observable_derivative_mass(&self, psi: &[f64]) -> SparseSystem {
        let mesh = &self.problem.mesh;
        let rule = triangle_rule(self.quad_degree);
        let map = &self.problem.constraint;
        let mut sys = SparseSystem::new(self.nw(), self.nw());
        let mut dofs = Vec::new();
        for c in 0..mesh.n_cells() {
            let geom = CellGeometry::new(mesh, c);
            self.w_space.cell_dofs(mesh, c, &mut dofs);
            for (bary, &w) in rule.points.iter().zip(&rule.weights) {
                let x = geom.point(*bary);
                let bw = scalar_basis(self.w_space.kind, &geom, *bary);
                let psi_x: f64 = (0..bw.n).map(|i| psi[dofs[i]] * bw.values[i]).sum();
                let d = map.grad_dual_derivative(psi_x, x);
                for i in 0..bw.n {
                    for j in 0..bw.n {
                        sys.add(dofs[i], dofs[j], w * 2.0 * geom.area * d * bw.values[i] * bw.values[j]);
                    }
                }
            }
        }
        sys
    }

    /// Residual of the step equations at `(u, delta)`, constrained rows zeroed.
    fn residual(&self, u: &[f64], delta: &[f64], psi_prev: &[f64], alpha: f64) -> Vec<f64> {
        let (nv, nw) = (self.nv(), self.nw());
        let mut r = vec![0.0; nv + nw];
        // r1 = A u + B^T delta - F
        self.a.add_mul_vec(1.0, u, &mut r[..nv]);
        self.b.add_mul_transpose_vec(1.0, delta, &mut r[..nv]);
        for i in 0..nv {
            r[i] -= self.rhs[i];
        }
        // r2 = B u - (grad_dual(psi_prev + alpha delta), chi)
        self.b.add_mul_vec(1.0, u, &mut r[nv..]);
        let psi: Vec<f64> =
            psi_prev.iter().zip(delta).map(|(p, d)| p + alpha * d).collect();
        let moments = self.observable_moments(&psi);
        for i in 0..nw {
            r[nv + i] -= moments[i];
        }
        for &dof in self.v_space.constrained.keys() {
            r[dof] = 0.0;
        }
        for &dof in self.w_space.constrained.keys() {
            r[nv + dof] = 0.0;
        }
        r
    }

    fn jacobian(&self, psi: &[f64], alpha: f64) -> SparseSystem {
        let (nv, nw) = (self.nv(), self.nw());
        let vfix = |d: usize| self.v_space.is_constrained(d);
        let wfix = |d: usize| self.w_space.is_constrained(d);
        let mut j = SparseSystem::new(nv + nw, nv + nw);
        for &(r, c, v) in self.a.triplets() {
            if !vfix(r) && !vfix(c) {
                j.add(r, c, v);
            }
        }
        for &(r, c, v) in self.b.triplets() {
            // B block (rows W, cols V) and its transpose
            if !wfix(r) && !vfix(c) {
                j.add(nv + r, c, v);
            }
            if !vfix(c) && !wfix(r) {
                j.add(c, nv + r, v);
            }
        }
        let mprime = self.observable_derivative_mass(psi);
        for &(r, c, v) in mprime.triplets() {
            if !wfix(r) && !wfix(c) {
                j.add(nv + r, nv + c, -alpha * v);
            }
        }
        for d in 0..nv {
            if vfix(d) {
                j.add(d, d, 1.0);
            }
        }
        for d in 0..nw {
            if wfix(d) {
                j.add(nv + d, nv + d, 1.0);
            }
        }
        j
    }

    fn split_norms(&self, r: &[f64]) -> (f64, f64) {
        let nv = self.nv();
        let n1 = r[..nv].iter().map(|v| v * v).sum::<f64>().sqrt();
        let n2 = r[nv..].iter().map(|v| v * v).sum::<f64>().sqrt();
        (n1, n2)
    }

    /// One proximal step: Newton on `(u, delta)` from the warm start
    /// `(u, 0)`. Returns the Newton iteration count. The trace hook sees
    /// `(u, psi)` after every Newton update.
    pub fn step(
        &mut self,
        k: usize,
        alpha: f64,
        mut trace: Option<&mut dyn FnMut(&[f64], &[f64])>,
    ) -> Result<usize, PgError> {
        let (nv, nw) = (self.nv(), self.nw());
        let psi_prev = self.psi.clone();
        let mut u = self.u.clone();
        let mut delta = vec![0.0; nw];
        let mut resid = self.residual(&u, &delta, &psi_prev, alpha);
        let mut rnorm = {
            let (a, b) = self.split_norms(&resid);
            a.max(b)
        };
        let mut iters = 0;
        while rnorm > self.config.newton_tol {
            if iters >= self.config.max_newton_iters {
                return Err(PgError::NewtonDiverged { k, residual: rnorm, newton_iters: iters });
            }
            let psi: Vec<f64> =
                psi_prev.iter().zip(&delta).map(|(p, d)| p + alpha * d).collect();
            let jac = self.jacobian(&psi, alpha);
            let neg_r: Vec<f64> = resid.iter().map(|v| -v).collect();
            let update = jac.solve(&neg_r)?;
            // undamped first, halve on residual increase
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..=30 {
                let u_try: Vec<f64> =
                    u.iter().zip(&update[..nv]).map(|(x, d)| x + scale * d).collect();
                let delta_try: Vec<f64> =
                    delta.iter().zip(&update[nv..]).map(|(x, d)| x + scale * d).collect();
                let r_try = self.residual(&u_try, &delta_try, &psi_prev, alpha);
                let (a, b) = self.split_norms(&r_try);
                let rn_try = a.max(b);
                if rn_try < rnorm || rn_try <= self.config.newton_tol {
                    u = u_try;
                    delta = delta_try;
                    resid = r_try;
                    rnorm = rn_try;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            iters += 1;
            if !accepted {
                return Err(PgError::NewtonDiverged { k, residual: rnorm, newton_iters: iters });
            }
            if let Some(hook) = trace.as_mut() {
                let psi_now: Vec<f64> =
                    psi_prev.iter().zip(&delta).map(|(p, d)| p + alpha * d).collect();
                hook(&u, &psi_now);
            }
        }
        self.u = u;
        for (p, d) in self.psi.iter_mut().zip(&delta) {
            *p += alpha * d;
        }
        self.last_delta = Some(delta);
        Ok(iters)
    }

    /// Constraint margins and observable range at quadrature points.
    fn observable_stats(&self) -> (f64, f64, f64, f64) {
        let mesh = &self.problem.mesh;
        let rule = triangle_rule(self.quad_degree);
        let map = &self.problem.constraint;
        let mut lo_margin = f64::INFINITY;
        let mut hi_margin = f64::INFINITY;
        let mut omin = f64::INFINITY;
        let mut omax = f64::NEG_INFINITY;
        let mut dofs = Vec::new();
        for c in 0..mesh.n_cells() {
            let geom = CellGeometry::new(mesh, c);
            self.w_space.cell_dofs(mesh, c, &mut dofs);
            for bary in &rule.points {
                let x = geom.point(*bary);
                let bw = scalar_basis(self.w_space.kind, &geom, *bary);
                let psi_x: f64 = (0..bw.n).map(|i| self.psi[dofs[i]] * bw.values[i]).sum();
                let o = map.grad_dual(psi_x, x);
                lo_margin = lo_margin.min(o - map.lower_bound(x));
                hi_margin = hi_margin.min(map.upper_bound(x) - o);
                omin = omin.min(o);
                omax = omax.max(o);
            }
        }
        (lo_margin, hi_margin, omin, omax)
    }

    /// Full proximal loop with the configured schedule and stopping test.
    pub fn run(mut self) -> Result<PgRun, PgError> {
        let mesh = &self.problem.mesh;
        let psi0 = self.psi.clone();
        let mut iterations: Vec<IterationRecord> = Vec::new();
        let mut history = if self.config.keep_history { Some(Vec::new()) } else { None };
        let mut u_prev: Option<Vec<f64>> = None;
        let mut usum = vec![0.0; self.nv()];
        let mut sum_alpha = 0.0;
        let mut avg_prev: Option<Vec<f64>> = None;
        let mut converged = false;
        let mut last_diff = f64::INFINITY;

        for k in 1..=self.config.max_prox_iters {
            let alpha = self.config.alpha0 * self.config.growth.powi(k as i32 - 1);
            let newton_iters = self.step(k, alpha, None)?;
            let mut rec = IterationRecord::new(k, alpha);
            rec.newton_iters = newton_iters;

            sum_alpha += alpha;
            for (s, &v) in usum.iter_mut().zip(&self.u) {
                *s += alpha * v;
            }
            let u_avg: Vec<f64> = usum.iter().map(|s| s / sum_alpha).collect();

            if let Some(prev) = &u_prev {
                rec.du_l2 = l2_diff(mesh, &self.v_space, &self.u, prev);
                rec.du_h1 = h1_semi_diff(mesh, &self.v_space, &self.u, prev);
            }
            if let Some(prev) = &avg_prev {
                rec.du_avg_l2 = l2_diff(mesh, &self.v_space, &u_avg, prev);
                rec.du_avg_h1 = h1_semi_diff(mesh, &self.v_space, &u_avg, prev);
            }
            if let Some(exact) = &self.problem.exact {
                rec.err_u_l2 = Some(l2_error(mesh, &self.v_space, &self.u, &*exact.u, 6));
                rec.err_avg_l2 = Some(l2_error(mesh, &self.v_space, &u_avg, &*exact.u, 6));
                rec.err_flux_l2 =
                    Some(h1_semi_error(mesh, &self.v_space, &self.u, &*exact.grad_u, 6));
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
            if let Some(h) = history.as_mut() {
                h.push((alpha, self.u.clone()));
            }
            u_prev = Some(self.u.clone());
            avg_prev = Some(u_avg);

            if diff <= self.config.stop_tol {
                converged = true;
                break;
            }
        }
        if !converged && self.config.require_convergence {
            return Err(PgError::MaxProxIters { max: self.config.max_prox_iters, last_diff });
        }

        let u_avg = usum.iter().map(|s| s / sum_alpha).collect();
        Ok(PgRun {
            v_space: self.v_space,
            w_space: self.w_space,
            u: self.u,
            psi: self.psi,
            psi0,
            delta_last: self.last_delta.take().unwrap_or_default(),
            u_avg,
            sum_alpha,
            iterations,
            converged,
            history,
        })
    }
}

/// Runs the conforming solver on a problem.
pub fn run(problem: &VIProblem, pair: PairKind, config: PgConfig) -> Result<PgRun, PgError> {
    ConformingPg::new(problem, pair, config)?.run()
}

/// Evaluates the observable field of a latent solution at a point.
pub fn observable_at(
    mesh: &SimplicialMesh,
    w_space: &DiscreteSpace,
    map: &crate::entropy::LegendreMap,
    psi: &[f64],
    cell: usize,
    bary: [f64; 3],
) -> f64 {
    let geom = CellGeometry::new(mesh, cell);
    let bw = scalar_basis(w_space.kind, &geom, bary);
    let mut dofs = Vec::new();
    w_space.cell_dofs(mesh, cell, &mut dofs);
    let psi_x: f64 = (0..bw.n).map(|i| psi[dofs[i]] * bw.values[i]).sum();
    map.grad_dual(psi_x, geom.point(bary))
}
