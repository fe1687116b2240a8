//! American put option pricing under a stochastic-volatility model:
//! a parabolic VI in log-price and variance, marched by backward Euler with
//! the hybrid solver in space. The divergence of the drift field is moved
//! into the reaction term so the advective form can assume a solenoidal
//! field.

use super::{ConstraintLocus, VIProblem};
use crate::entropy::LegendreMap;
use crate::fospg::{FospgConfig, FospgError, FospgSolver};
use crate::mesh::{Diagonal, SimplicialMesh};
use crate::pg::{StopIterate, StopMetric};
use crate::space::{scalar_basis, CellGeometry};
use crate::Point;

#[derive(Debug, Clone, Copy)]
pub struct HestonParams {
    pub strike: f64,
    pub rate: f64,
    pub t_final: f64,
    pub mean_reversion: f64,
    pub long_term_variance: f64,
    pub vol_of_vol: f64,
    pub correlation: f64,
}

impl Default for HestonParams {
    fn default() -> Self {
        Self {
            strike: 10.0,
            rate: 0.1,
            t_final: 0.25,
            mean_reversion: 5.0,
            long_term_variance: 0.16,
            vol_of_vol: 0.9,
            correlation: 0.1,
        }
    }
}

/// Spatial problem plus time-stepping parameters.
pub struct HestonSetup {
    pub problem: VIProblem,
    pub params: HestonParams,
    pub n_time_steps: usize,
    pub solver_config: FospgConfig,
}

/// Geometrically graded coordinates on [lo, hi] clustering around `center`.
fn sinh_graded(lo: f64, hi: f64, center: f64, n: usize, gamma: f64) -> Vec<f64> {
    // map [-1, 1] through sinh, then shift/scale so ends hit [lo, hi]
    let mut xs = Vec::with_capacity(n + 1);
    let s = |t: f64| (gamma * t).sinh() / gamma.sinh();
    let span_lo = center - lo;
    let span_hi = hi - center;
    for i in 0..=n {
        let t = -1.0 + 2.0 * i as f64 / n as f64;
        let v = s(t);
        xs.push(if v < 0.0 { center + span_lo * v } else { center + span_hi * v });
    }
    xs[0] = lo;
    xs[n] = hi;
    xs
}

/// One-sided grading clustering near `lo`.
fn sinh_graded_low(lo: f64, hi: f64, n: usize, gamma: f64) -> Vec<f64> {
    let mut xs = Vec::with_capacity(n + 1);
    let s = |t: f64| (gamma * t).sinh() / gamma.sinh();
    for i in 0..=n {
        let t = i as f64 / n as f64;
        xs.push(lo + (hi - lo) * s(t));
    }
    xs[0] = lo;
    xs[n] = hi;
    xs
}

/// Default benchmark setup: graded structured mesh with `nx x ny` intervals.
pub fn heston_option_problem(nx: usize, ny: usize, n_time_steps: usize) -> HestonSetup {
    let params = HestonParams::default();
    let x_lo = 0.01f64.ln();
    let x_hi = 100.0f64.ln();
    let v_lo = 1e-6;
    let v_hi = 5.0;
    let xs = sinh_graded(x_lo, x_hi, 0.0, nx, 4.0);
    let ys = sinh_graded_low(v_lo, v_hi, ny, 3.5);
    let mesh = SimplicialMesh::structured_rectangle_with_coords(&xs, &ys, Diagonal::Slash)
        .expect("graded coordinates are strictly increasing");

    let p = params;
    let kappa = move |pt: Point| -> [[f64; 2]; 2] {
        let v = pt[1];
        [
            [0.5 * v, 0.5 * v * p.correlation * p.vol_of_vol],
            [0.5 * v * p.correlation * p.vol_of_vol, 0.5 * v * p.vol_of_vol * p.vol_of_vol],
        ]
    };
    let beta = move |pt: Point| -> [f64; 2] {
        let v = pt[1];
        [
            -p.rate + 0.5 * v + 0.5 * p.correlation * p.vol_of_vol,
            -p.mean_reversion * (p.long_term_variance - v) + 0.5 * p.vol_of_vol * p.vol_of_vol,
        ]
    };
    // div(beta) = mean_reversion, shifted out of the advection into the
    // reaction: r u -> (r - omega) u
    let reaction = move |_: Point| p.rate - p.mean_reversion;
    let strike = p.strike;
    let payoff = move |pt: Point| -> f64 { (strike - strike * pt[0].exp()).max(0.0) };

    let problem = VIProblem {
        name: "heston_option".to_string(),
        mesh,
        kappa: Box::new(kappa),
        beta: Box::new(beta),
        reaction: Box::new(reaction),
        source: Box::new(|_| 0.0),
        skew: None,
        dirichlet: vec![
            ("left".to_string(), Box::new(payoff)),
            ("bottom".to_string(), Box::new(payoff)),
        ],
        neumann: vec![
            ("right".to_string(), Box::new(|_| 0.0)),
            ("top".to_string(), Box::new(|_| 0.0)),
        ],
        constraint: LegendreMap::lower(Box::new(payoff)),
        locus: ConstraintLocus::Volume,
        exact: None,
    };
    // warm starts tolerate a large initial step size
    let solver_config = FospgConfig {
        p: 1,
        q: 0,
        alpha0: 4.0,
        growth: 2.0,
        stop_tol: 1e-6,
        stop_metric: StopMetric::L2,
        stop_iterate: StopIterate::Raw,
        max_prox_iters: 40,
        newton_tol: 1e-9,
        max_newton_iters: 50,
        initial_psi: 0.0,
        condensed: true,
        require_convergence: true,
    };
    HestonSetup { problem, params, n_time_steps, solver_config }
}

/// Final-time state of the march.
pub struct HestonSolution {
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    pub total_prox_iters: usize,
}

impl HestonSetup {
    fn payoff(&self, pt: Point) -> f64 {
        (self.params.strike - self.params.strike * pt[0].exp()).max(0.0)
    }

    /// Backward Euler march over time-to-maturity; the latent state is
    /// warm-started across steps.
    pub fn solve(&self) -> Result<HestonSolution, FospgError> {
        let dt = self.params.t_final / self.n_time_steps as f64;
        let sigma = 1.0 / dt;
        let mut solver =
            FospgSolver::new_with_shift(&self.problem, self.solver_config.clone(), sigma)?;
        // initial condition: the payoff, interpolated into the DG space
        let mesh = &self.problem.mesh;
        let mut u_prev = vec![0.0; solver.u_space.ndofs];
        let mut dofs = Vec::new();
        for c in 0..mesh.n_cells() {
            solver.u_space.cell_dofs(mesh, c, &mut dofs);
            let verts = mesh.cells[c];
            for (l, &d) in dofs.iter().enumerate() {
                u_prev[d] = self.payoff(mesh.vertices[verts[l]]);
            }
        }
        let mut total = 0;
        for _ in 0..self.n_time_steps {
            solver.set_transient_load(sigma, &u_prev);
            let run = solver.run()?;
            total += run.prox_iters();
            u_prev.copy_from_slice(solver.primal());
            // Warm-start clamp: the geometric step-size schedule drives the
            // latent field to huge magnitudes on the active set; cells whose
            // constraint must release in the next time step could then only
            // recover once alpha reaches that same scale. Clamping keeps the
            // latent responsive (exp(-30) ~ 1e-13 is still fully active).
            for p in solver.psi.iter_mut() {
                *p = p.clamp(-30.0, 30.0);
            }
        }
        Ok(HestonSolution {
            u: solver.primal().to_vec(),
            psi: solver.psi.clone(),
            total_prox_iters: total,
        })
    }

    /// Price read-out: the primal field evaluated at (ln(S/K), variance).
    pub fn price(&self, sol: &HestonSolution, asset: f64, variance: f64) -> f64 {
        let pt = [(asset / self.params.strike).ln(), variance];
        let mesh = &self.problem.mesh;
        let cell = mesh.locate(pt, 1e-9).expect("query point inside the domain");
        let geom = CellGeometry::new(mesh, cell);
        let b = scalar_basis(crate::space::SpaceKind::DgP1, &geom, mesh.barycentric(cell, pt));
        (0..3).map(|i| sol.u[3 * cell + i] * b.values[i]).sum()
    }

    /// Observable read-out at (ln(S/K), variance) from the latent field.
    pub fn latent_price(&self, sol: &HestonSolution, asset: f64, variance: f64) -> f64 {
        let pt = [(asset / self.params.strike).ln(), variance];
        let mesh = &self.problem.mesh;
        let cell = mesh.locate(pt, 1e-9).expect("query point inside the domain");
        self.problem.constraint.grad_dual(sol.psi[cell], pt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_coordinates_are_monotone_and_span() {
        let xs = sinh_graded(-4.6, 4.6, 0.0, 32, 3.0);
        assert_eq!(xs.len(), 33);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(xs[0], -4.6);
        assert_eq!(xs[32], 4.6);
        // clustering: central spacing much smaller than edge spacing
        let mid = xs[17] - xs[16];
        let edge = xs[32] - xs[31];
        assert!(mid * 3.0 < edge);
    }

    #[test]
    fn payoff_boundary_is_deep_in_the_money_value() {
        let setup = heston_option_problem(8, 6, 2);
        // at x1 = ln(0.01) the payoff is K - K * 0.01
        let v = setup.payoff([0.01f64.ln(), 0.2]);
        assert!((v - (10.0 - 0.1)).abs() < 1e-12);
    }
}
