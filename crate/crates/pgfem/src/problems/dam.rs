//! Dam seepage with a sloping wall: the transformed problem is a
//! non-symmetric VI on a fixed trapezoid whose Dirichlet data depend on the
//! unknown discharge; an outer secant iteration drives a compatibility
//! functional of the discrete solution to zero.

use super::{identity_kappa, ConstraintLocus, VIProblem};
use crate::entropy::LegendreMap;
use crate::mesh::SimplicialMesh;
use crate::norms::extract_level_polylines;
use crate::pg::{self, PairKind, PgConfig, PgError, PgRun};
use crate::space::{scalar_basis, CellGeometry, SpaceKind};
use crate::Point;
use thiserror::Error;

#[derive(Debug, Clone, Copy)]
pub struct DamGeometry {
    pub a_l: f64,
    pub h_l: f64,
    pub a_r: f64,
    pub h_r: f64,
    /// Probe offset of the compatibility functional.
    pub h0: f64,
}

impl Default for DamGeometry {
    fn default() -> Self {
        Self { a_l: 1.0, h_l: 1.0, a_r: 3.0, h_r: 0.0, h0: 0.05 }
    }
}

impl DamGeometry {
    pub fn mesh(&self, nx: usize, ny: usize) -> SimplicialMesh {
        SimplicialMesh::sheared_quadrilateral(
            nx,
            ny,
            [
                [0.0, 0.0],
                [self.a_r, 0.0],
                [self.a_r, self.h_l],
                [self.a_l, self.h_l],
            ],
        )
        .expect("valid trapezoid")
    }
}

/// The VI for a given trial discharge `q`.
pub fn dam_problem(geom: DamGeometry, q: f64, nx: usize, ny: usize) -> VIProblem {
    let mesh = geom.mesh(nx, ny);
    let (a_l, h_l, a_r, h_r) = (geom.a_l, geom.h_l, geom.a_r, geom.h_r);
    let skew = h_l / a_l;
    let neumann_coef = (a_l * a_l + h_l * h_l).sqrt() / a_l;
    let g_bottom = move |p: Point| -q * (p[0] - a_r) + 0.5 * h_r * h_r;
    let g_right = move |p: Point| {
        if p[1] <= h_r {
            0.5 * (h_r - p[1]) * (h_r - p[1])
        } else {
            0.0
        }
    };
    VIProblem {
        name: "dam".to_string(),
        mesh,
        kappa: identity_kappa(),
        beta: Box::new(|_| [0.0, 0.0]),
        reaction: Box::new(|_| 0.0),
        source: Box::new(|_| -1.0),
        skew: Some(Box::new(move |_| skew)),
        dirichlet: vec![
            ("bottom".to_string(), Box::new(g_bottom)),
            ("right".to_string(), Box::new(g_right)),
            ("top".to_string(), Box::new(|_| 0.0)),
        ],
        // oblique wall datum: on the submerged wall the potential satisfies
        // sqrt(a^2+h^2)/a * u_y = g with u_y = -(h_l - y), so g is negative
        // below the water line
        neumann: vec![(
            "sloping".to_string(),
            Box::new(move |p: Point| neumann_coef * (p[1] - h_l)),
        )],
        constraint: LegendreMap::lower(Box::new(|_| 0.0)),
        locus: ConstraintLocus::Volume,
        exact: None,
    }
}

#[derive(Debug, Error)]
pub enum DamError {
    #[error("secant iteration diverging: |f| grew for three consecutive steps")]
    SecantDiverging,
    #[error("secant did not reach |f| <= {tol:.1e} in {max} outer iterations")]
    SecantStalled { tol: f64, max: usize },
    #[error("probe point ({0}, {1}) not inside the mesh")]
    ProbeOutsideMesh(f64, f64),
    #[error(transparent)]
    Pg(#[from] PgError),
}

#[derive(Debug, Clone)]
pub struct SecantRecord {
    pub r: usize,
    pub q: f64,
    pub f_q: f64,
    pub inner_iters: usize,
}

pub struct DamResult {
    pub records: Vec<SecantRecord>,
    pub q_final: f64,
    pub final_run: PgRun,
    pub mesh: SimplicialMesh,
}

/// Outer secant loop on the discharge.
pub struct DamSecant {
    pub geom: DamGeometry,
    pub nx: usize,
    pub ny: usize,
    pub q0: f64,
    pub q1: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub pg_config: PgConfig,
}

impl Default for DamSecant {
    fn default() -> Self {
        let geom = DamGeometry::default();
        // axis spacing ~ h0
        let nx = (geom.a_r / geom.h0).round() as usize;
        let ny = (geom.h_l / geom.h0).round() as usize;
        Self {
            geom,
            nx,
            ny,
            q0: 0.25,
            q1: 0.30,
            tol: 1e-6,
            max_outer: 10,
            pg_config: PgConfig {
                alpha0: 1.2,
                growth: 1.2,
                stop_tol: 1e-10,
                max_prox_iters: 120,
                ..PgConfig::default()
            },
        }
    }
}

impl DamSecant {
    /// Solves the VI for one discharge and evaluates the compatibility
    /// functional `f(q) = -h0 (du/dy(a_l, h_l - h0/2) + h0/2)`.
    pub fn evaluate(&self, q: f64) -> Result<(f64, PgRun, SimplicialMesh), DamError> {
        let problem = dam_problem(self.geom, q, self.nx, self.ny);
        let run = pg::run(&problem, PairKind::P1BubbleP0, self.pg_config.clone())?;
        let probe = [self.geom.a_l, self.geom.h_l - self.geom.h0 / 2.0];
        let dy = p1_gradient_y(&problem.mesh, &run, probe)
            .ok_or(DamError::ProbeOutsideMesh(probe[0], probe[1]))?;
        let f = -self.geom.h0 * (dy + self.geom.h0 / 2.0);
        Ok((f, run, problem.mesh))
    }

    pub fn run(&self) -> Result<DamResult, DamError> {
        let mut records = Vec::new();
        let (f0, run0, mesh0) = self.evaluate(self.q0)?;
        records.push(SecantRecord {
            r: 0,
            q: self.q0,
            f_q: f0,
            inner_iters: run0.prox_iters(),
        });
        if f0.abs() <= self.tol {
            return Ok(DamResult { records, q_final: self.q0, final_run: run0, mesh: mesh0 });
        }
        let (f1, run1, mesh1) = self.evaluate(self.q1)?;
        records.push(SecantRecord {
            r: 1,
            q: self.q1,
            f_q: f1,
            inner_iters: run1.prox_iters(),
        });
        let mut state = (self.q0, f0, self.q1, f1, run1, mesh1);
        let mut growth_streak = 0usize;
        for r in 2..=self.max_outer {
            let (qa, fa, qb, fb, _, _) = &state;
            let q_next = qb - (qb - qa) / (fb - fa) * fb;
            let (f_next, run_next, mesh_next) = self.evaluate(q_next)?;
            records.push(SecantRecord {
                r,
                q: q_next,
                f_q: f_next,
                inner_iters: run_next.prox_iters(),
            });
            if f_next.abs() > state.3.abs() {
                growth_streak += 1;
                if growth_streak >= 3 {
                    return Err(DamError::SecantDiverging);
                }
            } else {
                growth_streak = 0;
            }
            let fb_old = state.3;
            let qb_old = state.2;
            state = (qb_old, fb_old, q_next, f_next, run_next, mesh_next);
            if f_next.abs() <= self.tol {
                let (_, _, q_final, _, final_run, mesh) = state;
                return Ok(DamResult { records, q_final, final_run, mesh });
            }
        }
        Err(DamError::SecantStalled { tol: self.tol, max: self.max_outer })
    }
}

/// y-derivative of the P1 part of the solution in the cell containing `p`.
fn p1_gradient_y(mesh: &SimplicialMesh, run: &PgRun, p: Point) -> Option<f64> {
    let cell = mesh.locate(p, 1e-10)?;
    let geom = CellGeometry::new(mesh, cell);
    let b = scalar_basis(SpaceKind::P1, &geom, mesh.barycentric(cell, p));
    let mut dy = 0.0;
    for (local, &v) in mesh.cells[cell].iter().enumerate() {
        // vertex dofs of the bubble-enriched space are the vertex ids
        dy += run.u[v] * b.gradients[local][1];
    }
    Some(dy)
}

/// Level-set polyline of the P1 part of a converged dam solution, sorted by
/// x (the free surface). Levels outside the field's range give an empty
/// polyline.
pub fn free_surface_extract(mesh: &SimplicialMesh, run: &PgRun, level: f64) -> Vec<Point> {
    let nodal: Vec<f64> = run.u[..mesh.n_vertices()].to_vec();
    let polys = extract_level_polylines(mesh, &nodal, level);
    let mut points: Vec<Point> = polys.into_iter().flatten().collect();
    points.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    points
}
