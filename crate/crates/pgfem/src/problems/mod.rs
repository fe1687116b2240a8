//! Benchmark problem definitions: coefficients, boundary data, constraints,
//! and exact solutions where available.

mod biactive;
mod circular;
mod dam;
mod hemker;
mod heston;
mod semipermeable;

pub use biactive::biactive_problem;
pub use circular::{circular_obstacle_problem, contact_radius, lambert_w_minus1};
pub use dam::{dam_problem, free_surface_extract, DamError, DamGeometry, DamResult, DamSecant, SecantRecord};
pub use hemker::{hemker_mesh_text, hemker_problem, hemker_problem_with_eps};
pub use heston::{heston_option_problem, HestonParams, HestonSetup};
pub use semipermeable::{channel_mesh_text, semipermeable_problem, semipermeable_velocity};

use crate::entropy::LegendreMap;
use crate::mesh::SimplicialMesh;
use crate::Point;

pub type ScalarField = Box<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Box<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type MatrixField = Box<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;

/// Where the inequality constraint acts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintLocus {
    Volume,
    BoundaryTag(String),
}

/// Exact solution attached to a problem for error reporting.
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad_u: VectorField,
}

/// A variational inequality: operator coefficients, data, constraint, and
/// optional exact solution.
pub struct VIProblem {
    pub name: String,
    pub mesh: SimplicialMesh,
    pub kappa: MatrixField,
    pub beta: VectorField,
    pub reaction: ScalarField,
    pub source: ScalarField,
    /// Coefficient of the antisymmetric form `s(x) (u_x v_y - v_x u_y)`.
    pub skew: Option<ScalarField>,
    pub dirichlet: Vec<(String, ScalarField)>,
    /// Natural boundary load terms `(g, v)` per tag.
    pub neumann: Vec<(String, ScalarField)>,
    pub constraint: LegendreMap,
    pub locus: ConstraintLocus,
    pub exact: Option<ExactSolution>,
}

impl VIProblem {
    pub fn dirichlet_tags(&self) -> Vec<&str> {
        self.dirichlet.iter().map(|(t, _)| t.as_str()).collect()
    }

    pub fn neumann_tags(&self) -> Vec<&str> {
        self.neumann.iter().map(|(t, _)| t.as_str()).collect()
    }

    /// Flux of the exact solution, `q* = -kappa grad u`.
    pub fn exact_flux(&self, x: Point) -> Option<[f64; 2]> {
        self.exact.as_ref().map(|e| {
            let g = (e.grad_u)(x);
            let k = (self.kappa)(x);
            [-(k[0][0] * g[0] + k[0][1] * g[1]), -(k[1][0] * g[0] + k[1][1] * g[1])]
        })
    }
}

/// Identity diffusion tensor.
pub fn identity_kappa() -> MatrixField {
    Box::new(|_| [[1.0, 0.0], [0.0, 1.0]])
}

pub fn constant_kappa(k: f64) -> MatrixField {
    Box::new(move |_| [[k, 0.0], [0.0, k]])
}

pub fn zero_scalar() -> ScalarField {
    Box::new(|_| 0.0)
}

pub fn zero_vector() -> VectorField {
    Box::new(|_| [0.0, 0.0])
}
