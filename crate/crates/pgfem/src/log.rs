//! Per-iteration records produced by the proximal solvers.

/// One proximal iteration of either solver family.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub alpha: f64,
    pub newton_iters: usize,
    /// Successive difference of the raw iterate, L2 norm.
    pub du_l2: f64,
    /// Successive difference of the raw iterate, (broken) H1 seminorm.
    pub du_h1: f64,
    /// Successive difference of the weighted average, L2 norm.
    pub du_avg_l2: f64,
    /// Successive difference of the weighted average, H1 seminorm.
    pub du_avg_h1: f64,
    /// Errors against the attached exact solution, when available.
    pub err_u_l2: Option<f64>,
    pub err_avg_l2: Option<f64>,
    pub err_flux_l2: Option<f64>,
    /// Constraint margins of the observable at quadrature points:
    /// min(o - phi1) and min(phi2 - o); positive by construction.
    pub feas_lower: f64,
    pub feas_upper: f64,
    /// Range of the observable over quadrature points.
    pub dmp_min: f64,
    pub dmp_max: f64,
}

impl IterationRecord {
    pub fn new(k: usize, alpha: f64) -> Self {
        Self {
            k,
            alpha,
            newton_iters: 0,
            du_l2: f64::INFINITY,
            du_h1: f64::INFINITY,
            du_avg_l2: f64::INFINITY,
            du_avg_h1: f64::INFINITY,
            err_u_l2: None,
            err_avg_l2: None,
            err_flux_l2: None,
            feas_lower: f64::INFINITY,
            feas_upper: f64::INFINITY,
            dmp_min: f64::INFINITY,
            dmp_max: f64::NEG_INFINITY,
        }
    }
}
