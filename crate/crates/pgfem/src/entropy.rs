//! Pointwise Legendre maps for interval constraints.
//!
//! Each map carries (possibly spatially varying) obstacle bounds and
//! provides the conjugate gradient `grad_dual` (mapping any finite latent
//! value strictly into the constraint interval), its derivative, the primal
//! gradient, and Bregman distances.
//!
//! Overflow policy: latent values are clamped to |psi| <= 700 before
//! exponentiation (counted in a diagnostic), and results are nudged by one
//! ulp where rounding would land exactly on a bound, so `grad_dual` output
//! is strictly interior for every finite input.

use crate::Point;
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("argument {value} outside the closure of the constraint interval [{lo}, {hi}]")]
    OutsideDomain { value: f64, lo: f64, hi: f64 },
    #[error("argument {value} not in the interior of the constraint interval ({lo}, {hi})")]
    NotInterior { value: f64, lo: f64, hi: f64 },
}

/// Which side(s) of the constraint interval are finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVariant {
    Lower,
    Upper,
    Bilateral,
}

pub type ObstacleField = Box<dyn Fn(Point) -> f64 + Send + Sync>;

static CLAMP_COUNT: AtomicU64 = AtomicU64::new(0);

/// Number of latent-value clamps since process start (diagnostic).
pub fn clamp_count() -> u64 {
    CLAMP_COUNT.load(Ordering::Relaxed)
}

const PSI_CLAMP: f64 = 700.0;

fn clamp_psi(psi: f64) -> f64 {
    if psi.abs() > PSI_CLAMP {
        CLAMP_COUNT.fetch_add(1, Ordering::Relaxed);
        psi.clamp(-PSI_CLAMP, PSI_CLAMP)
    } else {
        psi
    }
}

/// Numerically stable logistic function.
fn sigmoid(psi: f64) -> f64 {
    if psi >= 0.0 {
        1.0 / (1.0 + (-psi).exp())
    } else {
        let e = psi.exp();
        e / (1.0 + e)
    }
}

/// sigmoid'(psi), stable for large |psi| (never underflows to zero for
/// |psi| <= 700).
fn sigmoid_derivative(psi: f64) -> f64 {
    let e = (-psi.abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

fn softplus(psi: f64) -> f64 {
    psi.max(0.0) + (-psi.abs()).exp().ln_1p()
}

/// Legendre map for a scalar interval constraint.
pub struct LegendreMap {
    pub variant: BoundVariant,
    phi1: ObstacleField,
    phi2: ObstacleField,
}

impl LegendreMap {
    /// Constraint `u >= phi1`.
    pub fn lower(phi1: ObstacleField) -> Self {
        Self { variant: BoundVariant::Lower, phi1, phi2: Box::new(|_| f64::INFINITY) }
    }

    /// Constraint `u <= phi2`.
    pub fn upper(phi2: ObstacleField) -> Self {
        Self { variant: BoundVariant::Upper, phi1: Box::new(|_| f64::NEG_INFINITY), phi2 }
    }

    /// Constraint `phi1 <= u <= phi2`.
    pub fn bilateral(phi1: ObstacleField, phi2: ObstacleField) -> Self {
        Self { variant: BoundVariant::Bilateral, phi1, phi2 }
    }

    pub fn lower_bound(&self, x: Point) -> f64 {
        (self.phi1)(x)
    }

    pub fn upper_bound(&self, x: Point) -> f64 {
        (self.phi2)(x)
    }

    /// Conjugate gradient map: strictly interior for every finite latent value.
    pub fn grad_dual(&self, psi: f64, x: Point) -> f64 {
        let psi = clamp_psi(psi);
        let v = match self.variant {
            BoundVariant::Lower => (self.phi1)(x) + psi.exp(),
            BoundVariant::Upper => (self.phi2)(x) - (-psi).exp(),
            BoundVariant::Bilateral => {
                let lo = (self.phi1)(x);
                let hi = (self.phi2)(x);
                lo + (hi - lo) * sigmoid(psi)
            }
        };
        // keep strictly inside the open interval under rounding
        let lo = (self.phi1)(x);
        let hi = (self.phi2)(x);
        let mut v = v;
        if v <= lo {
            v = next_up(lo);
        }
        if v >= hi {
            v = next_down(hi);
        }
        v
    }

    /// d/dpsi of `grad_dual`; strictly positive for every finite latent value.
    pub fn grad_dual_derivative(&self, psi: f64, x: Point) -> f64 {
        let psi = clamp_psi(psi);
        match self.variant {
            BoundVariant::Lower => psi.exp(),
            BoundVariant::Upper => (-psi).exp(),
            BoundVariant::Bilateral => ((self.phi2)(x) - (self.phi1)(x)) * sigmoid_derivative(psi),
        }
    }

    /// Primal gradient (inverse of `grad_dual` in the latent variable).
    pub fn grad_primal(&self, u: f64, x: Point) -> Result<f64, EntropyError> {
        let lo = (self.phi1)(x);
        let hi = (self.phi2)(x);
        if u <= lo || u >= hi {
            return Err(EntropyError::NotInterior { value: u, lo, hi });
        }
        Ok(match self.variant {
            BoundVariant::Lower => (u - lo).ln(),
            BoundVariant::Upper => -(hi - u).ln(),
            BoundVariant::Bilateral => (u - lo).ln() - (hi - u).ln(),
        })
    }

    /// Pointwise value of the Legendre function.
    pub fn entropy(&self, u: f64, x: Point) -> Result<f64, EntropyError> {
        let lo = (self.phi1)(x);
        let hi = (self.phi2)(x);
        if u < lo || u > hi {
            return Err(EntropyError::OutsideDomain { value: u, lo, hi });
        }
        let xlogx = |t: f64| if t == 0.0 { 0.0 } else { t * t.ln() };
        Ok(match self.variant {
            BoundVariant::Lower => xlogx(u - lo) - (u - lo),
            BoundVariant::Upper => xlogx(hi - u) - (hi - u),
            BoundVariant::Bilateral => xlogx(u - lo) + xlogx(hi - u),
        })
    }

    /// Convex conjugate of the Legendre function.
    pub fn conjugate(&self, psi: f64, x: Point) -> f64 {
        let psi = clamp_psi(psi);
        match self.variant {
            BoundVariant::Lower => psi.exp() + (self.phi1)(x) * psi,
            BoundVariant::Upper => (-psi).exp() + (self.phi2)(x) * psi,
            BoundVariant::Bilateral => {
                let lo = (self.phi1)(x);
                let hi = (self.phi2)(x);
                lo * psi + (hi - lo) * softplus(psi)
            }
        }
    }

    /// Bregman distance D(u, v); nonnegative, zero iff u = v.
    pub fn bregman(&self, u: f64, v: f64, x: Point) -> Result<f64, EntropyError> {
        let lo = (self.phi1)(x);
        let hi = (self.phi2)(x);
        if u < lo || u > hi {
            return Err(EntropyError::OutsideDomain { value: u, lo, hi });
        }
        let ru = self.entropy(u, x)?;
        let rv = self.entropy(v, x)?;
        let gv = self.grad_primal(v, x)?;
        Ok(ru - rv - gv * (u - v))
    }

    /// Dual Bregman distance D*(chi, psi).
    pub fn bregman_dual(&self, chi: f64, psi: f64, x: Point) -> f64 {
        self.conjugate(chi, x) - self.conjugate(psi, x) - self.grad_dual(psi, x) * (chi - psi)
    }

    /// Residual of the three-point identity
    /// D(u,v) − D(u,w) + D(v,w) − (∇R(v) − ∇R(w))(v − u); zero in exact
    /// arithmetic.
    pub fn three_point_residual(
        &self,
        u: f64,
        v: f64,
        w: f64,
        x: Point,
    ) -> Result<f64, EntropyError> {
        if v == w {
            // identical terms cancel exactly
            return Ok(0.0);
        }
        let lhs = self.bregman(u, v, x)? - self.bregman(u, w, x)? + self.bregman(v, w, x)?;
        let rhs = (self.grad_primal(v, x)? - self.grad_primal(w, x)?) * (v - u);
        Ok(lhs - rhs)
    }
}

fn next_up(v: f64) -> f64 {
    if v == f64::NEG_INFINITY {
        return v;
    }
    f64::from_bits(if v >= 0.0 { v.to_bits() + 1 } else { v.to_bits() - 1 })
}

fn next_down(v: f64) -> f64 {
    if v == f64::INFINITY {
        return v;
    }
    if v == 0.0 {
        return -f64::from_bits(1);
    }
    f64::from_bits(if v > 0.0 { v.to_bits() - 1 } else { v.to_bits() + 1 })
}
