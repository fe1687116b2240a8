//! Finite element solvers for non-symmetric variational inequalities.
//!
//! The crate provides two solver families built around latent-variable
//! proximal iterations:
//!
//! - [`pg`]: the conforming proximal Galerkin iteration on H¹ spaces,
//! - [`fospg`]: the hybridized first-order-system variant with broken
//!   Raviart-Thomas fluxes, DG primal fields, facet multipliers, and
//!   upwinded advection.
//!
//! Supporting layers: [`mesh`] (2D simplicial meshes with tagged
//! boundaries), [`space`] and [`assemble`] (dof management and form
//! assembly), [`sparse`] (direct solves and static condensation),
//! [`entropy`] (pointwise Legendre maps and Bregman distances), and
//! [`problems`] (the benchmark suite: obstacle problems, American option
//! pricing, semi-permeable membranes, discrete maximum principles, and
//! the dam free-boundary problem).

pub mod assemble;
pub mod dense;
pub mod entropy;
pub mod fospg;
pub mod log;
pub mod mesh;
pub mod norms;
pub mod pg;
pub mod problems;
pub mod quadrature;
pub mod reconstruct;
pub mod space;
pub mod sparse;

/// A point in the plane.
pub type Point = [f64; 2];
