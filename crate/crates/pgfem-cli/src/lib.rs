//! Library surface of the benchmark driver: config parsing, experiment
//! execution, and field output (used by the `pgfem` binary and its tests).

pub mod config;
pub mod experiment;
pub mod vtk;
