//! Numerical laboratory for the planar logarithmic free energy
//! `F = c∫ρ log(ρ/M) + a∫log(1+|x|²)ρ − (b/M)∬ρ(x)ρ(y)log|x−y|`
//! and the Schrödinger–Poisson energy with logarithmic nonlinearity.

pub mod error;
pub mod flow;
pub mod cli;
pub mod closedforms;
pub mod divergence;
pub mod functionals;
pub mod grids;
pub mod groundstate;
pub mod inequalities;

pub use error::{Error, Result};
