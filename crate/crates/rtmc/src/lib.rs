//! Markov chain Monte Carlo on algebraically constrained manifolds.
//!
//! This crate samples distributions defined with respect to the Hausdorff
//! (surface) measure of embedded manifolds `M = {x in R^n : c(x) = 0}`.
//! The main driver is a constrained Hamiltonian Monte Carlo scheme whose
//! trajectory duration between momentum refreshments is exponentially
//! distributed, which keeps mixing quality flat across a wide band of
//! duration parameters instead of degrading at resonant choices.
//!
//! The pieces:
//!
//! - [`manifold`]: constraint manifolds (spheres, Stiefel, products) with
//!   Jacobians, tangent projectors and tangent-space Gaussian sampling.
//! - [`integrators`]: constrained symplectic integration (RATTLE with
//!   Gauss-Seidel multiplier cycling), exact great-circle flow on spheres,
//!   and the trajectory reversibility check.
//! - [`targets`]: potentials `U(x) = -log pi(x)` and ambient gradients.
//! - [`samplers`]: the randomized-duration Metropolis-adjusted chain, its
//!   unadjusted variant, a fixed-duration baseline, an exact rejection-free
//!   sampler for the uniform law on spheres, and constrained underdamped
//!   Langevin (BAOAB splitting).
//! - [`diagnostics`]: autocovariance, integrated autocorrelation, effective
//!   sample size, Monte Carlo error bars, and covariance-matrix metrics.
//! - [`covest`]: Bayesian low-rank-plus-diagonal covariance estimation on
//!   a Stiefel product manifold.
//! - [`cli`]: the configuration-driven experiment harness behind the `rtmc`
//!   binary.

pub mod cli;
pub mod covest;
pub mod diagnostics;
pub mod error;
pub mod integrators;
pub mod manifold;
pub mod samplers;
pub mod targets;

pub use error::Error;

/// Dense column vector of `f64`, the ambient coordinate type.
pub type DVec = nalgebra::DVector<f64>;
/// Dense matrix of `f64`.
pub type DMat = nalgebra::DMatrix<f64>;

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
