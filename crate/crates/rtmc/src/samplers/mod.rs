//! MCMC drivers on constraint manifolds.
//!
//! All chains share the same phase-space mechanics: momentum is refreshed
//! from the tangent-space Gaussian, the constrained Hamiltonian flow is
//! integrated for some duration `T`, and (in the adjusted variants) the
//! flipped endpoint is accepted with probability `min{1, exp(H - H*)}`.
//! Discretization follows one rule everywhere: `L = ceil(T / dt_max)` steps
//! of size `h = T / L`, so the stepsize never exceeds `dt_max` and the
//! travel time is hit exactly.
//!
//! The randomized-duration samplers draw `T` exponentially with mean
//! [`SamplerConfig::mean_duration`] (event rate `1/mean_duration`); the
//! fixed-duration baseline uses `T = mean_duration` every step. Chains are
//! deterministic given the configuration and seed.

mod exact_sphere;
mod gbaoab;
mod rmhmc;
mod rt_chmc;

pub use exact_sphere::rt_rmhmc_exact_sphere;
pub use gbaoab::{gbaoab, LangevinConfig};
pub use rmhmc::rmhmc_fixed;
pub use rt_chmc::{rt_chmc_metropolis, rt_chmc_unadjusted, Thinning};

use crate::manifold::DEFAULT_FEASIBILITY_TOL;
use crate::{DVec, Error, Result};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Shared configuration of the Hamiltonian-flow samplers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Expected travel time between momentum refreshments (the inverse of
    /// the event rate).
    pub mean_duration: f64,
    /// Stepsize ceiling for the discretized flow.
    pub dt_max: f64,
    /// Number of recorded samples.
    pub n_samples: usize,
    /// RNG seed; identical seeds give bitwise-identical chains.
    pub seed: u64,
    /// Constraint residual bound of the position solve.
    pub shake_tol: f64,
    /// Tolerance of the trajectory reversibility check (joint infinity norm
    /// over position and velocity).
    pub rev_tol: f64,
    /// Whether the reversibility check runs on every proposal.
    pub enable_rev_check: bool,
    /// Ambient index ranges where negative proposal coordinates are
    /// rejected (inequality constraints via rejection).
    pub nonneg_blocks: Vec<Range<usize>>,
    /// Sweep cap of the position solve.
    pub shake_max_iters: usize,
    /// Added to the Gram diagonal in the velocity solve.
    pub gram_regularization: f64,
    /// Feasibility tolerance on the initial state.
    pub feasibility_tol: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mean_duration: 0.1,
            dt_max: 1e-3,
            n_samples: 1000,
            seed: 0,
            shake_tol: 1e-10,
            rev_tol: 1e-8,
            enable_rev_check: false,
            nonneg_blocks: Vec::new(),
            shake_max_iters: 500,
            gram_regularization: 0.0,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
        }
    }
}

impl SamplerConfig {
    pub(crate) fn rattle(&self, stepsize: f64) -> crate::integrators::RattleConfig {
        crate::integrators::RattleConfig {
            stepsize,
            shake_tol: self.shake_tol,
            shake_max_iters: self.shake_max_iters,
            gram_regularization: self.gram_regularization,
        }
    }
}

/// Recorded output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    /// Ambient positions, one per recorded sample.
    pub samples: Vec<DVec>,
    /// Acceptance flag per step (always true for rejection-free chains).
    pub accepted: Vec<bool>,
    /// Total energy of each proposal (NaN where the position solve failed
    /// and no proposal existed).
    pub energy: Vec<f64>,
    /// Travel time drawn for each step.
    pub durations: Vec<f64>,
    /// Fraction of accepted steps.
    pub acceptance_rate: f64,
    /// Proposals rejected by the reversibility check.
    pub rev_failures: usize,
    /// Proposals rejected because the position solve did not converge.
    pub shake_failures: usize,
}

impl ChainRecord {
    pub(crate) fn with_capacity(n: usize) -> Self {
        Self {
            samples: Vec::with_capacity(n),
            accepted: Vec::with_capacity(n),
            energy: Vec::with_capacity(n),
            durations: Vec::with_capacity(n),
            acceptance_rate: 0.0,
            rev_failures: 0,
            shake_failures: 0,
        }
    }

    pub(crate) fn finalize(&mut self) {
        let n = self.accepted.len();
        self.acceptance_rate = if n == 0 {
            0.0
        } else {
            self.accepted.iter().filter(|&&a| a).count() as f64 / n as f64
        };
    }

    /// Evaluates an observable over all samples.
    pub fn observable<F: FnMut(&DVec) -> f64>(&self, mut f: F) -> Vec<f64> {
        self.samples.iter().map(|x| f(x)).collect()
    }
}

/// Metropolis acceptance probability `min{1, exp(delta_h)}` for
/// `delta_h = H(current) - H(proposal)`. NaN energies reject.
pub fn metropolis_accept_probability(delta_h: f64) -> f64 {
    if delta_h.is_nan() {
        0.0
    } else {
        delta_h.exp().min(1.0)
    }
}

/// Exponential travel time with the given mean.
pub(crate) fn draw_duration<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    let standard: f64 = rng.sample(Exp1);
    mean * standard
}

/// Steps and stepsize for travel time `t` under ceiling `dt_max`:
/// `L = ceil(t / dt_max)`, `h = t / L`.
pub fn duration_steps(t: f64, dt_max: f64) -> (usize, f64) {
    let l = (t / dt_max).ceil().max(1.0) as usize;
    (l, t / l as f64)
}

/// True when any coordinate inside the listed ranges is negative.
pub(crate) fn violates_nonneg(x: &DVec, blocks: &[Range<usize>]) -> bool {
    blocks
        .iter()
        .any(|r| x.as_slice()[r.start..r.end].iter().any(|&v| v < 0.0))
}

pub(crate) fn check_initial_state(
    manifold: &dyn crate::manifold::ConstraintManifold,
    x0: &DVec,
    tol: f64,
) -> Result<()> {
    if x0.len() != manifold.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: manifold.ambient_dim(),
            got: x0.len(),
        });
    }
    let residual = manifold.constraint_residual_inf(x0);
    if residual > tol {
        return Err(Error::OffManifold { residual, tol });
    }
    Ok(())
}
