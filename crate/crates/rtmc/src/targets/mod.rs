//! Target distributions as potentials `U(x) = -log pi(x)` with ambient
//! gradients, under the isometric-embedding convention: the Hamiltonian is
//! `H(x, v) = U(x) + v.v / 2` with `v` tangent to the manifold, so no metric
//! tensor ever appears. Normalization constants are dropped throughout.

mod bvmf;
mod spiked_cov;
mod vmf_stiefel;

pub use bvmf::Bvmf;
pub use spiked_cov::SpikedCov;
pub use vmf_stiefel::VmfStiefel;

use crate::manifold::PhasePoint;
use crate::DVec;

/// A potential and its ambient gradient.
pub trait TargetDensity: Send + Sync {
    /// Ambient dimension the target is defined on.
    fn dim(&self) -> usize;

    /// `U(x) = -log pi(x)` up to an additive constant. May return
    /// `f64::INFINITY` where the density vanishes or cannot be evaluated;
    /// the Metropolis step then rejects the proposal.
    fn potential(&self, x: &DVec) -> f64;

    /// Writes the ambient gradient of `U` into `out`.
    fn gradient_into(&self, x: &DVec, out: &mut DVec);

    fn gradient(&self, x: &DVec) -> DVec {
        let mut out = DVec::zeros(self.dim());
        self.gradient_into(x, &mut out);
        out
    }

    fn name(&self) -> &str;
}

/// Total energy `H(x, v) = U(x) + v.v / 2`.
pub fn hamiltonian(target: &dyn TargetDensity, state: &PhasePoint) -> f64 {
    target.potential(&state.x) + 0.5 * state.v.dot(&state.v)
}

/// The uniform law (`U = 0`) in `dim` ambient coordinates.
#[derive(Debug, Clone)]
pub struct Uniform {
    dim: usize,
}

impl Uniform {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl TargetDensity for Uniform {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, _x: &DVec) -> f64 {
        0.0
    }

    fn gradient_into(&self, _x: &DVec, out: &mut DVec) {
        out.fill(0.0);
    }

    fn name(&self) -> &str {
        "uniform"
    }
}
