//! Fixed-duration baseline: identical to the Metropolis-adjusted
//! randomized-duration chain except the travel time is the constant
//! `mean_duration` every step. Mixing quality is sensitive to that constant
//! (near-periodic trajectories can stall an observable), which is exactly
//! what the randomized durations avoid.

use super::{rt_chmc::run_adjusted, ChainRecord, SamplerConfig};
use crate::manifold::ConstraintManifold;
use crate::targets::TargetDensity;
use crate::{DVec, Result};

/// Metropolis-adjusted chain with deterministic travel time
/// `T = cfg.mean_duration`.
pub fn rmhmc_fixed(
    manifold: &dyn ConstraintManifold,
    target: &dyn TargetDensity,
    x0: &DVec,
    cfg: &SamplerConfig,
) -> Result<ChainRecord> {
    run_adjusted(manifold, target, x0, cfg, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Sphere;
    use crate::samplers::duration_steps;
    use crate::targets::Uniform;

    #[test]
    fn fixed_duration_is_recorded_every_step() {
        let sphere = Sphere::ambient(3);
        let target = Uniform::new(3);
        let cfg = SamplerConfig {
            n_samples: 50,
            mean_duration: 0.09,
            dt_max: 0.01,
            seed: 3,
            ..Default::default()
        };
        let x0 = DVec::from_column_slice(&[1.0, 0.0, 0.0]);
        let record = rmhmc_fixed(&sphere, &target, &x0, &cfg).unwrap();
        assert!(record.durations.iter().all(|&t| t == 0.09));
    }

    #[test]
    fn single_step_when_duration_equals_ceiling() {
        let (l, h) = duration_steps(0.01, 0.01);
        assert_eq!(l, 1);
        assert_eq!(h, 0.01);
    }

    #[test]
    fn determinism() {
        let sphere = Sphere::ambient(4);
        let target = Uniform::new(4);
        let cfg = SamplerConfig {
            n_samples: 100,
            mean_duration: 0.07,
            dt_max: 0.01,
            seed: 12,
            ..Default::default()
        };
        let x0 = DVec::from_column_slice(&[0.0, 1.0, 0.0, 0.0]);
        let a = rmhmc_fixed(&sphere, &target, &x0, &cfg).unwrap();
        let b = rmhmc_fixed(&sphere, &target, &x0, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
