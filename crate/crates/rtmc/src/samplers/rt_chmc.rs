//! Randomized-duration constrained HMC, with and without the Metropolis
//! adjustment.

use super::{
    check_initial_state, draw_duration, duration_steps, metropolis_accept_probability,
    violates_nonneg, ChainRecord, SamplerConfig,
};
use crate::integrators::{flow, momentum_flip, reversibility_check};
use crate::manifold::{sample_tangent_gaussian, ConstraintManifold, PhasePoint};
use crate::targets::TargetDensity;
use crate::{DVec, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How the unadjusted chain thins its trajectory into samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Thinning {
    /// One sample at the end of each exponential-duration trajectory.
    EventEndpoints,
    /// One sample after every integrator step.
    PerStep,
}

/// Metropolis-adjusted chain with exponentially distributed travel times.
///
/// Every step refreshes the momentum from the tangent Gaussian, draws
/// `T ~ Exp(1/mean_duration)`, integrates `L = ceil(T/dt_max)` constrained
/// steps of size `T/L`, flips the endpoint momentum, and accepts with
/// probability `min{1, exp(H - H*)}`. A failed position solve, a failed
/// (optional) reversibility check, and a negative coordinate inside a
/// `nonneg_blocks` range all reject the proposal.
pub fn rt_chmc_metropolis(
    manifold: &dyn ConstraintManifold,
    target: &dyn TargetDensity,
    x0: &DVec,
    cfg: &SamplerConfig,
) -> Result<ChainRecord> {
    run_adjusted(manifold, target, x0, cfg, true)
}

/// Shared driver for the randomized- and fixed-duration adjusted chains.
pub(crate) fn run_adjusted(
    manifold: &dyn ConstraintManifold,
    target: &dyn TargetDensity,
    x0: &DVec,
    cfg: &SamplerConfig,
    randomize_duration: bool,
) -> Result<ChainRecord> {
    check_initial_state(manifold, x0, cfg.feasibility_tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut record = ChainRecord::with_capacity(cfg.n_samples);
    let mut x = x0.clone();

    for _ in 0..cfg.n_samples {
        let v = sample_tangent_gaussian(manifold, &x, &mut rng)?;
        let t = if randomize_duration {
            draw_duration(&mut rng, cfg.mean_duration)
        } else {
            cfg.mean_duration
        };
        let (steps, h) = duration_steps(t, cfg.dt_max);
        let rattle = cfg.rattle(h);
        let start = PhasePoint::new(x.clone(), v);
        let result = flow(manifold, target, &start, &rattle, steps)?;
        record.durations.push(t);

        if !result.converged {
            record.shake_failures += 1;
            record.energy.push(f64::NAN);
            record.accepted.push(false);
            record.samples.push(x.clone());
            continue;
        }
        let proposal = momentum_flip(&result.end_state);
        record.energy.push(result.energy_end);

        if cfg.enable_rev_check
            && !reversibility_check(
                manifold, target, &start, &proposal, &rattle, steps, cfg.rev_tol,
            )?
        {
            record.rev_failures += 1;
            record.accepted.push(false);
            record.samples.push(x.clone());
            continue;
        }
        if violates_nonneg(&proposal.x, &cfg.nonneg_blocks) {
            record.accepted.push(false);
            record.samples.push(x.clone());
            continue;
        }
        let p_accept = metropolis_accept_probability(result.energy_start - result.energy_end);
        let u: f64 = rng.gen();
        if u < p_accept {
            x = proposal.x;
            record.accepted.push(true);
        } else {
            record.accepted.push(false);
        }
        record.samples.push(x.clone());
    }
    record.finalize();
    Ok(record)
}

/// Unadjusted randomized-duration chain: no momentum flip and no
/// accept/reject, so the invariant law carries an `O(h^2)` discretization
/// bias. A failed position solve aborts the run (there is no rejection
/// mechanism to absorb it).
pub fn rt_chmc_unadjusted(
    manifold: &dyn ConstraintManifold,
    target: &dyn TargetDensity,
    x0: &DVec,
    cfg: &SamplerConfig,
    thinning: Thinning,
) -> Result<ChainRecord> {
    check_initial_state(manifold, x0, cfg.feasibility_tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut record = ChainRecord::with_capacity(cfg.n_samples);
    let mut x = x0.clone();

    while record.samples.len() < cfg.n_samples {
        let v = sample_tangent_gaussian(manifold, &x, &mut rng)?;
        let t = draw_duration(&mut rng, cfg.mean_duration);
        let (steps, h) = duration_steps(t, cfg.dt_max);
        let rattle = cfg.rattle(h);
        record.durations.push(t);

        match thinning {
            Thinning::EventEndpoints => {
                let start = PhasePoint::new(x.clone(), v);
                let result = flow(manifold, target, &start, &rattle, steps)?;
                if !result.converged {
                    return Err(Error::ShakeDiverged {
                        step: record.samples.len(),
                    });
                }
                x = result.end_state.x;
                record.energy.push(result.energy_end);
                record.accepted.push(true);
                record.samples.push(x.clone());
            }
            Thinning::PerStep => {
                let mut state = PhasePoint::new(x.clone(), v);
                for _ in 0..steps {
                    if record.samples.len() >= cfg.n_samples {
                        break;
                    }
                    let result = flow(manifold, target, &state, &rattle, 1)?;
                    if !result.converged {
                        return Err(Error::ShakeDiverged {
                            step: record.samples.len(),
                        });
                    }
                    state = result.end_state;
                    record.energy.push(result.energy_end);
                    record.accepted.push(true);
                    record.samples.push(state.x.clone());
                }
                x = state.x;
            }
        }
    }
    record.finalize();
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Sphere;
    use crate::targets::{Bvmf, Uniform};

    fn north_pole() -> DVec {
        DVec::from_column_slice(&[0.0, 0.0, 1.0])
    }

    #[test]
    fn zero_potential_accepts_everything() {
        let sphere = Sphere::ambient(3);
        let target = Uniform::new(3);
        let cfg = SamplerConfig {
            n_samples: 200,
            dt_max: 1e-3,
            mean_duration: 0.05,
            seed: 1,
            ..Default::default()
        };
        let record = rt_chmc_metropolis(&sphere, &target, &north_pole(), &cfg).unwrap();
        assert_eq!(record.samples.len(), 200);
        assert_eq!(record.acceptance_rate, 1.0);
        assert_eq!(record.shake_failures, 0);
        assert!(record.energy.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn same_seed_gives_bitwise_identical_chains() {
        let sphere = Sphere::ambient(3);
        let target = Bvmf::diagonal(&[-2.0, 0.0, 2.0], &[1.0, 0.0, 0.0]).unwrap();
        let cfg = SamplerConfig {
            n_samples: 300,
            dt_max: 5e-3,
            mean_duration: 0.08,
            seed: 99,
            ..Default::default()
        };
        let a = rt_chmc_metropolis(&sphere, &target, &north_pole(), &cfg).unwrap();
        let b = rt_chmc_metropolis(&sphere, &target, &north_pole(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = rt_chmc_unadjusted(&sphere, &target, &north_pole(), &cfg, Thinning::EventEndpoints)
            .unwrap();
        let d = rt_chmc_unadjusted(&sphere, &target, &north_pole(), &cfg, Thinning::EventEndpoints)
            .unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn nonneg_blocks_reject_negative_coordinates() {
        let sphere = Sphere::ambient(3);
        let target = Uniform::new(3);
        let cfg = SamplerConfig {
            n_samples: 500,
            dt_max: 0.05,
            mean_duration: 0.5,
            seed: 7,
            nonneg_blocks: vec![2..3],
            ..Default::default()
        };
        // Start at the north pole; x[2] must never go negative.
        let record = rt_chmc_metropolis(&sphere, &target, &north_pole(), &cfg).unwrap();
        assert!(record.samples.iter().all(|x| x[2] >= 0.0));
        // The constraint actually bites: some proposals were rejected.
        assert!(record.acceptance_rate < 1.0);
    }

    #[test]
    fn per_step_thinning_emits_exactly_n_samples() {
        let sphere = Sphere::ambient(3);
        let target = Uniform::new(3);
        let cfg = SamplerConfig {
            n_samples: 137,
            dt_max: 1e-2,
            mean_duration: 0.12,
            seed: 5,
            ..Default::default()
        };
        let record =
            rt_chmc_unadjusted(&sphere, &target, &north_pole(), &cfg, Thinning::PerStep).unwrap();
        assert_eq!(record.samples.len(), 137);
        assert_eq!(record.acceptance_rate, 1.0);
    }
}
