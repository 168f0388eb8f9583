//! Built-in experiment presets reproducing the robustness studies at desk
//! scale. Every preset is deterministic and overridable from the command
//! line (seed, sample count, output directory).

use super::config::{ExperimentConfig, SamplerSection, SweepSection, TargetSection};

fn bvmf_sharp() -> TargetSection {
    TargetSection {
        kind: "bvmf".into(),
        a_diag: Some(vec![-1000.0, 0.0, 1000.0]),
        c: Some(vec![100.0, 0.0, 0.0]),
        ..Default::default()
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Named preset bundles; most expand to several runs that share one output
/// directory.
pub fn preset(name: &str) -> Option<Vec<ExperimentConfig>> {
    match name {
        // Reversibility failure ratio against the stepsize ceiling.
        "fig1-desk" => Some(vec![ExperimentConfig {
            name: "fig1-revcheck".into(),
            manifold: "sphere:2".into(),
            target: bvmf_sharp(),
            sampler: SamplerSection {
                kind: "rt-chmc".into(),
                mean_duration: 0.1,
                dt_max: 1e-3,
                n_samples: 2000,
                enable_rev_check: true,
                seed: 1,
                ..Default::default()
            },
            sweep: Some(SweepSection {
                parameter: "dt_max".into(),
                grid: log_grid(1e-3, 5e-2, 12),
            }),
            ..Default::default()
        }]),

        // IAC of -log pi against the mean duration, randomized vs fixed.
        "fig2-desk" => {
            let base = ExperimentConfig {
                name: "fig2-rt-chmc".into(),
                manifold: "sphere:2".into(),
                target: bvmf_sharp(),
                sampler: SamplerSection {
                    kind: "rt-chmc".into(),
                    mean_duration: 0.1,
                    dt_max: 2.5e-3,
                    n_samples: 100_000,
                    seed: 2,
                    ..Default::default()
                },
                sweep: Some(SweepSection {
                    parameter: "mean_duration".into(),
                    grid: lin_grid(0.02, 0.2, 10),
                }),
                observables: vec!["neglogpi".into()],
                ..Default::default()
            };
            let mut fixed = base.clone();
            fixed.name = "fig2-rmhmc".into();
            fixed.sampler.kind = "rmhmc".into();
            Some(vec![base, fixed])
        }

        // Langevin bias and friction sensitivity on the bimodal 4-sphere
        // target, with a Metropolis-adjusted reference.
        "fig5-desk" => {
            let target = TargetSection {
                kind: "bvmf".into(),
                a_diag: Some(vec![-20.0, -10.0, 0.0, 10.0, 20.0]),
                c: Some(vec![40.0, 0.0, 0.0, 0.0, 0.0]),
                ..Default::default()
            };
            let langevin = ExperimentConfig {
                name: "fig5-gbaoab".into(),
                manifold: "sphere:4".into(),
                target: target.clone(),
                sampler: SamplerSection {
                    kind: "gbaoab".into(),
                    gamma: 2.0,
                    stepsize: 0.01,
                    n_samples: 200_000,
                    seed: 3,
                    ..Default::default()
                },
                sweep: Some(SweepSection {
                    parameter: "stepsize".into(),
                    grid: vec![0.01, 0.05, 0.1],
                }),
                observables: vec!["neglogpi".into()],
                ..Default::default()
            };
            let reference = ExperimentConfig {
                name: "fig5-reference".into(),
                manifold: "sphere:4".into(),
                target,
                sampler: SamplerSection {
                    kind: "rt-chmc".into(),
                    mean_duration: 0.5,
                    dt_max: 0.01,
                    n_samples: 100_000,
                    seed: 4,
                    ..Default::default()
                },
                observables: vec!["neglogpi".into()],
                ..Default::default()
            };
            Some(vec![langevin, reference])
        }

        // Matrix von Mises-Fisher on O(3), randomized vs fixed duration.
        "fig7-desk" => {
            let base = ExperimentConfig {
                name: "fig7-rt-chmc".into(),
                manifold: "stiefel:3,3".into(),
                target: TargetSection {
                    kind: "vmf-stiefel".into(),
                    f_skew: Some(vec![2.0, -45.0, -4.0]),
                    ..Default::default()
                },
                sampler: SamplerSection {
                    kind: "rt-chmc".into(),
                    mean_duration: 0.1,
                    dt_max: 1e-3,
                    n_samples: 100_000,
                    seed: 5,
                    ..Default::default()
                },
                sweep: Some(SweepSection {
                    parameter: "mean_duration".into(),
                    grid: lin_grid(0.02, 0.2, 10),
                }),
                observables: vec!["neglogpi".into()],
                ..Default::default()
            };
            let mut fixed = base.clone();
            fixed.name = "fig7-rmhmc".into();
            fixed.sampler.kind = "rmhmc".into();
            Some(vec![base, fixed])
        }

        // Uniform-law sanity run with the exact sphere flow.
        "uniform-sphere-desk" => Some(vec![ExperimentConfig {
            name: "uniform-sphere".into(),
            manifold: "sphere:2".into(),
            target: TargetSection {
                kind: "uniform".into(),
                ..Default::default()
            },
            sampler: SamplerSection {
                kind: "rt-exact-sphere".into(),
                mean_duration: 1.0,
                n_samples: 100_000,
                seed: 6,
                ..Default::default()
            },
            observables: vec!["coord:0".into(), "coord:1".into(), "coord:2".into()],
            ..Default::default()
        }]),

        _ => None,
    }
}

/// Names of all built-in presets.
pub fn preset_names() -> &'static [&'static str] {
    &[
        "fig1-desk",
        "fig2-desk",
        "fig5-desk",
        "fig7-desk",
        "uniform-sphere-desk",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_parse_and_validate() {
        for name in preset_names() {
            let configs = preset(name).unwrap();
            assert!(!configs.is_empty());
            for cfg in configs {
                cfg.manifold_spec().unwrap();
                cfg.build_target().unwrap();
                cfg.start_point().unwrap();
                if let Some(sweep) = &cfg.sweep {
                    assert!(!sweep.grid.is_empty());
                }
            }
        }
    }

    #[test]
    fn unknown_preset_is_none() {
        assert!(preset("fig9000").is_none());
    }
}
