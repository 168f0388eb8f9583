//! Executes experiment configs and writes artifacts: a chain CSV (one
//! sample per row, ambient coordinates, no header), a `<name>.meta.json`
//! sidecar with the full configuration and run counters, and a
//! `<name>.diagnostics.json` with per-observable IAC/ESS records.

use super::config::{compile_observables, CovestConfig, ExperimentConfig, SweepSection};
use crate::covest;
use crate::diagnostics::{diagnose_series, DiagnosticsRecord};
use crate::samplers::{
    gbaoab, rmhmc_fixed, rt_chmc_metropolis, rt_chmc_unadjusted, rt_rmhmc_exact_sphere,
    ChainRecord, Thinning,
};
use crate::targets::TargetDensity;
use crate::{DMat, DVec, Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Output of one chain run.
pub struct RunArtifacts {
    pub record: ChainRecord,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub chain_csv: PathBuf,
    pub meta_json: PathBuf,
    pub diagnostics_json: PathBuf,
}

/// Output of a sweep: per-point artifacts plus a flat summary.
pub struct SweepArtifacts {
    pub rows: Vec<SweepRow>,
    pub summary_json: PathBuf,
    pub summary_csv: PathBuf,
}

/// One (grid value, observable) cell of a sweep summary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub observable: String,
    pub tau: f64,
    pub ess: f64,
    pub mean: f64,
    pub stderr: f64,
    pub acceptance_rate: f64,
    /// Proposals rejected by the reversibility check or a failed
    /// constraint solve, as a fraction of all steps.
    pub failure_ratio: f64,
}

/// Runs the configured sampler and returns the raw record.
pub fn run_chain(cfg: &ExperimentConfig) -> Result<ChainRecord> {
    let spec = cfg.manifold_spec()?;
    let manifold = spec.build();
    let target = cfg.build_target()?;
    let x0 = cfg.start_point()?;
    let mut sampler_cfg = cfg.sampler.to_sampler_config();
    sampler_cfg.nonneg_blocks = cfg.nonneg_blocks()?;

    match cfg.sampler.kind.as_str() {
        "rt-chmc" => rt_chmc_metropolis(manifold.as_ref(), target.as_ref(), &x0, &sampler_cfg),
        "rt-chmc-unadjusted" => {
            let thinning = if cfg.sampler.thin_per_step {
                Thinning::PerStep
            } else {
                Thinning::EventEndpoints
            };
            rt_chmc_unadjusted(manifold.as_ref(), target.as_ref(), &x0, &sampler_cfg, thinning)
        }
        "rmhmc" => rmhmc_fixed(manifold.as_ref(), target.as_ref(), &x0, &sampler_cfg),
        "rt-exact-sphere" => {
            let ambient = match spec {
                super::config::ManifoldSpec::Sphere { ambient } => ambient,
                _ => {
                    return Err(Error::InvalidConfig(
                        "rt-exact-sphere requires a sphere manifold".into(),
                    ))
                }
            };
            if cfg.target.kind != "uniform" && !cfg.target.kind.is_empty() {
                return Err(Error::InvalidConfig(
                    "rt-exact-sphere samples the uniform law only".into(),
                ));
            }
            rt_rmhmc_exact_sphere(ambient, &x0, &sampler_cfg)
        }
        "gbaoab" => {
            let lcfg = cfg.sampler.to_langevin_config();
            gbaoab(manifold.as_ref(), target.as_ref(), &x0, &lcfg)
        }
        other => Err(Error::InvalidConfig(format!("unknown sampler kind {other:?}"))),
    }
}

/// Per-observable diagnostics of a record after burn-in.
pub fn diagnose_record(
    cfg: &ExperimentConfig,
    record: &ChainRecord,
) -> Result<Vec<DiagnosticsRecord>> {
    let spec = cfg.manifold_spec()?;
    let target: Arc<dyn TargetDensity> = Arc::from(cfg.build_target()?);
    let observables = compile_observables(&cfg.observable_names(), target, spec.ambient_dim())?;
    let burn = (cfg.burn_in_frac * record.samples.len() as f64).floor() as usize;
    let kept = &record.samples[burn.min(record.samples.len())..];
    let max_lag = (kept.len() / cfg.lag_fraction.max(1)).max(1);
    let mut out = Vec::new();
    for (name, eval) in &observables {
        let series: Vec<f64> = kept.iter().map(|x| eval(x)).collect();
        out.push(diagnose_series(name, &series, max_lag)?);
    }
    Ok(out)
}

/// Runs one experiment and writes its three artifacts into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let record = run_chain(cfg)?;
    let wall = started.elapsed().as_secs_f64();
    let diagnostics = diagnose_record(cfg, &record)?;

    let chain_csv = out_dir.join(format!("{}.chain.csv", cfg.name));
    write_chain_csv(&chain_csv, &record)?;
    let meta_json = out_dir.join(format!("{}.meta.json", cfg.name));
    write_meta(&meta_json, cfg, &record, wall)?;
    let diagnostics_json = out_dir.join(format!("{}.diagnostics.json", cfg.name));
    write_json(&diagnostics_json, &diagnostics)?;

    Ok(RunArtifacts {
        record,
        diagnostics,
        chain_csv,
        meta_json,
        diagnostics_json,
    })
}

/// Chain CSV: one sample per row, coordinates in ambient order, no header.
pub fn write_chain_csv(path: &Path, record: &ChainRecord) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for sample in &record.samples {
        let mut first = true;
        for value in sample.iter() {
            if !first {
                out.write_all(b",")?;
            }
            write!(out, "{value}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a chain CSV back into sample vectors.
pub fn read_chain_csv(path: &Path, skip_header: bool) -> Result<Vec<DVec>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .from_path(path)?;
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::DataParse {
                path: path.display().to_string(),
                row: idx + 1,
                message: e.to_string(),
            })?;
        out.push(DVec::from_column_slice(&row));
    }
    Ok(out)
}

fn write_meta(
    path: &Path,
    cfg: &ExperimentConfig,
    record: &ChainRecord,
    wall_seconds: f64,
) -> Result<()> {
    let meta = serde_json::json!({
        "name": cfg.name,
        "config": cfg,
        "n_samples": record.samples.len(),
        "acceptance_rate": record.acceptance_rate,
        "rev_failures": record.rev_failures,
        "shake_failures": record.shake_failures,
        "rev_check": {
            "enabled": cfg.sampler.enable_rev_check,
            "metric": "joint-infinity-norm",
            "tol": cfg.sampler.rev_tol,
        },
        "wall_seconds": wall_seconds,
    });
    write_json(path, &meta)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn apply_sweep_value(cfg: &mut ExperimentConfig, parameter: &str, value: f64) -> Result<()> {
    match parameter {
        "mean_duration" => cfg.sampler.mean_duration = value,
        "dt_max" => cfg.sampler.dt_max = value,
        "gamma" => cfg.sampler.gamma = value,
        "stepsize" => cfg.sampler.stepsize = value,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown sweep parameter {other:?} (expected mean_duration, dt_max, gamma or stepsize)"
            )))
        }
    }
    Ok(())
}

/// Runs every grid point of the sweep in a worker pool (`threads = 0` means
/// rayon's default width). Each point gets a derived seed `base + index` and
/// writes its own artifacts; the summary table lands in
/// `<name>.summary.{json,csv}`.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<SweepArtifacts> {
    let sweep: &SweepSection = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("config has no [sweep] section".into()))?;
    if sweep.grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    std::fs::create_dir_all(out_dir)?;

    let jobs: Vec<(usize, f64)> = sweep.grid.iter().cloned().enumerate().collect();
    let run_one = |&(index, value): &(usize, f64)| -> Result<Vec<SweepRow>> {
        let mut point_cfg = cfg.clone();
        apply_sweep_value(&mut point_cfg, &sweep.parameter, value)?;
        point_cfg.sampler.seed = cfg.sampler.seed + index as u64;
        point_cfg.name = format!("{}-{}-{index:03}", cfg.name, sweep.parameter);
        let artifacts = run_experiment(&point_cfg, out_dir)?;
        let n = artifacts.record.samples.len().max(1);
        let failure_ratio = (artifacts.record.rev_failures + artifacts.record.shake_failures)
            as f64
            / n as f64;
        Ok(artifacts
            .diagnostics
            .iter()
            .map(|d| SweepRow {
                parameter: sweep.parameter.clone(),
                value,
                observable: d.observable.clone(),
                tau: d.tau,
                ess: d.ess,
                mean: d.mean,
                stderr: d.stderr,
                acceptance_rate: artifacts.record.acceptance_rate,
                failure_ratio,
            })
            .collect())
    };

    let results: Vec<Result<Vec<SweepRow>>> = if threads == 1 {
        jobs.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            jobs.par_iter().map(run_one).collect()
        })
    };

    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }

    let summary_json = out_dir.join(format!("{}.summary.json", cfg.name));
    write_json(&summary_json, &rows)?;
    let summary_csv = out_dir.join(format!("{}.summary.csv", cfg.name));
    let mut out = std::io::BufWriter::new(std::fs::File::create(&summary_csv)?);
    writeln!(
        out,
        "parameter,value,observable,tau,ess,mean,stderr,acceptance_rate,failure_ratio"
    )?;
    for row in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.parameter,
            row.value,
            row.observable,
            row.tau,
            row.ess,
            row.mean,
            row.stderr,
            row.acceptance_rate,
            row.failure_ratio
        )?;
    }
    out.flush()?;
    Ok(SweepArtifacts {
        rows,
        summary_json,
        summary_csv,
    })
}

/// Recomputes IAC/ESS records from an existing chain CSV. `neglogpi` needs
/// the original config to rebuild the target; coordinate observables work
/// from the CSV alone.
pub fn diagnose_csv(
    chain_csv: &Path,
    config: Option<&ExperimentConfig>,
    observables: &[String],
    burn_in_frac: f64,
    lag_fraction: usize,
    skip_header: bool,
) -> Result<Vec<DiagnosticsRecord>> {
    let samples = read_chain_csv(chain_csv, skip_header)?;
    if samples.is_empty() {
        return Err(Error::SeriesTooShort { need: 1, got: 0 });
    }
    let ambient = samples[0].len();
    let burn = (burn_in_frac * samples.len() as f64).floor() as usize;
    let kept = &samples[burn.min(samples.len())..];
    let max_lag = (kept.len() / lag_fraction.max(1)).max(1);

    let names: Vec<String> = if observables.is_empty() {
        vec!["neglogpi".to_string()]
    } else {
        observables.to_vec()
    };
    let mut out = Vec::new();
    for name in &names {
        let series: Vec<f64> = if name == "neglogpi" {
            let cfg = config.ok_or_else(|| {
                Error::InvalidConfig(
                    "neglogpi diagnostics need --config to rebuild the target".into(),
                )
            })?;
            let target = cfg.build_target()?;
            kept.iter().map(|x| target.potential(x)).collect()
        } else if let Some(idx) = name.strip_prefix("coord:") {
            let i: usize = idx
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad observable {name:?}")))?;
            if i >= ambient {
                return Err(Error::InvalidConfig(format!(
                    "observable {name:?} out of range for chain width {ambient}"
                )));
            }
            kept.iter().map(|x| x[i]).collect()
        } else {
            return Err(Error::InvalidConfig(format!("unknown observable {name:?}")));
        };
        out.push(diagnose_series(name, &series, max_lag)?);
    }
    Ok(out)
}

/// End-to-end covariance estimation; writes the report JSON plus CSVs of
/// the posterior mean, entrywise SD, posterior inverse mean and (when
/// computed) the MAP estimate. Returns the report.
pub fn run_covest(cfg: &CovestConfig, out_dir: &Path) -> Result<covest::CovReport> {
    std::fs::create_dir_all(out_dir)?;
    let (data, truth): (Vec<DVec>, Option<DMat>) = if cfg.synthetic {
        if cfg.p == 0 || cfg.synthetic_count == 0 {
            return Err(Error::InvalidConfig(
                "synthetic covest needs p and synthetic_count".into(),
            ));
        }
        let (data, sigma) = covest::synthetic_spiked(
            cfg.p,
            cfg.spike_rank(),
            cfg.synthetic_count,
            cfg.synthetic_d1,
            cfg.synthetic_d2,
            cfg.synthetic_seed,
        );
        (data, Some(sigma))
    } else {
        if cfg.data.is_empty() || cfg.p == 0 {
            return Err(Error::InvalidConfig("covest needs data path and p".into()));
        }
        (
            covest::ingest(Path::new(&cfg.data), cfg.p, cfg.skip_header)?,
            None,
        )
    };

    let normalized = covest::normalize(&data)?;
    let model =
        covest::CovModel::from_normalized(&normalized, cfg.spike_rank(), cfg.sigma1, cfg.sigma2)?;
    let theta0 = covest::initialize(&model)?;
    let theta_map = if cfg.map_steps > 0 {
        Some(covest::map_estimate(&model, &theta0, cfg.map_steps, cfg.map_lr)?)
    } else {
        None
    };
    let sampler_cfg = cfg.sampler.to_sampler_config();
    let mut report = covest::posterior_estimate(&model, &theta0, &sampler_cfg, theta_map.as_ref())?;
    if let Some(sigma_true) = &truth {
        covest::attach_metrics(&mut report, sigma_true)?;
        write_matrix_csv(&out_dir.join(format!("{}.sigma_true.csv", cfg.name)), sigma_true)?;
    }

    write_matrix_csv(
        &out_dir.join(format!("{}.sigma_mean.csv", cfg.name)),
        &report.sigma_mean,
    )?;
    write_matrix_csv(
        &out_dir.join(format!("{}.sigma_sd.csv", cfg.name)),
        &report.sigma_sd,
    )?;
    write_matrix_csv(
        &out_dir.join(format!("{}.sigma_inv_mean.csv", cfg.name)),
        &report.sigma_inv_mean,
    )?;
    if let Some(map) = &report.sigma_map {
        write_matrix_csv(&out_dir.join(format!("{}.sigma_map.csv", cfg.name)), map)?;
    }
    let summary = serde_json::json!({
        "name": cfg.name,
        "config": cfg,
        "p": model.p,
        "m": model.m,
        "n_obs": model.n_obs,
        "acceptance_rate": report.acceptance_rate,
        "n_samples": report.n_samples,
        "metrics": report.metrics,
    });
    write_json(&out_dir.join(format!("{}.report.json", cfg.name)), &summary)?;
    Ok(report)
}

/// Dense matrix as CSV rows.
pub fn write_matrix_csv(path: &Path, m: &DMat) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{}", m[(i, j)])?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
