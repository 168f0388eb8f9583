//! Command-line harness for chain runs, parameter sweeps, chain
//! diagnostics, covariance estimation and config validation.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rtmc::cli::{self, CovestConfig, ExperimentConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "rtmc", version, about = "MCMC on constraint manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigSource {
    /// Experiment config file (TOML; .json accepted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset name (see `rtmc validate --list-presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of samples.
    #[arg(long)]
    samples: Option<usize>,
}

impl ConfigSource {
    fn load(&self) -> Result<Vec<ExperimentConfig>> {
        let mut configs = match (&self.config, &self.preset) {
            (Some(path), None) => vec![ExperimentConfig::from_path(path)
                .with_context(|| format!("loading {}", path.display()))?],
            (None, Some(name)) => cli::preset(name)
                .ok_or_else(|| anyhow!("unknown preset {name:?} (try --list-presets)"))?,
            (Some(_), Some(_)) => bail!("pass either --config or --preset, not both"),
            (None, None) => bail!("one of --config or --preset is required"),
        };
        for cfg in &mut configs {
            if let Some(seed) = self.seed {
                cfg.sampler.seed = seed;
            }
            if let Some(n) = self.samples {
                cfg.sampler.n_samples = n;
            }
        }
        Ok(configs)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a single chain per config and write chain/meta/diagnostics files.
    Sample {
        #[command(flatten)]
        source: ConfigSource,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the config's sweep grid in a worker pool.
    Sweep {
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker pool width (0 = one worker per core).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Recompute IAC/ESS diagnostics from an existing chain CSV.
    Diagnose {
        /// Chain CSV (one sample per row).
        #[arg(long)]
        chain: PathBuf,
        /// Config used to produce the chain (needed for `neglogpi`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Observables (default: neglogpi with --config, else coord:0).
        #[arg(long, value_delimiter = ',')]
        observables: Vec<String>,
        #[arg(long, default_value_t = 0.1)]
        burn_in: f64,
        /// Lag cap divisor: M = N / lag-fraction.
        #[arg(long, default_value_t = 50)]
        lag_fraction: usize,
        /// Treat the first CSV row as a header.
        #[arg(long)]
        skip_header: bool,
        /// Write the records here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bayesian spiked-covariance estimation from CSV data (or synthetic).
    Covest {
        /// Covest config file (TOML; .json accepted).
        #[arg(long)]
        config: PathBuf,
        /// Override the data CSV path.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Treat the first data row as a header.
        #[arg(long)]
        skip_header: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Lint a config file; prints findings, never fails the build.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// List built-in preset names and exit.
        #[arg(long)]
        list_presets: bool,
    },
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { source, out } => {
            for cfg in source.load()? {
                let mut findings = Vec::new();
                cli::validate_semantics(&cfg, &mut findings);
                report_findings(&findings);
                if findings.iter().any(|f| f.severity == cli::Severity::Error) {
                    bail!("config {:?} is invalid", cfg.name);
                }
                let artifacts = cli::run_experiment(&cfg, &out)
                    .with_context(|| format!("running {:?}", cfg.name))?;
                println!(
                    "{}: {} samples, acceptance {:.4} -> {}",
                    cfg.name,
                    artifacts.record.samples.len(),
                    artifacts.record.acceptance_rate,
                    artifacts.chain_csv.display()
                );
                for d in &artifacts.diagnostics {
                    println!(
                        "  {}: tau {:.3} ess {:.0} mean {:.6} stderr {:.2e}",
                        d.observable, d.tau, d.ess, d.mean, d.stderr
                    );
                }
            }
            Ok(())
        }
        Command::Sweep {
            source,
            out,
            threads,
        } => {
            for cfg in source.load()? {
                if cfg.sweep.is_none() {
                    bail!("config {:?} has no [sweep] section", cfg.name);
                }
                let artifacts = cli::run_sweep(&cfg, &out, threads)
                    .with_context(|| format!("sweeping {:?}", cfg.name))?;
                println!(
                    "{}: {} summary rows -> {}",
                    cfg.name,
                    artifacts.rows.len(),
                    artifacts.summary_csv.display()
                );
            }
            Ok(())
        }
        Command::Diagnose {
            chain,
            config,
            observables,
            burn_in,
            lag_fraction,
            skip_header,
            out,
        } => {
            let cfg = config
                .map(|p| ExperimentConfig::from_path(&p))
                .transpose()?;
            let names = if observables.is_empty() && cfg.is_none() {
                vec!["coord:0".to_string()]
            } else {
                observables
            };
            let records = cli::diagnose_csv(
                &chain,
                cfg.as_ref(),
                &names,
                burn_in,
                lag_fraction,
                skip_header,
            )?;
            let text = serde_json::to_string_pretty(&records)?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::Covest {
            config,
            data,
            skip_header,
            out,
            seed,
        } => {
            let mut cfg = CovestConfig::from_path(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(path) = data {
                cfg.data = path.display().to_string();
            }
            if skip_header {
                cfg.skip_header = true;
            }
            if let Some(seed) = seed {
                cfg.sampler.seed = seed;
            }
            let report = cli::run_covest(&cfg, &out)?;
            println!(
                "{}: {} samples, acceptance {:.4}",
                cfg.name, report.n_samples, report.acceptance_rate
            );
            for (metric, value) in &report.metrics {
                println!("  {metric}: {value:.6}");
            }
            Ok(())
        }
        Command::Validate {
            config,
            list_presets,
        } => {
            if list_presets {
                for name in cli::preset_names() {
                    println!("{name}");
                }
                return Ok(());
            }
            let path = config.ok_or_else(|| anyhow!("--config is required"))?;
            let text = std::fs::read_to_string(&path)?;
            let findings = cli::validate(&text);
            if findings.is_empty() {
                println!("{}: ok", path.display());
            }
            report_findings(&findings);
            Ok(())
        }
    }
}

fn report_findings(findings: &[cli::Finding]) {
    for f in findings {
        match f.severity {
            cli::Severity::Warning => eprintln!("warning: {}", f.message),
            cli::Severity::Error => eprintln!("error: {}", f.message),
        }
    }
}
