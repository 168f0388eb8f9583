//! Configuration-driven experiment harness behind the `rtmc` binary.
//!
//! Subcommands: `sample` (one chain), `sweep` (a parameter grid in a worker
//! pool), `diagnose` (recompute IAC/ESS from an existing chain CSV),
//! `covest` (the covariance-estimation pipeline) and `validate` (config
//! lint). Configs are TOML; files ending in `.json` are parsed as JSON.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{CovestConfig, ExperimentConfig, ManifoldSpec};
pub use presets::{preset, preset_names};
pub use run::{
    diagnose_csv, run_chain, run_covest, run_experiment, run_sweep, RunArtifacts, SweepArtifacts,
};

use crate::Result;

/// JSON schema the diagnostics records validate against; kept in the repo
/// at `schemas/diagnostics.schema.json`.
pub const DIAGNOSTICS_SCHEMA: &str = include_str!("../../schemas/diagnostics.schema.json");

/// Severity of one [`validate`] finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

/// One finding of the config linter.
#[derive(Debug, Clone)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl Finding {
    fn warning(message: String) -> Self {
        Self {
            severity: Severity::Warning,
            message,
        }
    }

    fn error(message: String) -> Self {
        Self {
            severity: Severity::Error,
            message,
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "name",
    "manifold",
    "target",
    "sampler",
    "sweep",
    "observables",
    "burn_in_frac",
    "lag_fraction",
    "x0",
];
const TARGET_KEYS: &[&str] = &["kind", "a", "a_diag", "a_csv", "c", "f", "f_skew", "f_csv"];
const SAMPLER_KEYS: &[&str] = &[
    "kind",
    "mean_duration",
    "dt_max",
    "n_samples",
    "seed",
    "shake_tol",
    "rev_tol",
    "enable_rev_check",
    "nonneg_blocks",
    "shake_max_iters",
    "gram_regularization",
    "gamma",
    "stepsize",
    "a_substeps",
    "thin_per_step",
];
const SWEEP_KEYS: &[&str] = &["parameter", "grid"];

/// Common misspellings that plain edit distance will not catch.
const KEY_ALIASES: &[(&str, &str)] = &[
    ("stepsize_max", "dt_max"),
    ("max_stepsize", "dt_max"),
    ("dtmax", "dt_max"),
    ("lambda", "mean_duration"),
    ("rate", "mean_duration"),
    ("duration", "mean_duration"),
    ("samples", "n_samples"),
    ("friction", "gamma"),
];

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

fn suggest<'a>(key: &str, known: &[&'a str]) -> Option<&'a str> {
    for (alias, canonical) in KEY_ALIASES {
        if *alias == key && known.contains(canonical) {
            return Some(canonical);
        }
    }
    known
        .iter()
        .map(|k| (levenshtein(key, k), k))
        .filter(|(d, _)| *d <= 3)
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| *k)
}

fn check_table(
    table: &toml::value::Table,
    known: &[&str],
    section: &str,
    findings: &mut Vec<Finding>,
) {
    for key in table.keys() {
        if !known.contains(&key.as_str()) {
            let hint = match suggest(key, known) {
                Some(s) => format!("; did you mean {s:?}?"),
                None => String::new(),
            };
            findings.push(Finding::warning(format!(
                "unknown key {key:?} in {section}{hint}"
            )));
        }
    }
}

/// Lints a config document: unknown keys become warnings (with a
/// suggestion when one is close), structural and dimensional problems
/// become errors. Never fails; the report is the result.
pub fn validate(text: &str) -> Vec<Finding> {
    let mut findings = Vec::new();
    let value: toml::Value = match toml::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            findings.push(Finding::error(format!("not valid TOML: {e}")));
            return findings;
        }
    };
    if let Some(table) = value.as_table() {
        check_table(table, TOP_KEYS, "the top level", &mut findings);
        if let Some(target) = table.get("target").and_then(|v| v.as_table()) {
            check_table(target, TARGET_KEYS, "[target]", &mut findings);
        }
        if let Some(sampler) = table.get("sampler").and_then(|v| v.as_table()) {
            check_table(sampler, SAMPLER_KEYS, "[sampler]", &mut findings);
        }
        if let Some(sweep) = table.get("sweep").and_then(|v| v.as_table()) {
            check_table(sweep, SWEEP_KEYS, "[sweep]", &mut findings);
        }
    }

    let cfg: ExperimentConfig = match config::ExperimentConfig::from_toml_str(text) {
        Ok(cfg) => cfg,
        Err(e) => {
            findings.push(Finding::error(e.to_string()));
            return findings;
        }
    };
    validate_semantics(&cfg, &mut findings);
    findings
}

/// Semantic checks shared by `validate` and the run path.
pub fn validate_semantics(cfg: &ExperimentConfig, findings: &mut Vec<Finding>) {
    let spec = match cfg.manifold_spec() {
        Ok(spec) => spec,
        Err(e) => {
            findings.push(Finding::error(e.to_string()));
            return;
        }
    };
    if let Err(e) = cfg.build_target() {
        findings.push(Finding::error(e.to_string()));
    }
    if let Err(e) = cfg.start_point() {
        findings.push(Finding::error(e.to_string()));
    }
    if let Some(sweep) = &cfg.sweep {
        if sweep.grid.is_empty() {
            findings.push(Finding::error("sweep grid is empty".into()));
        }
        if !["mean_duration", "dt_max", "gamma", "stepsize"].contains(&sweep.parameter.as_str()) {
            findings.push(Finding::error(format!(
                "unknown sweep parameter {:?}",
                sweep.parameter
            )));
        }
    }
    for name in cfg.observable_names() {
        let ok = name == "neglogpi"
            || name
                .strip_prefix("coord:")
                .and_then(|i| i.parse::<usize>().ok())
                .is_some_and(|i| i < spec.ambient_dim());
        if !ok {
            findings.push(Finding::error(format!("invalid observable {name:?}")));
        }
    }
    if !(0.0..1.0).contains(&cfg.burn_in_frac) {
        findings.push(Finding::error(format!(
            "burn_in_frac {} outside [0, 1)",
            cfg.burn_in_frac
        )));
    }
    let known_samplers = [
        "rt-chmc",
        "rt-chmc-unadjusted",
        "rmhmc",
        "rt-exact-sphere",
        "gbaoab",
    ];
    if !known_samplers.contains(&cfg.sampler.kind.as_str()) {
        findings.push(Finding::error(format!(
            "unknown sampler kind {:?}",
            cfg.sampler.kind
        )));
    }
}

/// Validates emitted diagnostics JSON against [`DIAGNOSTICS_SCHEMA`]'s
/// structural requirements (field presence and types). Returns problems as
/// strings; empty means valid.
pub fn check_diagnostics_json(json_text: &str) -> Result<Vec<String>> {
    let value: serde_json::Value = serde_json::from_str(json_text)
        .map_err(|e| crate::Error::InvalidConfig(format!("diagnostics JSON: {e}")))?;
    let mut problems = Vec::new();
    let Some(records) = value.as_array() else {
        return Ok(vec!["top level is not an array".into()]);
    };
    for (i, record) in records.iter().enumerate() {
        let Some(obj) = record.as_object() else {
            problems.push(format!("record {i} is not an object"));
            continue;
        };
        for field in ["observable", "tau", "ess", "mean", "stderr"] {
            if !obj.contains_key(field) {
                problems.push(format!("record {i} misses {field:?}"));
            }
        }
        for (key, val) in obj {
            let ok = match key.as_str() {
                "observable" => val.is_string(),
                "tau" | "ess" | "mean" | "stderr" => val.is_number(),
                "lag_cap" | "n" => val.is_u64(),
                _ => {
                    problems.push(format!("record {i} has unexpected field {key:?}"));
                    continue;
                }
            };
            if !ok {
                problems.push(format!("record {i} field {key:?} has the wrong type"));
            }
        }
    }
    Ok(problems)
}
