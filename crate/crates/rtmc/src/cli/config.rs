//! Experiment configuration: TOML (or JSON) files describing a manifold, a
//! target, a sampler, optional sweep axis and observables.

use crate::manifold::{ConstraintManifold, Factor, ProductManifold, Sphere, Stiefel};
use crate::samplers::{LangevinConfig, SamplerConfig};
use crate::targets::{Bvmf, SpikedCov, TargetDensity, Uniform, VmfStiefel};
use crate::{DMat, DVec, Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::path::Path;

/// A full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Run name; output files are prefixed with it.
    pub name: String,
    /// Manifold spec string: `sphere:k` (the k-sphere in `R^{k+1}`),
    /// `stiefel:d,p`, or `product:[..;..]` with factors `sphere:k`,
    /// `stiefel:d,p`, `euclid:n`, `euclid+:n` (`+` marks nonnegative).
    pub manifold: String,
    pub target: TargetSection,
    pub sampler: SamplerSection,
    pub sweep: Option<SweepSection>,
    /// Observables to diagnose: `neglogpi` or `coord:i`. Empty means
    /// `neglogpi`.
    pub observables: Vec<String>,
    /// Fraction of samples discarded before diagnostics.
    pub burn_in_frac: f64,
    /// Lag cap divisor: `M = N / lag_fraction`.
    pub lag_fraction: usize,
    /// Optional explicit start point (ambient coordinates).
    pub x0: Option<Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            manifold: "sphere:2".into(),
            target: TargetSection::default(),
            sampler: SamplerSection::default(),
            sweep: None,
            observables: Vec::new(),
            burn_in_frac: 0.1,
            lag_fraction: 50,
            x0: None,
        }
    }
}

/// Target selection plus parameters (inline matrices or CSV paths).
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TargetSection {
    /// One of `uniform`, `bvmf`, `vmf-stiefel`.
    pub kind: String,
    /// Full symmetric matrix, row by row.
    pub a: Option<Vec<Vec<f64>>>,
    /// Shorthand for a diagonal matrix.
    pub a_diag: Option<Vec<f64>>,
    /// Matrix from a CSV file (rows = matrix rows).
    pub a_csv: Option<String>,
    pub c: Option<Vec<f64>>,
    /// Parameter matrix of the Stiefel target, row by row.
    pub f: Option<Vec<Vec<f64>>>,
    /// Skew-symmetric shorthand: upper-triangular entries row-wise.
    pub f_skew: Option<Vec<f64>>,
    pub f_csv: Option<String>,
}

/// Sampler selection plus the union of sampler parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSection {
    /// One of `rt-chmc`, `rt-chmc-unadjusted`, `rmhmc`, `rt-exact-sphere`,
    /// `gbaoab`.
    pub kind: String,
    pub mean_duration: f64,
    pub dt_max: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub shake_tol: f64,
    pub rev_tol: f64,
    pub enable_rev_check: bool,
    pub nonneg_blocks: Vec<Range<usize>>,
    pub shake_max_iters: usize,
    pub gram_regularization: f64,
    /// Langevin friction (gbaoab only).
    pub gamma: f64,
    /// Langevin stepsize (gbaoab only).
    pub stepsize: f64,
    /// Constrained substeps per half drift (gbaoab only).
    pub a_substeps: usize,
    /// Unadjusted chain: record every integrator step instead of event
    /// endpoints.
    pub thin_per_step: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let base = SamplerConfig::default();
        Self {
            kind: "rt-chmc".into(),
            mean_duration: base.mean_duration,
            dt_max: base.dt_max,
            n_samples: base.n_samples,
            seed: base.seed,
            shake_tol: base.shake_tol,
            rev_tol: base.rev_tol,
            enable_rev_check: base.enable_rev_check,
            nonneg_blocks: Vec::new(),
            shake_max_iters: base.shake_max_iters,
            gram_regularization: base.gram_regularization,
            gamma: 1.0,
            stepsize: 1e-2,
            a_substeps: 1,
            thin_per_step: false,
        }
    }
}

impl SamplerSection {
    pub fn to_sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            mean_duration: self.mean_duration,
            dt_max: self.dt_max,
            n_samples: self.n_samples,
            seed: self.seed,
            shake_tol: self.shake_tol,
            rev_tol: self.rev_tol,
            enable_rev_check: self.enable_rev_check,
            nonneg_blocks: self.nonneg_blocks.clone(),
            shake_max_iters: self.shake_max_iters,
            gram_regularization: self.gram_regularization,
            ..Default::default()
        }
    }

    pub fn to_langevin_config(&self) -> LangevinConfig {
        LangevinConfig {
            gamma: self.gamma,
            stepsize: self.stepsize,
            n_samples: self.n_samples,
            seed: self.seed,
            shake_tol: self.shake_tol,
            shake_max_iters: self.shake_max_iters,
            a_substeps: self.a_substeps,
            ..Default::default()
        }
    }
}

/// One swept parameter and its value grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSection {
    /// `mean_duration`, `dt_max`, `gamma` or `stepsize`.
    pub parameter: String,
    pub grid: Vec<f64>,
}

/// Parsed manifold spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifoldSpec {
    /// Ambient dimension (the sphere `S^{ambient-1}`).
    Sphere { ambient: usize },
    Stiefel { d: usize, p: usize },
    Product(Vec<FactorSpec>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactorSpec {
    Sphere { ambient: usize },
    Stiefel { d: usize, p: usize },
    Euclid { dim: usize, nonneg: bool },
}

impl ManifoldSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(rest) = text.strip_prefix("product:") {
            let inner = rest
                .trim()
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| bad_manifold(text, "product factors must be bracketed"))?;
            let factors = inner
                .split(';')
                .map(|f| FactorSpec::parse(f.trim()))
                .collect::<Result<Vec<_>>>()?;
            if factors.is_empty() {
                return Err(bad_manifold(text, "empty product"));
            }
            return Ok(ManifoldSpec::Product(factors));
        }
        match FactorSpec::parse(text)? {
            FactorSpec::Sphere { ambient } => Ok(ManifoldSpec::Sphere { ambient }),
            FactorSpec::Stiefel { d, p } => Ok(ManifoldSpec::Stiefel { d, p }),
            FactorSpec::Euclid { .. } => Err(bad_manifold(
                text,
                "a bare euclidean block is not a constraint manifold",
            )),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldSpec::Sphere { ambient } => *ambient,
            ManifoldSpec::Stiefel { d, p } => d * p,
            ManifoldSpec::Product(factors) => factors.iter().map(|f| f.ambient_dim()).sum(),
        }
    }

    /// Builds the runtime manifold.
    pub fn build(&self) -> Box<dyn ConstraintManifold> {
        match self {
            ManifoldSpec::Sphere { ambient } => Box::new(Sphere::ambient(*ambient)),
            ManifoldSpec::Stiefel { d, p } => Box::new(Stiefel::new(*d, *p)),
            ManifoldSpec::Product(factors) => {
                let factors = factors
                    .iter()
                    .map(|f| match f {
                        FactorSpec::Sphere { ambient } => {
                            Factor::manifold(Sphere::ambient(*ambient))
                        }
                        FactorSpec::Stiefel { d, p } => Factor::manifold(Stiefel::new(*d, *p)),
                        FactorSpec::Euclid { dim, nonneg } => Factor::euclidean(*dim, *nonneg),
                    })
                    .collect();
                Box::new(ProductManifold::new(factors))
            }
        }
    }

    /// Canonical deterministic feasible start point.
    pub fn default_start(&self) -> DVec {
        match self {
            ManifoldSpec::Sphere { ambient } => {
                let mut x = DVec::zeros(*ambient);
                x[ambient - 1] = 1.0;
                x
            }
            ManifoldSpec::Stiefel { d, p } => {
                let mut x = DMat::zeros(*d, *p);
                for j in 0..*p {
                    x[(j, j)] = 1.0;
                }
                DVec::from_column_slice(x.as_slice())
            }
            ManifoldSpec::Product(factors) => {
                let parts: Vec<DVec> = factors
                    .iter()
                    .map(|f| match f {
                        FactorSpec::Sphere { ambient } => {
                            ManifoldSpec::Sphere { ambient: *ambient }.default_start()
                        }
                        FactorSpec::Stiefel { d, p } => {
                            ManifoldSpec::Stiefel { d: *d, p: *p }.default_start()
                        }
                        FactorSpec::Euclid { dim, .. } => DVec::from_element(*dim, 1.0),
                    })
                    .collect();
                let total = parts.iter().map(|p| p.len()).sum();
                DVec::from_iterator(total, parts.iter().flat_map(|p| p.iter().cloned()))
            }
        }
    }
}

impl FactorSpec {
    fn parse(text: &str) -> Result<Self> {
        let (head, args) = text
            .split_once(':')
            .ok_or_else(|| bad_manifold(text, "expected kind:args"))?;
        match head.trim() {
            "sphere" => {
                let k: usize = parse_num(args, text)?;
                if k < 1 {
                    return Err(bad_manifold(text, "sphere dimension must be >= 1"));
                }
                Ok(FactorSpec::Sphere { ambient: k + 1 })
            }
            "stiefel" => {
                let (d, p) = args
                    .split_once(',')
                    .ok_or_else(|| bad_manifold(text, "stiefel needs d,p"))?;
                let d: usize = parse_num(d, text)?;
                let p: usize = parse_num(p, text)?;
                if p < 1 || p > d {
                    return Err(bad_manifold(text, "stiefel needs 1 <= p <= d"));
                }
                Ok(FactorSpec::Stiefel { d, p })
            }
            "euclid" => Ok(FactorSpec::Euclid {
                dim: parse_num(args, text)?,
                nonneg: false,
            }),
            "euclid+" => Ok(FactorSpec::Euclid {
                dim: parse_num(args, text)?,
                nonneg: true,
            }),
            other => Err(bad_manifold(text, &format!("unknown factor kind {other:?}"))),
        }
    }

    fn ambient_dim(&self) -> usize {
        match self {
            FactorSpec::Sphere { ambient } => *ambient,
            FactorSpec::Stiefel { d, p } => d * p,
            FactorSpec::Euclid { dim, .. } => *dim,
        }
    }
}

fn parse_num(text: &str, context: &str) -> Result<usize> {
    text.trim()
        .parse()
        .map_err(|_| bad_manifold(context, &format!("bad integer {text:?}")))
}

fn bad_manifold(spec: &str, why: &str) -> Error {
    Error::InvalidConfig(format!("manifold spec {spec:?}: {why}"))
}

impl ExperimentConfig {
    /// Reads a TOML (or, for `.json` paths, JSON) config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn manifold_spec(&self) -> Result<ManifoldSpec> {
        ManifoldSpec::parse(&self.manifold)
    }

    /// Builds the target over the manifold's ambient space.
    pub fn build_target(&self) -> Result<Box<dyn TargetDensity>> {
        let ambient = self.manifold_spec()?.ambient_dim();
        build_target_impl(&self.target, ambient, self.manifold_spec()?)
    }

    /// Observable names with the empty default applied.
    pub fn observable_names(&self) -> Vec<String> {
        if self.observables.is_empty() {
            vec!["neglogpi".to_string()]
        } else {
            self.observables.clone()
        }
    }

    /// Start point: explicit `x0` or the manifold's canonical point.
    pub fn start_point(&self) -> Result<DVec> {
        let spec = self.manifold_spec()?;
        match &self.x0 {
            Some(values) => {
                if values.len() != spec.ambient_dim() {
                    return Err(Error::DimensionMismatch {
                        context: "x0",
                        expected: spec.ambient_dim(),
                        got: values.len(),
                    });
                }
                Ok(DVec::from_column_slice(values))
            }
            None => Ok(spec.default_start()),
        }
    }

    /// Effective nonnegative blocks: explicit config plus the product
    /// manifold's flagged euclidean blocks.
    pub fn nonneg_blocks(&self) -> Result<Vec<Range<usize>>> {
        let mut blocks = self.sampler.nonneg_blocks.clone();
        if let ManifoldSpec::Product(_) = self.manifold_spec()? {
            if let ManifoldSpec::Product(factors) = self.manifold_spec()? {
                let mut offset = 0;
                for f in &factors {
                    if let FactorSpec::Euclid { dim, nonneg: true } = f {
                        blocks.push(offset..offset + dim);
                    }
                    offset += f.ambient_dim();
                }
            }
        }
        blocks.sort_by_key(|r| r.start);
        blocks.dedup();
        Ok(blocks)
    }
}

fn build_target_impl(
    section: &TargetSection,
    ambient: usize,
    spec: ManifoldSpec,
) -> Result<Box<dyn TargetDensity>> {
    match section.kind.as_str() {
        "" | "uniform" => Ok(Box::new(Uniform::new(ambient))),
        "bvmf" => {
            let c = section
                .c
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("bvmf needs c".into()))?;
            let a = if let Some(diag) = &section.a_diag {
                DMat::from_diagonal(&DVec::from_column_slice(diag))
            } else if let Some(rows) = &section.a {
                matrix_from_rows(rows)?
            } else if let Some(path) = &section.a_csv {
                matrix_from_csv(Path::new(path))?
            } else {
                return Err(Error::InvalidConfig("bvmf needs a, a_diag or a_csv".into()));
            };
            if c.len() != ambient {
                return Err(Error::DimensionMismatch {
                    context: "bvmf c vs manifold",
                    expected: ambient,
                    got: c.len(),
                });
            }
            Ok(Box::new(Bvmf::new(a, DVec::from_column_slice(c))?))
        }
        "vmf-stiefel" => {
            let (d, p) = match spec {
                ManifoldSpec::Stiefel { d, p } => (d, p),
                _ => {
                    return Err(Error::InvalidConfig(
                        "vmf-stiefel requires a stiefel manifold".into(),
                    ))
                }
            };
            let f = if let Some(rows) = &section.f {
                matrix_from_rows(rows)?
            } else if let Some(upper) = &section.f_skew {
                if d != p {
                    return Err(Error::InvalidConfig(
                        "f_skew needs a square stiefel manifold".into(),
                    ));
                }
                return Ok(Box::new(VmfStiefel::skew(d, upper)?));
            } else if let Some(path) = &section.f_csv {
                matrix_from_csv(Path::new(path))?
            } else {
                return Err(Error::InvalidConfig("vmf-stiefel needs f, f_skew or f_csv".into()));
            };
            if f.shape() != (d, p) {
                return Err(Error::DimensionMismatch {
                    context: "vmf-stiefel f vs manifold",
                    expected: d * p,
                    got: f.nrows() * f.ncols(),
                });
            }
            Ok(Box::new(VmfStiefel::new(f)))
        }
        "spiked-cov" => Err(Error::InvalidConfig(
            "spiked-cov targets are driven by the covest subcommand".into(),
        )),
        other => Err(Error::InvalidConfig(format!("unknown target kind {other:?}"))),
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMat> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidConfig("ragged matrix rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    Ok(DMat::from_row_slice(rows.len(), ncols, &flat))
}

pub(crate) fn matrix_from_csv(path: &Path) -> Result<DMat> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
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
        rows.push(row);
    }
    matrix_from_rows(&rows)
}

/// Observable evaluators over a shared target handle.
pub fn compile_observables(
    names: &[String],
    target: std::sync::Arc<dyn TargetDensity>,
    ambient: usize,
) -> Result<Vec<(String, Box<dyn Fn(&DVec) -> f64 + Send + Sync>)>> {
    let mut out: Vec<(String, Box<dyn Fn(&DVec) -> f64 + Send + Sync>)> = Vec::new();
    for name in names {
        if name == "neglogpi" {
            let t = target.clone();
            out.push((name.clone(), Box::new(move |x: &DVec| t.potential(x))));
        } else if let Some(idx) = name.strip_prefix("coord:") {
            let i: usize = idx
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad observable {name:?}")))?;
            if i >= ambient {
                return Err(Error::InvalidConfig(format!(
                    "observable {name:?} out of range for ambient dimension {ambient}"
                )));
            }
            out.push((name.clone(), Box::new(move |x: &DVec| x[i])));
        } else {
            return Err(Error::InvalidConfig(format!("unknown observable {name:?}")));
        }
    }
    Ok(out)
}

/// Covariance-estimation run description (the `covest` subcommand).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CovestConfig {
    pub name: String,
    /// CSV of data vectors (rows). Ignored when `synthetic = true`.
    pub data: String,
    pub skip_header: bool,
    /// Data dimension (columns).
    pub p: usize,
    /// Spike rank; 0 means the default `ceil(p/6)`.
    pub m: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sampler: SamplerSection,
    /// MAP descent steps (0 skips the MAP baseline).
    pub map_steps: usize,
    pub map_lr: f64,
    /// Generate synthetic spiked data instead of reading `data`.
    pub synthetic: bool,
    pub synthetic_count: usize,
    pub synthetic_seed: u64,
    pub synthetic_d1: (f64, f64),
    pub synthetic_d2: (f64, f64),
}

impl Default for CovestConfig {
    fn default() -> Self {
        Self {
            name: "covest".into(),
            data: String::new(),
            skip_header: false,
            p: 0,
            m: 0,
            sigma1: 2.0,
            sigma2: 2.0,
            sampler: SamplerSection {
                kind: "rt-chmc".into(),
                mean_duration: 0.05,
                dt_max: 5e-3,
                n_samples: 20_000,
                shake_tol: 1e-9,
                ..Default::default()
            },
            map_steps: 500,
            map_lr: 1e-3,
            synthetic: false,
            synthetic_count: 0,
            synthetic_seed: 0,
            synthetic_d1: (5.0, 50.0),
            synthetic_d2: (0.05, 0.5),
        }
    }
}

impl CovestConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        }
    }

    pub fn spike_rank(&self) -> usize {
        if self.m == 0 {
            crate::covest::CovModel::default_rank(self.p)
        } else {
            self.m
        }
    }
}

/// Builds the spiked-covariance target for diagnostics purposes.
pub fn spiked_cov_target(model: crate::covest::CovModel) -> SpikedCov {
    SpikedCov::new(model)
}
