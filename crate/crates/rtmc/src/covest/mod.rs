//! Bayesian covariance estimation with a low-rank-plus-diagonal model.
//!
//! The covariance of `p`-dimensional data is modeled as
//! `Sigma = X D1 X^T + D2` with `X` on the Stiefel manifold `V_{p,m}` and
//! `D1`, `D2` positive diagonal. A uniform prior sits on `X`, half-normal
//! priors on the diagonals. The posterior is sampled on the product manifold
//! `V_{p,m} x R^m_+ x R^p_+`, positivity being enforced by the samplers'
//! rejection condition rather than a reparametrization.
//!
//! The pipeline: [`ingest`] CSV data, [`normalize`] columns to unit standard
//! deviation, [`initialize`] from an eigendecomposition of the sample
//! covariance, then either [`map_estimate`] (projected gradient descent) or
//! [`posterior_estimate`] (chain on the product manifold, accumulating
//! entrywise moments of `Sigma` and its inverse). Estimates in normalized
//! units are rescaled back through the outer product of the column scales.

use crate::manifold::{Factor, ProductManifold, Stiefel};
use crate::samplers::{rt_chmc_metropolis, SamplerConfig};
use crate::targets::{SpikedCov, TargetDensity};
use crate::{DMat, DVec, Error, Result};
use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;
use std::path::Path;

/// Diagonal clamp used by initialization and MAP descent (never by the
/// sampler, which relies on rejection).
pub const DIAG_CLAMP: f64 = 1e-6;

/// Data summary and model hyperparameters for the spiked-covariance
/// posterior. Holds the scatter matrix of the (centered, scaled) data so a
/// potential evaluation costs one Cholesky of `Sigma` plus traces.
#[derive(Debug, Clone)]
pub struct CovModel {
    /// Data dimension `p`.
    pub p: usize,
    /// Spike rank `m` (`m < p`).
    pub m: usize,
    /// Number of data vectors.
    pub n_obs: usize,
    /// Half-normal prior scale on the spike magnitudes (normalized units).
    pub sigma1: f64,
    /// Half-normal prior scale on the diagonal part (normalized units).
    pub sigma2: f64,
    /// Scatter matrix `S = sum_i (x_i - mean)(x_i - mean)^T` of the
    /// normalized data.
    pub scatter: DMat,
    /// Sample mean of the raw data.
    pub mean: DVec,
    /// Column standard deviations of the raw data, for rescaling estimates.
    pub col_sd: DVec,
}

impl CovModel {
    /// Builds the model from already-normalized data (see [`normalize`]).
    pub fn from_normalized(
        normalized: &Normalized,
        m: usize,
        sigma1: f64,
        sigma2: f64,
    ) -> Result<Self> {
        let n_obs = normalized.data.len();
        if n_obs == 0 {
            return Err(Error::InvalidConfig("no data vectors".into()));
        }
        let p = normalized.data[0].len();
        if m >= p {
            return Err(Error::InvalidConfig(format!(
                "spike rank m={m} must be below dimension p={p}"
            )));
        }
        let mut scatter = DMat::zeros(p, p);
        for x in &normalized.data {
            scatter.ger(1.0, x, x, 1.0);
        }
        Ok(Self {
            p,
            m,
            n_obs,
            sigma1,
            sigma2,
            scatter,
            mean: normalized.mean.clone(),
            col_sd: normalized.scale.clone(),
        })
    }

    /// Default spike rank `ceil(p / 6)`.
    pub fn default_rank(p: usize) -> usize {
        p.div_ceil(6).max(1)
    }

    /// Sample covariance `S / n` of the normalized data.
    pub fn sample_cov(&self) -> DMat {
        &self.scatter / self.n_obs as f64
    }

    /// The product manifold `V_{p,m} x R^m_+ x R^p_+` the posterior lives on.
    pub fn manifold(&self) -> ProductManifold {
        ProductManifold::new(vec![
            Factor::manifold(Stiefel::new(self.p, self.m)),
            Factor::euclidean(self.m, true),
            Factor::euclidean(self.p, true),
        ])
    }
}

/// Model parameters `(X, d1, d2)` in matrix/vector form.
#[derive(Debug, Clone)]
pub struct Theta {
    pub x: DMat,
    pub d1: DVec,
    pub d2: DVec,
}

impl Theta {
    /// Flattens into ambient coordinates of the product manifold
    /// (column-major `X`, then `d1`, then `d2`).
    pub fn to_ambient(&self) -> DVec {
        let total = self.x.len() + self.d1.len() + self.d2.len();
        DVec::from_iterator(
            total,
            self.x
                .as_slice()
                .iter()
                .chain(self.d1.iter())
                .chain(self.d2.iter())
                .cloned(),
        )
    }

    /// Reads ambient coordinates back into `(X, d1, d2)`.
    pub fn from_ambient(theta: &DVec, p: usize, m: usize) -> Self {
        let xs = theta.as_slice();
        Self {
            x: DMat::from_column_slice(p, m, &xs[..p * m]),
            d1: DVec::from_column_slice(&xs[p * m..p * m + m]),
            d2: DVec::from_column_slice(&xs[p * m + m..]),
        }
    }

    /// Assembles `Sigma = X D1 X^T + D2`.
    pub fn sigma(&self) -> DMat {
        let mut sigma = &self.x * DMat::from_diagonal(&self.d1) * self.x.transpose();
        for i in 0..self.d2.len() {
            sigma[(i, i)] += self.d2[i];
        }
        sigma
    }
}

/// Output of [`normalize`].
#[derive(Debug, Clone)]
pub struct Normalized {
    /// Centered, column-scaled data vectors.
    pub data: Vec<DVec>,
    /// Column standard deviations used for scaling (1.0 where flagged).
    pub scale: DVec,
    /// Column means of the raw data.
    pub mean: DVec,
    /// Indices of near-constant columns left unscaled.
    pub flagged: Vec<usize>,
}

/// Posterior and MAP estimates with entrywise uncertainty, in raw data units.
#[derive(Debug, Clone)]
pub struct CovReport {
    /// Posterior mean of `Sigma`.
    pub sigma_mean: DMat,
    /// Entrywise posterior standard deviation of `Sigma`.
    pub sigma_sd: DMat,
    /// Posterior mean of `Sigma^{-1}` (accumulated from per-sample inverses).
    pub sigma_inv_mean: DMat,
    /// MAP estimate, when one was computed.
    pub sigma_map: Option<DMat>,
    /// Comparison metrics against a reference covariance, when provided.
    pub metrics: BTreeMap<String, f64>,
    /// Acceptance rate of the posterior chain.
    pub acceptance_rate: f64,
    /// Number of posterior samples accumulated.
    pub n_samples: usize,
}

/// Reads an `n x p` numeric CSV into data vectors. Rejects non-finite
/// entries and rows of the wrong width, naming the offending 1-based row.
pub fn ingest(path: &Path, p: usize, skip_header: bool) -> Result<Vec<DVec>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    let path_str = path.display().to_string();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1 + usize::from(skip_header);
        let record = record?;
        if record.len() != p {
            return Err(Error::DataParse {
                path: path_str,
                row,
                message: format!("expected {p} columns, found {}", record.len()),
            });
        }
        let mut x = DVec::zeros(p);
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::DataParse {
                path: path_str.clone(),
                row,
                message: format!("column {} is not numeric: {field:?}", j + 1),
            })?;
            if !value.is_finite() {
                return Err(Error::DataParse {
                    path: path_str.clone(),
                    row,
                    message: format!("non-finite value in column {}", j + 1),
                });
            }
            x[j] = value;
        }
        out.push(x);
    }
    Ok(out)
}

/// Centers each column and scales it to unit sample standard deviation
/// (unbiased, `n - 1` denominator). Columns with standard deviation below
/// `1e-12` are flagged and left unscaled. A covariance estimated from the
/// output maps back to raw units by entrywise multiplication with the outer
/// product of the returned scales.
pub fn normalize(data: &[DVec]) -> Result<Normalized> {
    let n = data.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: n });
    }
    let p = data[0].len();
    let mut mean = DVec::zeros(p);
    for x in data {
        mean += x;
    }
    mean /= n as f64;
    let mut var = DVec::zeros(p);
    for x in data {
        for j in 0..p {
            var[j] += (x[j] - mean[j]).powi(2);
        }
    }
    var /= (n - 1) as f64;
    let mut scale = DVec::from_element(p, 1.0);
    let mut flagged = Vec::new();
    for j in 0..p {
        let sd = var[j].sqrt();
        if sd < 1e-12 {
            flagged.push(j);
        } else {
            scale[j] = sd;
        }
    }
    let normalized = data
        .iter()
        .map(|x| DVec::from_fn(p, |j, _| (x[j] - mean[j]) / scale[j]))
        .collect();
    Ok(Normalized {
        data: normalized,
        scale,
        mean,
        flagged,
    })
}

/// Initializes the chain from an eigendecomposition of the sample
/// covariance: `D2` starts at the diagonal of `Sigma_S`, and the top-`m`
/// eigenpairs of `Sigma_S - D2` seed `X` and `D1`. Eigenvalues and diagonal
/// entries are clamped at [`DIAG_CLAMP`] so the starting point is feasible.
pub fn initialize(model: &CovModel) -> Result<Theta> {
    let sigma_s = model.sample_cov();
    let d2_raw = sigma_s.diagonal();
    let mut hollow = sigma_s;
    for i in 0..model.p {
        hollow[(i, i)] = 0.0;
    }
    let eig = hollow.symmetric_eigen();
    // Sort eigenpairs by descending eigenvalue.
    let mut order: Vec<usize> = (0..model.p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("non-finite eigenvalue")
    });
    let mut x0 = DMat::zeros(model.p, model.m);
    let mut d1 = DVec::zeros(model.m);
    for (k, &idx) in order.iter().take(model.m).enumerate() {
        x0.set_column(k, &eig.eigenvectors.column(idx));
        d1[k] = eig.eigenvalues[idx].max(DIAG_CLAMP);
    }
    // Eigenvectors of a symmetric matrix are already orthonormal; a thin QR
    // guards against degeneracy in repeated eigenvalues.
    let x0 = orthonormalize(&x0);
    let d2 = DVec::from_fn(model.p, |i, _| d2_raw[i].max(DIAG_CLAMP));
    Ok(Theta { x: x0, d1, d2 })
}

/// Closest-orthonormal projection via thin QR with sign-fixed diagonal.
fn orthonormalize(a: &DMat) -> DMat {
    let (rows, cols) = a.shape();
    let qr = a.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix column signs so the factorization is unique.
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            for i in 0..rows {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Polar projection: nearest matrix with orthonormal columns in Frobenius
/// norm, `UV^T` from the thin SVD.
fn polar_project(a: &DMat) -> DMat {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    u * v_t
}

/// Projected gradient descent for the posterior mode: full-gradient steps,
/// `X` re-orthonormalized by polar projection, diagonals clamped at
/// [`DIAG_CLAMP`]. The step size is halved whenever a step would increase
/// the potential by more than `1e-8`; descent stops early once the step
/// size underflows.
pub fn map_estimate(model: &CovModel, theta0: &Theta, steps: usize, lr: f64) -> Result<Theta> {
    let target = SpikedCov::new(model.clone());
    let mut theta = theta0.clone();
    let mut lr = lr;
    let mut u_curr = target.potential(&theta.to_ambient());
    if !u_curr.is_finite() {
        return Err(Error::NonFinite("map_estimate starting potential"));
    }
    for _ in 0..steps {
        let ambient = theta.to_ambient();
        let grad = target.gradient(&ambient);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("map_estimate gradient"));
        }
        loop {
            let candidate = descend(&theta, &grad, lr, model);
            let u_new = target.potential(&candidate.to_ambient());
            if u_new.is_finite() && u_new <= u_curr + 1e-8 {
                theta = candidate;
                u_curr = u_new;
                break;
            }
            lr *= 0.5;
            if lr < 1e-16 {
                return Ok(theta);
            }
        }
    }
    Ok(theta)
}

fn descend(theta: &Theta, grad: &DVec, lr: f64, model: &CovModel) -> Theta {
    let ambient = theta.to_ambient();
    let stepped = &ambient - lr * grad;
    let raw = Theta::from_ambient(&stepped, model.p, model.m);
    Theta {
        x: polar_project(&raw.x),
        d1: raw.d1.map(|v| v.max(DIAG_CLAMP)),
        d2: raw.d2.map(|v| v.max(DIAG_CLAMP)),
    }
}

/// Runs the Metropolis-adjusted randomized-duration chain on the product
/// manifold and accumulates entrywise means and variances of `Sigma` and
/// `Sigma^{-1}` over the recorded samples. Estimates are rescaled to raw
/// data units through `model.col_sd`. `sigma_map`, when provided, is
/// rescaled and embedded in the report so all downstream metrics share one
/// code path.
pub fn posterior_estimate(
    model: &CovModel,
    theta0: &Theta,
    cfg: &SamplerConfig,
    sigma_map: Option<&Theta>,
) -> Result<CovReport> {
    let manifold = model.manifold();
    let target = SpikedCov::new(model.clone());
    let mut cfg = cfg.clone();
    cfg.nonneg_blocks = manifold.nonneg_ranges();
    let x0 = theta0.to_ambient();
    let record = rt_chmc_metropolis(&manifold, &target, &x0, &cfg)?;

    let p = model.p;
    let mut mean = DMat::zeros(p, p);
    let mut m2 = DMat::zeros(p, p);
    let mut inv_mean = DMat::zeros(p, p);
    let mut count = 0usize;
    for sample in &record.samples {
        let theta = Theta::from_ambient(sample, model.p, model.m);
        let sigma = theta.sigma();
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::NotSpd("sampled Sigma"))?;
        let inv = chol.inverse();
        count += 1;
        let w = 1.0 / count as f64;
        // Entrywise Welford update.
        for i in 0..p {
            for j in 0..p {
                let delta = sigma[(i, j)] - mean[(i, j)];
                mean[(i, j)] += delta * w;
                m2[(i, j)] += delta * (sigma[(i, j)] - mean[(i, j)]);
                let di = inv[(i, j)] - inv_mean[(i, j)];
                inv_mean[(i, j)] += di * w;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidConfig("posterior chain produced no samples".into()));
    }
    let sd = DMat::from_fn(p, p, |i, j| (m2[(i, j)] / count as f64).max(0.0).sqrt());

    let s = &model.col_sd;
    let rescale = DMat::from_fn(p, p, |i, j| s[i] * s[j]);
    let rescale_inv = DMat::from_fn(p, p, |i, j| 1.0 / (s[i] * s[j]));
    let sigma_map = sigma_map.map(|t| t.sigma().component_mul(&rescale));

    Ok(CovReport {
        sigma_mean: mean.component_mul(&rescale),
        sigma_sd: sd.component_mul(&rescale),
        sigma_inv_mean: inv_mean.component_mul(&rescale_inv),
        sigma_map,
        metrics: BTreeMap::new(),
        acceptance_rate: record.acceptance_rate,
        n_samples: count,
    })
}

/// Fills `report.metrics` against a reference covariance using the
/// diagnostics-module distances (the same code paths the CLI reports).
pub fn attach_metrics(report: &mut CovReport, reference: &DMat) -> Result<()> {
    use crate::diagnostics::{forstner_metric, rel_frobenius};
    report
        .metrics
        .insert("rel_frobenius".into(), rel_frobenius(reference, &report.sigma_mean)?);
    let ref_inv = Cholesky::new(reference.clone())
        .ok_or(Error::NotSpd("reference covariance"))?
        .inverse();
    report.metrics.insert(
        "rel_frobenius_inverse".into(),
        rel_frobenius(&ref_inv, &report.sigma_inv_mean)?,
    );
    report.metrics.insert(
        "forstner".into(),
        forstner_metric(reference, &report.sigma_mean)?,
    );
    if let Some(map) = &report.sigma_map {
        report
            .metrics
            .insert("rel_frobenius_map".into(), rel_frobenius(reference, map)?);
        report
            .metrics
            .insert("forstner_map".into(), forstner_metric(reference, map)?);
    }
    Ok(())
}

/// Synthetic spiked-covariance data: `X` uniform on the Stiefel manifold
/// (QR of a Gaussian matrix), spike magnitudes log-uniform in `d1_range`,
/// diagonal noise log-uniform in `d2_range`, and `count` Gaussian data
/// vectors drawn from the assembled covariance. Returns the data and the
/// true covariance.
pub fn synthetic_spiked(
    p: usize,
    m: usize,
    count: usize,
    d1_range: (f64, f64),
    d2_range: (f64, f64),
    seed: u64,
) -> (Vec<DVec>, DMat) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = DMat::from_fn(p, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = orthonormalize(&gauss);
    let log_uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| -> f64 {
        (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
    };
    let d1 = DVec::from_fn(m, |_, _| log_uniform(&mut rng, d1_range));
    let d2 = DVec::from_fn(p, |_, _| log_uniform(&mut rng, d2_range));
    let theta = Theta { x, d1, d2 };
    let sigma = theta.sigma();
    let chol = Cholesky::new(sigma.clone()).expect("synthetic covariance is SPD");
    let l = chol.l();
    let data = (0..count)
        .map(|_| {
            let z = DVec::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
            &l * z
        })
        .collect();
    (data, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    #[test]
    fn ingest_parses_small_csv() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, "1,2\n3,4\n5,6\n").unwrap();
        let data = ingest(file.path(), 2, false).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data[1].as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn ingest_skips_header_when_asked() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, "a,b\n1,2\n3,4\n5,6\n").unwrap();
        let data = ingest(file.path(), 2, true).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data[0].as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn ingest_names_bad_row() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, "1,2\nabc,4\n").unwrap();
        let err = ingest(file.path(), 2, false).unwrap_err();
        match err {
            Error::DataParse { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn normalize_unit_sd_and_constant_flag() {
        let data = vec![
            DVec::from_column_slice(&[0.0, 5.0]),
            DVec::from_column_slice(&[2.0, 5.0]),
        ];
        let norm = normalize(&data).unwrap();
        // Column 0: sd = sqrt(2), centered to +-1/sqrt(2).
        assert_abs_diff_eq!(norm.scale[0], (2.0f64).sqrt(), epsilon = 1e-15);
        let sd: f64 = norm.data.iter().map(|x| x[0] * x[0]).sum::<f64>() / 1.0;
        assert_abs_diff_eq!(sd.sqrt(), 1.0, epsilon = 1e-12);
        // Column 1 is constant: flagged, unscaled.
        assert_eq!(norm.flagged, vec![1]);
        assert_eq!(norm.scale[1], 1.0);
    }

    #[test]
    fn normalize_needs_two_rows() {
        let data = vec![DVec::from_column_slice(&[1.0, 2.0])];
        assert!(matches!(
            normalize(&data),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn initialize_is_feasible_and_clamped() {
        let (data, _) = synthetic_spiked(8, 2, 40, (5.0, 20.0), (0.1, 0.5), 9);
        let norm = normalize(&data).unwrap();
        let model = CovModel::from_normalized(&norm, 2, 2.0, 2.0).unwrap();
        let theta = initialize(&model).unwrap();
        let gram = theta.x.transpose() * &theta.x;
        let eye = DMat::identity(2, 2);
        assert!((gram - eye).amax() <= 1e-10);
        assert!(theta.d1.iter().all(|&v| v >= DIAG_CLAMP));
        assert!(theta.d2.iter().all(|&v| v >= DIAG_CLAMP));
    }

    #[test]
    fn initialize_recovers_diagonal_sample_cov() {
        // A scatter whose sample covariance is diagonal with large distinct
        // entries: the hollow part vanishes, so the reconstruction error is
        // only the clamped spike, far below the matrix norm.
        let p = 6;
        let n_obs = 4;
        let diag: Vec<f64> = (0..p).map(|i| 800.0 + 150.0 * i as f64).collect();
        let sigma_s = DMat::from_diagonal(&DVec::from_column_slice(&diag));
        let model = CovModel {
            p,
            m: 2,
            n_obs,
            sigma1: 2.0,
            sigma2: 2.0,
            scatter: &sigma_s * n_obs as f64,
            mean: DVec::zeros(p),
            col_sd: DVec::from_element(p, 1.0),
        };
        let theta = initialize(&model).unwrap();
        let sigma0 = theta.sigma();
        let rel = (&sigma0 - &sigma_s).norm() / sigma_s.norm();
        assert!(rel <= 1e-8, "relative reconstruction error {rel:.3e}");
    }

    #[test]
    fn map_estimate_descends_on_synthetic_data() {
        let (data, _) = synthetic_spiked(8, 2, 100, (5.0, 20.0), (0.1, 0.5), 31);
        let norm = normalize(&data).unwrap();
        let model = CovModel::from_normalized(&norm, 2, 2.0, 2.0).unwrap();
        let theta0 = initialize(&model).unwrap();
        let target = SpikedCov::new(model.clone());
        let u0 = target.potential(&theta0.to_ambient());
        let theta_map = map_estimate(&model, &theta0, 200, 1e-3).unwrap();
        let u_map = target.potential(&theta_map.to_ambient());
        assert!(u_map <= u0, "descent contract: {u_map} vs {u0}");
        let gram = theta_map.x.transpose() * &theta_map.x;
        assert!((gram - DMat::identity(2, 2)).amax() <= 1e-10);
    }

    #[test]
    fn map_estimate_fixed_point_at_stationary_start() {
        // With a zero gradient the iterate must not move. Construct a
        // stationary point by running descent to convergence first.
        let (data, _) = synthetic_spiked(6, 1, 60, (5.0, 20.0), (0.1, 0.5), 57);
        let norm = normalize(&data).unwrap();
        let model = CovModel::from_normalized(&norm, 1, 2.0, 2.0).unwrap();
        let theta0 = initialize(&model).unwrap();
        let near_opt = map_estimate(&model, &theta0, 3000, 1e-3).unwrap();
        let again = map_estimate(&model, &near_opt, 50, 1e-6).unwrap();
        let drift = (near_opt.to_ambient() - again.to_ambient()).amax();
        assert!(drift < 1e-4, "stationary start drifted by {drift:.3e}");
    }

    #[test]
    fn theta_round_trip() {
        let theta = Theta {
            x: DMat::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            d1: DVec::from_column_slice(&[7.0, 8.0]),
            d2: DVec::from_column_slice(&[9.0, 10.0, 11.0]),
        };
        let ambient = theta.to_ambient();
        let back = Theta::from_ambient(&ambient, 3, 2);
        assert_eq!(back.x, theta.x);
        assert_eq!(back.d1, theta.d1);
        assert_eq!(back.d2, theta.d2);
    }

    #[test]
    fn normalize_rescale_round_trip_full_rank() {
        // With m = p - 1 the model can represent any SPD matrix, so the
        // rescale contract is checked directly against the raw sample
        // covariance: cov(raw) == cov(normalized) .* (s s^T).
        let (data, _) = synthetic_spiked(4, 2, 50, (2.0, 8.0), (0.2, 0.8), 77);
        let norm = normalize(&data).unwrap();
        let n = data.len();
        let cov_of = |rows: &[DVec]| {
            let p = rows[0].len();
            let mut mean = DVec::zeros(p);
            for r in rows {
                mean += r;
            }
            mean /= n as f64;
            let mut cov = DMat::zeros(p, p);
            for r in rows {
                let d = r - &mean;
                cov.ger(1.0 / n as f64, &d, &d, 1.0);
            }
            cov
        };
        let raw_cov = cov_of(&data);
        let norm_cov = cov_of(&norm.data);
        let rescaled =
            norm_cov.component_mul(&DMat::from_fn(4, 4, |i, j| norm.scale[i] * norm.scale[j]));
        assert!((raw_cov - rescaled).amax() < 1e-10);
    }
}
