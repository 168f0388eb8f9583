//! Chain-quality and estimator-quality metrics.
//!
//! The integrated autocorrelation of an observable series `f_1..f_N`,
//!
//! ```text
//! tau = 1 + 2 sum_{i=1}^{M} c(i)/c(0),
//! c(i) = (1/(N-i)) sum_{n=1}^{N-i} (f_n - mu)(f_{n+i} - mu),
//! ```
//!
//! measures how many chain steps one effectively independent sample costs:
//! `ESS = N / tau`, and the Monte Carlo standard error of the series mean is
//! `sqrt(tau * var / N)`. The lag cap defaults to `N/50`; no automatic
//! windowing is applied.
//!
//! For covariance matrices the module provides the relative Frobenius error
//! and the generalized-eigenvalue distance
//! `d(A, B) = sqrt(sum_i ln^2 lambda_i)` over `det(lambda A - B) = 0`,
//! which is invariant under joint congruence and joint inversion.

use crate::{DMat, Error, Result};
use nalgebra::Cholesky;
use serde::Serialize;

/// Lag cap as a fraction of the series length: `M = N / 50`.
pub const DEFAULT_LAG_FRACTION: usize = 50;

/// Lower clamp applied to the integrated autocorrelation so a pathological
/// negative estimate cannot produce a negative variance.
pub const DEFAULT_TAU_FLOOR: f64 = 0.01;

/// Integrated autocorrelation estimate of one observable series.
#[derive(Debug, Clone, Serialize)]
pub struct IacEstimate {
    /// Integrated autocorrelation (clamped at the floor).
    pub tau: f64,
    /// Lag cap `M` used for the estimate.
    pub lag_cap: usize,
    /// Autocovariances `c(0..=M)`.
    pub autocovariances: Vec<f64>,
    /// Effective sample size `N / tau`.
    pub ess: f64,
    /// True when the series was (numerically) constant; `tau` is then 1 by
    /// convention and the autocorrelations are meaningless.
    pub constant: bool,
    /// True when the raw estimate fell below the floor and was clamped.
    pub clamped: bool,
}

/// Autocovariances `c(0..=max_lag)` about the full-series mean. `c(0)` is
/// the population variance (1/N convention). Errors when `max_lag >= N`.
///
/// Direct `O(N * max_lag)` summation.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag >= n {
        return Err(Error::LagTooLarge { max_lag, len: n });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|f| f - mean).collect();
    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let m = n - lag;
        let sum: f64 = (0..m).map(|i| centered[i] * centered[i + lag]).sum();
        out.push(sum / m as f64);
    }
    Ok(out)
}

/// Transform-based fast path for [`autocovariance`]: the same estimator up
/// to floating round-off, computed in `O(N log N)` via zero-padded FFT
/// correlation. Worth it once `N * max_lag` gets large.
pub fn autocovariance_fft(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    use rustfft::{num_complex::Complex, FftPlanner};
    let n = series.len();
    if max_lag >= n {
        return Err(Error::LagTooLarge { max_lag, len: n });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    // Pad past n + max_lag so circular correlation equals linear correlation
    // at every lag we read out.
    let size = (n + max_lag + 1).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(size);
    buf.extend(series.iter().map(|&f| Complex::new(f - mean, 0.0)));
    buf.resize(size, Complex::new(0.0, 0.0));

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);

    let scale = 1.0 / size as f64;
    Ok((0..=max_lag)
        .map(|lag| buf[lag].re * scale / (n - lag) as f64)
        .collect())
}

/// Direct summation below this `(N - M) * M` work bound, FFT above it.
const AUTOCOV_FFT_THRESHOLD: usize = 1 << 27;

fn autocovariance_auto(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag < n && n.saturating_sub(max_lag) * max_lag > AUTOCOV_FFT_THRESHOLD {
        autocovariance_fft(series, max_lag)
    } else {
        autocovariance(series, max_lag)
    }
}

/// Integrated autocorrelation with the default lag cap `N/50` and floor.
pub fn iac_default(series: &[f64]) -> Result<IacEstimate> {
    let cap = (series.len() / DEFAULT_LAG_FRACTION).max(1);
    iac(series, cap)
}

/// Integrated autocorrelation with an explicit lag cap and the default
/// floor.
pub fn iac(series: &[f64], max_lag: usize) -> Result<IacEstimate> {
    iac_with_floor(series, max_lag, DEFAULT_TAU_FLOOR)
}

/// Integrated autocorrelation with explicit lag cap and clamp floor.
pub fn iac_with_floor(series: &[f64], max_lag: usize, floor: f64) -> Result<IacEstimate> {
    let n = series.len();
    let cov = autocovariance_auto(series, max_lag)?;
    if cov[0] <= 0.0 {
        // Constant series: correlations are undefined; report independence.
        return Ok(IacEstimate {
            tau: 1.0,
            lag_cap: max_lag,
            autocovariances: cov,
            ess: n as f64,
            constant: true,
            clamped: false,
        });
    }
    let raw = 1.0 + 2.0 * cov[1..].iter().map(|c| c / cov[0]).sum::<f64>();
    let clamped = raw < floor;
    let tau = if clamped { floor } else { raw };
    Ok(IacEstimate {
        tau,
        lag_cap: max_lag,
        autocovariances: cov,
        ess: n as f64 / tau,
        constant: false,
        clamped,
    })
}

/// Series mean with an autocorrelation-corrected standard error,
/// `stderr = sqrt(tau * var / N)`. Requires at least 100 values.
pub fn mc_average_with_error(series: &[f64]) -> Result<(f64, f64)> {
    let n = series.len();
    if n < 100 {
        return Err(Error::SeriesTooShort { need: 100, got: n });
    }
    let est = iac_default(series)?;
    let mean = series.iter().sum::<f64>() / n as f64;
    let stderr = (est.tau * est.autocovariances[0] / n as f64).sqrt();
    Ok((mean, stderr))
}

/// Generalized-eigenvalue distance between SPD matrices,
/// `sqrt(sum ln^2 lambda_i)` over `det(lambda A - B) = 0`. Computed by
/// Cholesky whitening: the `lambda_i` are the eigenvalues of
/// `L^{-1} B L^{-T}` with `A = L L^T`.
pub fn forstner_metric(a: &DMat, b: &DMat) -> Result<f64> {
    check_same_square(a, b)?;
    let chol = Cholesky::new(a.clone()).ok_or(Error::NotSpd("forstner_metric lhs"))?;
    let l = chol.l();
    let t = l
        .solve_lower_triangular(b)
        .ok_or(Error::NotSpd("forstner_metric lhs"))?;
    let whitened = l
        .solve_lower_triangular(&t.transpose())
        .ok_or(Error::NotSpd("forstner_metric lhs"))?;
    // Symmetrize against round-off before the eigensolve.
    let sym = 0.5 * (&whitened + whitened.transpose());
    let eig = sym.symmetric_eigen();
    let mut sum = 0.0;
    for &lambda in eig.eigenvalues.iter() {
        if lambda <= 0.0 {
            return Err(Error::NotSpd("forstner_metric rhs"));
        }
        sum += lambda.ln().powi(2);
    }
    Ok(sum.sqrt())
}

/// Relative Frobenius error `|A - B|_F / |A|_F`. Errors when `A` is zero.
pub fn rel_frobenius(a: &DMat, b: &DMat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            context: "rel_frobenius",
            expected: a.nrows() * a.ncols(),
            got: b.nrows() * b.ncols(),
        });
    }
    let denom = a.norm();
    if denom == 0.0 {
        return Err(Error::NonFinite("rel_frobenius with zero reference"));
    }
    Ok((a - b).norm() / denom)
}

fn check_same_square(a: &DMat, b: &DMat) -> Result<()> {
    if a.nrows() != a.ncols() || a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            context: "matrix metric",
            expected: a.nrows() * a.nrows(),
            got: b.nrows() * b.ncols(),
        });
    }
    Ok(())
}

/// One-sample Kolmogorov-Smirnov test of `samples` against a continuous CDF.
/// Returns the statistic and the asymptotic p-value.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut u: Vec<f64> = samples.iter().map(|&x| cdf(x)).collect();
    u.sort_by(|a, b| a.partial_cmp(b).expect("non-finite CDF value"));
    let n = u.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        let lo = ui - i as f64 / n;
        let hi = (i + 1) as f64 / n - ui;
        d = d.max(lo).max(hi);
    }
    (d, ks_p_value(n.sqrt() * d))
}

/// Asymptotic Kolmogorov distribution tail `Q(t) = 2 sum (-1)^{k-1} e^{-2 k^2 t^2}`.
fn ks_p_value(t: f64) -> f64 {
    if t < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * t * t).exp();
        if term < 1e-16 {
            break;
        }
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Observable diagnostics as emitted in the CLI's JSON records.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRecord {
    pub observable: String,
    pub tau: f64,
    pub ess: f64,
    pub mean: f64,
    pub stderr: f64,
    pub lag_cap: usize,
    pub n: usize,
}

/// Full diagnostics of one observable series: IAC, ESS, mean and error bar.
pub fn diagnose_series(name: &str, series: &[f64], max_lag: usize) -> Result<DiagnosticsRecord> {
    let est = iac(series, max_lag)?;
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let stderr = (est.tau * est.autocovariances[0].max(0.0) / n as f64).sqrt();
    Ok(DiagnosticsRecord {
        observable: name.to_string(),
        tau: est.tau,
        ess: est.ess,
        mean,
        stderr,
        lag_cap: est.lag_cap,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn lag_zero_is_population_variance() {
        let series = [1.0, 2.0, 3.0, 4.0];
        let cov = autocovariance(&series, 0).unwrap();
        // mean 2.5, population variance 1.25
        assert_abs_diff_eq!(cov[0], 1.25, epsilon = 1e-15);
    }

    #[test]
    fn alternating_series_has_lag_one_correlation_minus_one() {
        let series: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let cov = autocovariance(&series, 1).unwrap();
        assert!((cov[1] / cov[0] + 1.0).abs() <= 1e-2);
    }

    #[test]
    fn iid_normals_are_nearly_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let series: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let cov = autocovariance(&series, 1).unwrap();
        assert!((cov[1] / cov[0]).abs() <= 0.02);
        let est = iac(&series, 2000).unwrap();
        assert!((0.8..=1.2).contains(&est.tau), "iid tau {}", est.tau);
    }

    #[test]
    fn lag_cap_must_be_below_length() {
        let series = [1.0, 2.0, 3.0];
        assert!(matches!(
            autocovariance(&series, 3),
            Err(Error::LagTooLarge { .. })
        ));
    }

    #[test]
    fn constant_series_is_flagged() {
        let series = [2.0; 500];
        let est = iac(&series, 10).unwrap();
        assert!(est.constant);
        assert_eq!(est.tau, 1.0);
        let (mean, stderr) = mc_average_with_error(&series).unwrap();
        assert_eq!(mean, 2.0);
        assert_eq!(stderr, 0.0);
    }

    #[test]
    fn period_two_series_is_clamped_not_crashing() {
        // Alternating 5, 7, ...: correlations are exactly (-1)^i, so an odd
        // lag cap drives the raw estimate to -1 and engages the clamp.
        let series: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 5.0 } else { 7.0 }).collect();
        let est = iac(&series, 21).unwrap();
        assert!(est.clamped);
        assert_eq!(est.tau, DEFAULT_TAU_FLOOR);
        assert_abs_diff_eq!(est.ess * est.tau, 1000.0, epsilon = 1e-9);
    }

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = (1.0 - rho * rho).sqrt();
        let mut series = Vec::with_capacity(n);
        let mut x: f64 = StandardNormal.sample(&mut rng);
        for _ in 0..n {
            series.push(x);
            let xi: f64 = StandardNormal.sample(&mut rng);
            x = rho * x + noise * xi;
        }
        series
    }

    #[test]
    fn ar1_iac_matches_analytic_value() {
        // tau = (1 + rho) / (1 - rho) = 19 for rho = 0.9. The lag cap only
        // needs to clear the correlation length; summing far beyond it just
        // accumulates estimator noise, so cap at 500 >> tau here.
        let series = ar1(0.9, 1_000_000, 3);
        let est = iac(&series, 500).unwrap();
        assert!(
            (est.tau - 19.0).abs() <= 0.15 * 19.0,
            "AR(1) tau {} vs 19",
            est.tau
        );
    }

    #[test]
    fn stderr_tracks_iid_and_ar1_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let iid: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (_, stderr) = mc_average_with_error(&iid).unwrap();
        let expect = 1.0 / (n as f64).sqrt();
        assert!((stderr - expect).abs() <= 0.2 * expect, "iid stderr {stderr}");

        let series = ar1(0.9, 1_000_000, 4);
        let (_, stderr) = mc_average_with_error(&series).unwrap();
        let expect = (19.0f64 / series.len() as f64).sqrt();
        assert!(
            (stderr - expect).abs() <= 0.25 * expect,
            "AR(1) stderr {stderr} vs {expect}"
        );
    }

    #[test]
    fn fft_path_matches_direct_summation() {
        let series = ar1(0.8, 20_000, 21);
        let direct = autocovariance(&series, 400).unwrap();
        let fast = autocovariance_fft(&series, 400).unwrap();
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).abs() <= 1e-10 * direct[0], "{a} vs {b}");
        }
    }

    #[test]
    fn shift_invariance_of_autocovariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let series: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let shifted: Vec<f64> = series.iter().map(|v| v + 123.456).collect();
        let a = autocovariance(&series, 50).unwrap();
        let b = autocovariance(&shifted, 50).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-10);
        }
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMat {
        let a = DMat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &a * a.transpose() + DMat::identity(n, n) * 0.5
    }

    #[test]
    fn forstner_zero_at_equal_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_spd(6, &mut rng);
        assert!(forstner_metric(&a, &a).unwrap() <= 1e-10);
    }

    #[test]
    fn forstner_scaled_identity() {
        for n in [2usize, 5, 9] {
            let a = DMat::identity(n, n) * 2.0;
            let b = DMat::identity(n, n);
            let d = forstner_metric(&a, &b).unwrap();
            let expect = (n as f64).sqrt() * (2.0f64).ln();
            assert_abs_diff_eq!(d, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn forstner_symmetry_and_congruence_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let a = random_spd(10, &mut rng);
            let b = random_spd(10, &mut rng);
            let d_ab = forstner_metric(&a, &b).unwrap();
            let d_ba = forstner_metric(&b, &a).unwrap();
            assert!((d_ab - d_ba).abs() <= 1e-10);

            let m = DMat::from_fn(10, 10, |_, _| rng.sample::<f64, _>(StandardNormal))
                + DMat::identity(10, 10) * 2.0;
            let a_c = m.transpose() * &a * &m;
            let b_c = m.transpose() * &b * &m;
            let d_c = forstner_metric(&a_c, &b_c).unwrap();
            assert!(
                (d_ab - d_c).abs() <= 1e-8,
                "congruence invariance broke: {d_ab} vs {d_c}"
            );

            // Joint inversion invariance.
            let a_inv = a.clone().try_inverse().unwrap();
            let b_inv = b.clone().try_inverse().unwrap();
            let d_inv = forstner_metric(&a_inv, &b_inv).unwrap();
            assert!((d_ab - d_inv).abs() <= 1e-8);
        }
    }

    #[test]
    fn forstner_rejects_non_spd() {
        let a = DMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMat::identity(2, 2);
        assert!(forstner_metric(&a, &b).is_err());
        assert!(forstner_metric(&b, &a).is_err());
    }

    #[test]
    fn rel_frobenius_basics() {
        let a = DMat::identity(2, 2);
        assert_eq!(rel_frobenius(&a, &a).unwrap(), 0.0);
        let zero = DMat::zeros(2, 2);
        assert_eq!(rel_frobenius(&a, &zero).unwrap(), 1.0);
        assert!(rel_frobenius(&zero, &a).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_spd(4, &mut rng);
        let b = random_spd(4, &mut rng);
        let direct = (&a - &b).norm() / a.norm();
        assert_abs_diff_eq!(rel_frobenius(&a, &b).unwrap(), direct, epsilon = 1e-12);
    }

    #[test]
    fn ks_test_accepts_uniform_rejects_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let (_, p) = ks_test(&samples, |x| x.clamp(0.0, 1.0));
        assert!(p > 0.01, "uniform KS p = {p}");
        let (_, p_bad) = ks_test(&samples, |x| (x * x).clamp(0.0, 1.0));
        assert!(p_bad < 1e-6);
    }
}
