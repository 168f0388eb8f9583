use super::TargetDensity;
use crate::covest::{CovModel, Theta};
use crate::{DMat, DVec};
use nalgebra::Cholesky;

/// Negative log posterior of the spiked-covariance model over the ambient
/// coordinates of `V_{p,m} x R^m x R^p`:
///
/// ```text
/// U(X, d1, d2) = (n/2) logdet Sigma + (1/2) tr(Sigma^{-1} S)
///              + sum_j d1_j^2 / (2 sigma1^2) + sum_j d2_j^2 / (2 sigma2^2),
/// Sigma = X diag(d1) X^T + diag(d2),
/// ```
///
/// with `S` the scatter matrix of the centered data. The per-datum Gaussian
/// likelihood regroups into the trace form, so an evaluation costs one
/// Cholesky of `Sigma`. Positivity of the diagonals is the samplers'
/// rejection condition, not part of the potential; where `Sigma` fails its
/// Cholesky the potential is `+inf` and the gradient is NaN, both of which
/// surface as proposal rejection.
///
/// Writing `W = (n/2) Sigma^{-1} - (1/2) Sigma^{-1} S Sigma^{-1}`, the
/// gradient blocks are `dU/dX = 2 W X diag(d1)`,
/// `dU/dd1_j = x_j^T W x_j + d1_j / sigma1^2` and
/// `dU/dd2_j = W_jj + d2_j / sigma2^2`.
#[derive(Debug, Clone)]
pub struct SpikedCov {
    model: CovModel,
}

impl SpikedCov {
    pub fn new(model: CovModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &CovModel {
        &self.model
    }

    fn sigma(&self, theta: &Theta) -> DMat {
        theta.sigma()
    }
}

impl TargetDensity for SpikedCov {
    fn dim(&self) -> usize {
        self.model.p * self.model.m + self.model.m + self.model.p
    }

    fn potential(&self, x: &DVec) -> f64 {
        let m = &self.model;
        let theta = Theta::from_ambient(x, m.p, m.m);
        let sigma = self.sigma(&theta);
        let Some(chol) = Cholesky::new(sigma) else {
            return f64::INFINITY;
        };
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        // tr(Sigma^{-1} S) without forming the product: sum of the solve.
        let solved = chol.solve(&m.scatter);
        let trace = solved.trace();
        let prior1: f64 = theta.d1.iter().map(|d| d * d).sum::<f64>() / (2.0 * m.sigma1 * m.sigma1);
        let prior2: f64 = theta.d2.iter().map(|d| d * d).sum::<f64>() / (2.0 * m.sigma2 * m.sigma2);
        0.5 * m.n_obs as f64 * logdet + 0.5 * trace + prior1 + prior2
    }

    fn gradient_into(&self, x: &DVec, out: &mut DVec) {
        let m = &self.model;
        let theta = Theta::from_ambient(x, m.p, m.m);
        let sigma = self.sigma(&theta);
        let Some(chol) = Cholesky::new(sigma) else {
            out.fill(f64::NAN);
            return;
        };
        let inv = chol.inverse();
        // W = (n/2) Sigma^{-1} - (1/2) Sigma^{-1} S Sigma^{-1}, symmetric.
        let isi = &inv * &m.scatter * &inv;
        let w = 0.5 * m.n_obs as f64 * &inv - 0.5 * isi;

        let wx = &w * &theta.x;
        let p = m.p;
        let rank = m.m;
        // dU/dX = 2 W X diag(d1), column-major into the X block.
        for j in 0..rank {
            for i in 0..p {
                out[j * p + i] = 2.0 * wx[(i, j)] * theta.d1[j];
            }
        }
        // dU/dd1_j = x_j^T W x_j + prior.
        for j in 0..rank {
            let xj = theta.x.column(j);
            out[p * rank + j] = xj.dot(&wx.column(j)) + theta.d1[j] / (m.sigma1 * m.sigma1);
        }
        // dU/dd2_j = W_jj + prior.
        for j in 0..p {
            out[p * rank + rank + j] = w[(j, j)] + theta.d2[j] / (m.sigma2 * m.sigma2);
        }
    }

    fn name(&self) -> &str {
        "spiked-cov"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covest::{normalize, synthetic_spiked, CovModel};
    use crate::targets::test_util::assert_gradient_consistent;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn scalar_model(sigma2_prior: f64) -> CovModel {
        // m = 1, p = 1, one datum at the origin: S = 0.
        CovModel {
            p: 1,
            m: 1,
            n_obs: 1,
            sigma1: 1.0,
            sigma2: sigma2_prior,
            scatter: DMatrix::zeros(1, 1),
            mean: DVec::zeros(1),
            col_sd: DVec::from_element(1, 1.0),
        }
    }

    #[test]
    fn scalar_case_worked_by_hand() {
        // X = (1), d1 = 0, d2 = 1 => Sigma = 1, logdet = 0, trace term = 0.
        // dU/dd2 = n/2 * Sigma^{-1} - 0 + d2/sigma2^2 = 1/2 + 1/sigma2^2.
        let model = scalar_model(2.0);
        let t = SpikedCov::new(model);
        let theta = DVec::from_column_slice(&[1.0, 0.0, 1.0]);
        let u = t.potential(&theta);
        // Only the d2 prior contributes: 1/(2*4).
        assert_abs_diff_eq!(u, 0.125, epsilon = 1e-15);
        let g = t.gradient(&theta);
        assert_abs_diff_eq!(g[2], 0.5 + 0.25, epsilon = 1e-12);
        assert_gradient_consistent(&t, &theta, 1e-6);
    }

    fn random_feasible_theta(p: usize, m: usize, rng: &mut ChaCha8Rng) -> DVec {
        let gauss = DMat::from_fn(p, m, |_, _| StandardNormal.sample(rng));
        let q = gauss.qr().q();
        let d1 = DVec::from_fn(m, |_, _| 1.0 + rng.gen::<f64>() * 3.0);
        let d2 = DVec::from_fn(p, |_, _| 0.3 + rng.gen::<f64>());
        let theta = crate::covest::Theta { x: q, d1, d2 };
        theta.to_ambient()
    }

    #[test]
    fn gradient_matches_finite_differences_on_synthetic_model() {
        let (data, _) = synthetic_spiked(8, 2, 12, (3.0, 10.0), (0.2, 0.8), 5);
        let norm = normalize(&data).unwrap();
        let model = CovModel::from_normalized(&norm, 2, 2.0, 2.0).unwrap();
        let t = SpikedCov::new(model);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let theta = random_feasible_theta(8, 2, &mut rng);
            assert_gradient_consistent(&t, &theta, 1e-5);
        }
    }

    #[test]
    fn doubling_data_keeps_gradient_consistent() {
        let (data, _) = synthetic_spiked(6, 1, 10, (3.0, 10.0), (0.2, 0.8), 19);
        let doubled: Vec<DVec> = data.iter().map(|x| x * 2.0).collect();
        let norm_a = normalize(&data).unwrap();
        let norm_b = normalize(&doubled).unwrap();
        let model_a = CovModel::from_normalized(&norm_a, 1, 2.0, 2.0).unwrap();
        let mut model_b = CovModel::from_normalized(&norm_b, 1, 2.0, 2.0).unwrap();
        let t_b = SpikedCov::new(model_b.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let theta = random_feasible_theta(6, 1, &mut rng);
        // Gradients stay finite and FD-consistent after the scaling.
        assert!(t_b.gradient(&theta).iter().all(|g| g.is_finite()));
        assert_gradient_consistent(&t_b, &theta, 1e-5);
        // Normalization makes the scatter scale-invariant, so the potentials
        // agree up to floating error.
        model_b.col_sd = model_a.col_sd.clone();
        let t_a = SpikedCov::new(model_a);
        let t_b = SpikedCov::new(model_b);
        let ua = t_a.potential(&theta);
        let ub = t_b.potential(&theta);
        assert_abs_diff_eq!(ua, ub, epsilon = 1e-8 * ua.abs().max(1.0));
    }

    #[test]
    fn column_permutation_invariance() {
        let (data, _) = synthetic_spiked(7, 3, 14, (3.0, 10.0), (0.2, 0.8), 41);
        let norm = normalize(&data).unwrap();
        let model = CovModel::from_normalized(&norm, 3, 2.0, 2.0).unwrap();
        let t = SpikedCov::new(model);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let ambient = random_feasible_theta(7, 3, &mut rng);
        let theta = crate::covest::Theta::from_ambient(&ambient, 7, 3);
        // Swap columns 0 and 2 of X together with entries of d1.
        let mut x_perm = theta.x.clone();
        x_perm.swap_columns(0, 2);
        let mut d1_perm = theta.d1.clone();
        d1_perm.swap_rows(0, 2);
        let permuted = crate::covest::Theta {
            x: x_perm,
            d1: d1_perm,
            d2: theta.d2.clone(),
        };
        let u = t.potential(&theta.to_ambient());
        let u_perm = t.potential(&permuted.to_ambient());
        assert_abs_diff_eq!(u, u_perm, epsilon = 1e-10 * u.abs().max(1.0));
    }

    #[test]
    fn singular_sigma_gives_infinite_potential() {
        let model = scalar_model(1.0);
        let t = SpikedCov::new(model);
        // d1 = d2 = 0 makes Sigma = 0.
        let theta = DVec::from_column_slice(&[1.0, 0.0, 0.0]);
        assert!(t.potential(&theta).is_infinite());
        assert!(t.gradient(&theta).iter().all(|g| g.is_nan()));
    }
}
