//! Algebraically constrained manifolds `M = {x in R^n : c(x) = 0}`.
//!
//! A manifold is described by its constraint map `c: R^n -> R^m` and the
//! constraint Jacobian `C(x) = dc/dx`, assumed to have full row rank at every
//! point of `M`. The tangent space at `x` is `ker C(x)`; the orthogonal
//! projector onto it is
//!
//! ```text
//! P(x) = I - C(x)^T (C(x) C(x)^T)^{-1} C(x).
//! ```
//!
//! Gaussian velocities on the tangent space are obtained by projecting an
//! ambient standard normal draw through `P(x)`.
//!
//! Implementations work on raw `&[f64]` slices so that product manifolds can
//! dispatch into coordinate blocks without copying. The row-wise accessors
//! ([`ConstraintManifold::constraint_value`], `jacobian_row_dot`, ...) are the
//! hot path of the constraint solver and should stay allocation-free.

mod product;
mod sphere;
mod stiefel;

pub use product::{Factor, ProductManifold};
pub use sphere::Sphere;
pub use stiefel::Stiefel;

use crate::{DMat, DVec, Error, Result};
use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::StandardNormal;

/// Default infinity-norm tolerance for "x lies on the manifold".
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Gram matrices with a condition number above this are treated as singular.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// A manifold cut out by `m` independent scalar constraints in `R^n`.
pub trait ConstraintManifold: Send + Sync {
    /// Ambient (embedding) dimension `n`.
    fn ambient_dim(&self) -> usize;

    /// Number of scalar constraints `m` (`m < n`).
    fn constraint_dim(&self) -> usize;

    /// Value of the `i`-th constraint `g_i(x)`.
    fn constraint_value(&self, x: &[f64], i: usize) -> f64;

    /// Dense `i`-th Jacobian row `grad g_i(x)` written into `out`
    /// (`out` is overwritten, including zeros).
    fn jacobian_row_write(&self, x: &[f64], i: usize, out: &mut [f64]);

    /// Inner product `grad g_i(x) . y` without materializing the row.
    fn jacobian_row_dot(&self, x: &[f64], i: usize, y: &[f64]) -> f64;

    /// Inner product of the `i`-th Jacobian rows at two points,
    /// `grad g_i(a) . grad g_i(b)`. The default materializes both rows;
    /// implementations on the constraint-solve hot path should override.
    fn jacobian_rows_dot(&self, a: &[f64], b: &[f64], i: usize) -> f64 {
        let n = self.ambient_dim();
        let mut row_a = vec![0.0; n];
        let mut row_b = vec![0.0; n];
        self.jacobian_row_write(a, i, &mut row_a);
        self.jacobian_row_write(b, i, &mut row_b);
        row_a.iter().zip(&row_b).map(|(u, v)| u * v).sum()
    }

    /// In-place update `out -= coef * grad g_i(x)`.
    fn subtract_scaled_jacobian_row(&self, x: &[f64], i: usize, coef: f64, out: &mut [f64]);

    /// Constraint residual vector `c(x) = (g_1(x), ..., g_m(x))`.
    fn constraints(&self, x: &DVec) -> Result<DVec> {
        check_dim("constraints", self.ambient_dim(), x.len())?;
        let xs = x.as_slice();
        Ok(DVec::from_fn(self.constraint_dim(), |i, _| {
            self.constraint_value(xs, i)
        }))
    }

    /// Constraint Jacobian `C(x)`, one row per constraint.
    fn jacobian(&self, x: &DVec) -> Result<DMat> {
        check_dim("jacobian", self.ambient_dim(), x.len())?;
        let (m, n) = (self.constraint_dim(), self.ambient_dim());
        let mut jac = DMat::zeros(m, n);
        let mut row = vec![0.0; n];
        for i in 0..m {
            self.jacobian_row_write(x.as_slice(), i, &mut row);
            for (j, &v) in row.iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        Ok(jac)
    }

    /// Infinity norm of the constraint residual at `x`.
    fn constraint_residual_inf(&self, x: &DVec) -> f64 {
        let xs = x.as_slice();
        (0..self.constraint_dim())
            .map(|i| self.constraint_value(xs, i).abs())
            .fold(0.0, f64::max)
    }

    /// Whether `x` satisfies all constraints within `tol` (infinity norm).
    fn is_feasible(&self, x: &DVec, tol: f64) -> bool {
        x.len() == self.ambient_dim() && self.constraint_residual_inf(x) <= tol
    }
}

fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}

/// A point of the tangent bundle: position `x` on `M` and velocity `v` with
/// `C(x) v = 0`. Both live in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: DVec,
    pub v: DVec,
}

impl PhasePoint {
    pub fn new(x: DVec, v: DVec) -> Self {
        Self { x, v }
    }

    /// Largest violation of the phase-point invariants: constraint residual
    /// and velocity tangency, both in infinity norm.
    pub fn invariant_violation(&self, manifold: &dyn ConstraintManifold) -> (f64, f64) {
        let c_res = manifold.constraint_residual_inf(&self.x);
        let xs = self.x.as_slice();
        let vs = self.v.as_slice();
        let t_res = (0..manifold.constraint_dim())
            .map(|i| manifold.jacobian_row_dot(xs, i, vs).abs())
            .fold(0.0, f64::max);
        (c_res, t_res)
    }
}

/// Explicit tangent projector `P(x) = I - C^T (C C^T)^{-1} C` as a dense
/// matrix. Errors if the Gram matrix `C C^T` has condition number above
/// [`GRAM_CONDITION_LIMIT`].
pub fn tangent_projector(manifold: &dyn ConstraintManifold, x: &DVec) -> Result<DMat> {
    let jac = manifold.jacobian(x)?;
    let gram = &jac * jac.transpose();
    // m is small everywhere we work, so a full symmetric eigendecomposition
    // for the condition check costs nothing compared to what follows.
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > 0.0) || max / min > GRAM_CONDITION_LIMIT {
        return Err(Error::SingularConstraint {
            cond: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }
    let chol = Cholesky::new(gram).ok_or(Error::SingularConstraint { cond: f64::INFINITY })?;
    // P = I - C^T G^{-1} C
    let ginv_c = chol.solve(&jac);
    let n = manifold.ambient_dim();
    let mut proj = DMat::identity(n, n);
    proj.gemm_tr(-1.0, &jac, &ginv_c, 1.0);
    Ok(proj)
}

/// Projects an ambient vector onto the tangent space at `x` by solving the
/// Gram system, without forming the dense projector.
pub fn project_tangent(manifold: &dyn ConstraintManifold, x: &DVec, w: &DVec) -> Result<DVec> {
    let jac = manifold.jacobian(x)?;
    let mut out = w.clone();
    project_tangent_with_jacobian(&jac, 0.0, &mut out)?;
    Ok(out)
}

/// In-place tangent projection given a precomputed Jacobian. `gram_reg` is
/// added to the Gram diagonal before factorization.
pub(crate) fn project_tangent_with_jacobian(
    jac: &DMat,
    gram_reg: f64,
    w: &mut DVec,
) -> Result<()> {
    let mut gram = jac * jac.transpose();
    if gram_reg != 0.0 {
        for i in 0..gram.nrows() {
            gram[(i, i)] += gram_reg;
        }
    }
    let chol = Cholesky::new(gram).ok_or(Error::SingularConstraint { cond: f64::INFINITY })?;
    let mut cw = jac * &*w;
    chol.solve_mut(&mut cw);
    w.gemv_tr(-1.0, jac, &cw, 1.0);
    Ok(())
}

/// Draws the Gaussian law on the tangent space at `x`: an ambient standard
/// normal vector pushed through the tangent projector.
pub fn sample_tangent_gaussian<R: Rng + ?Sized>(
    manifold: &dyn ConstraintManifold,
    x: &DVec,
    rng: &mut R,
) -> Result<DVec> {
    check_dim("sample_tangent_gaussian", manifold.ambient_dim(), x.len())?;
    let raw = DVec::from_fn(manifold.ambient_dim(), |_, _| rng.sample(StandardNormal));
    project_tangent(manifold, x, &raw)
}

/// Random feasible points for tests across the crate.
#[cfg(test)]
pub(crate) mod testing {
    use crate::{DMat, DVec};
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Random point on `S^{n-1}` (normalized Gaussian).
    pub fn random_sphere_point<R: Rng>(n: usize, rng: &mut R) -> DVec {
        let mut x = DVec::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        x /= x.norm();
        x
    }

    /// Random feasible Stiefel point via QR of a Gaussian matrix, flattened.
    pub fn random_stiefel_point<R: Rng>(d: usize, p: usize, rng: &mut R) -> DVec {
        let a = DMat::from_fn(d, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = a.qr().q();
        DVec::from_column_slice(q.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::testing::{random_sphere_point, random_stiefel_point};
    use super::*;
    use crate::DMat;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inf_norm(m: &DMat) -> f64 {
        m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn sphere_constraints_match_spec_points() {
        let s2 = Sphere::ambient(3);
        let c = s2.constraints(&DVec::from_column_slice(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(c.len(), 1);
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-15);
        let c = s2.constraints(&DVec::from_column_slice(&[2.0, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(c[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn stiefel_constraints_vanish_at_orthonormal_columns() {
        let v32 = Stiefel::new(3, 2);
        // First two columns of the identity.
        let x = DVec::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let c = v32.constraints(&x).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.amax() < 1e-15);
    }

    #[test]
    fn sphere_jacobian_is_two_x() {
        let s2 = Sphere::ambient(3);
        let x = DVec::from_column_slice(&[1.0, 0.0, 0.0]);
        let jac = s2.jacobian(&x).unwrap();
        assert_eq!(jac.shape(), (1, 3));
        assert_abs_diff_eq!(jac[(0, 0)], 2.0, epsilon = 1e-15);
        let x = DVec::from_column_slice(&[0.6, 0.8, 0.0]);
        let jac = s2.jacobian(&x).unwrap();
        assert_abs_diff_eq!(jac[(0, 0)], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(jac[(0, 1)], 1.6, epsilon = 1e-15);
        assert_abs_diff_eq!(jac[(0, 2)], 0.0, epsilon = 1e-15);
    }

    /// Central finite differences of `constraints` as the independent check
    /// of every Jacobian implementation.
    fn assert_jacobian_matches_fd(m: &dyn ConstraintManifold, x: &DVec, tol: f64) {
        let h = 1e-5;
        let jac = m.jacobian(x).unwrap();
        for j in 0..m.ambient_dim() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let cp = m.constraints(&xp).unwrap();
            let cm = m.constraints(&xm).unwrap();
            for i in 0..m.constraint_dim() {
                let fd = (cp[i] - cm[i]) / (2.0 * h);
                assert!(
                    (jac[(i, j)] - fd).abs() <= tol,
                    "jacobian entry ({i},{j}) = {} vs fd {}",
                    jac[(i, j)],
                    fd
                );
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sphere = Sphere::ambient(4);
        let stiefel = Stiefel::new(3, 2);
        for _ in 0..100 {
            let x = random_sphere_point(4, &mut rng);
            assert_jacobian_matches_fd(&sphere, &x, 1e-6);
            let x = random_stiefel_point(3, 2, &mut rng);
            assert_jacobian_matches_fd(&stiefel, &x, 1e-6);
        }
    }

    #[test]
    fn product_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prod = ProductManifold::new(vec![
            Factor::manifold(Stiefel::new(4, 2)),
            Factor::euclidean(3, true),
            Factor::manifold(Sphere::ambient(3)),
        ]);
        assert_eq!(prod.ambient_dim(), 8 + 3 + 3);
        assert_eq!(prod.constraint_dim(), 3 + 0 + 1);
        for _ in 0..50 {
            let st = random_stiefel_point(4, 2, &mut rng);
            let eu = DVec::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sp = random_sphere_point(3, &mut rng);
            let x = DVec::from_iterator(14, st.iter().chain(eu.iter()).chain(sp.iter()).cloned());
            assert!(prod.is_feasible(&x, 1e-12));
            assert_jacobian_matches_fd(&prod, &x, 1e-6);
        }
    }

    #[test]
    fn projector_identities_on_sphere_and_stiefel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sphere = Sphere::ambient(3);
        let x = DVec::from_column_slice(&[1.0, 0.0, 0.0]);
        let p = tangent_projector(&sphere, &x).unwrap();
        let expect = DMat::from_diagonal(&DVec::from_column_slice(&[0.0, 1.0, 1.0]));
        assert!(inf_norm(&(&p - &expect)) < 1e-14);

        let stiefel = Stiefel::new(4, 2);
        for _ in 0..20 {
            let x = random_stiefel_point(4, 2, &mut rng);
            let p = tangent_projector(&stiefel, &x).unwrap();
            let idem = &p * &p - &p;
            assert!(inf_norm(&idem) <= 1e-10, "P^2 - P = {}", inf_norm(&idem));
            let sym = p.transpose() * &p - &p;
            assert!(inf_norm(&sym) <= 1e-10);
            let cp = stiefel.jacobian(&x).unwrap() * &p;
            assert!(inf_norm(&cp) <= 1e-10, "C P = {}", inf_norm(&cp));
        }
    }

    #[test]
    fn projector_errors_on_rank_deficient_jacobian() {
        // At x = 0 the sphere constraint gradient vanishes.
        let sphere = Sphere::ambient(3);
        let x = DVec::zeros(3);
        assert!(matches!(
            tangent_projector(&sphere, &x),
            Err(Error::SingularConstraint { .. })
        ));
    }

    #[test]
    fn tangent_sample_removes_radial_component() {
        // Deterministic check of the projector action on a fixed raw draw.
        let sphere = Sphere::ambient(3);
        let x = DVec::from_column_slice(&[1.0, 0.0, 0.0]);
        let raw = DVec::from_column_slice(&[1.0, 2.0, 3.0]);
        let v = project_tangent(&sphere, &x, &raw).unwrap();
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[2], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn tangent_samples_lie_in_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let stiefel = Stiefel::new(4, 2);
        let x = random_stiefel_point(4, 2, &mut rng);
        let jac = stiefel.jacobian(&x).unwrap();
        for _ in 0..1000 {
            let v = sample_tangent_gaussian(&stiefel, &x, &mut rng).unwrap();
            let res = &jac * &v;
            assert!(res.amax() <= 1e-10);
        }
    }

    #[test]
    fn tangent_gaussian_covariance_matches_projector() {
        // At the north pole of S^2 the tangent covariance is diag(1, 1, 0).
        let sphere = Sphere::ambient(3);
        let x = DVec::from_column_slice(&[0.0, 0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut cov = DMat::zeros(3, 3);
        for _ in 0..n {
            let v = sample_tangent_gaussian(&sphere, &x, &mut rng).unwrap();
            cov.ger(1.0 / n as f64, &v, &v, 1.0);
        }
        let expect = DMat::from_diagonal(&DVec::from_column_slice(&[1.0, 1.0, 0.0]));
        assert!(
            inf_norm(&(&cov - &expect)) < 0.02,
            "covariance {:?}",
            cov.as_slice()
        );
    }

    #[test]
    fn stiefel_jacobian_full_rank_at_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let stiefel = Stiefel::new(6, 2);
        for _ in 0..20 {
            let x = random_stiefel_point(6, 2, &mut rng);
            let jac = stiefel.jacobian(&x).unwrap();
            let svd = jac.svd(false, false);
            let smin = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
            assert!(smin > 1e-10, "smallest singular value {smin}");
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sphere = Sphere::ambient(3);
        let x = DVec::zeros(4);
        assert!(matches!(
            sphere.constraints(&x),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
