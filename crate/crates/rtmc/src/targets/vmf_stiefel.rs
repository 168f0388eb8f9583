use super::TargetDensity;
use crate::{DMat, DVec, Error, Result};

/// Matrix von Mises-Fisher density on a Stiefel manifold,
/// `pi(X) proportional to exp(tr(F^T X))`, over the column-major flattening
/// of `X`. The potential is linear, `U(X) = -tr(F^T X)`, so the gradient is
/// the constant `-F`.
#[derive(Debug, Clone)]
pub struct VmfStiefel {
    f_flat: DVec,
    rows: usize,
    cols: usize,
}

impl VmfStiefel {
    pub fn new(f: DMat) -> Self {
        let (rows, cols) = f.shape();
        Self {
            f_flat: DVec::from_column_slice(f.as_slice()),
            rows,
            cols,
        }
    }

    /// `d x d` skew-symmetric parameter matrix from its upper-triangular
    /// entries listed row-wise: `(0,1), (0,2), ..., (1,2), ...`.
    pub fn skew(d: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != d * (d - 1) / 2 {
            return Err(Error::DimensionMismatch {
                context: "skew parameters",
                expected: d * (d - 1) / 2,
                got: upper.len(),
            });
        }
        let mut f = DMat::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in (i + 1)..d {
                f[(i, j)] = upper[k];
                f[(j, i)] = -upper[k];
                k += 1;
            }
        }
        Ok(Self::new(f))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

impl TargetDensity for VmfStiefel {
    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn potential(&self, x: &DVec) -> f64 {
        -self.f_flat.dot(x)
    }

    fn gradient_into(&self, _x: &DVec, out: &mut DVec) {
        out.copy_from(&self.f_flat);
        out.neg_mut();
    }

    fn name(&self) -> &str {
        "vmf-stiefel"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::test_util::assert_gradient_consistent;

    #[test]
    fn zero_parameter_gives_uniform() {
        let t = VmfStiefel::new(DMat::zeros(3, 2));
        let x = DVec::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(t.potential(&x), 0.0);
    }

    #[test]
    fn potential_at_f_equals_minus_p() {
        // U(X) = -tr(X^T X) = -p for orthonormal X when F = X.
        let x = DMat::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let t = VmfStiefel::new(x.clone());
        let flat = DVec::from_column_slice(x.as_slice());
        assert_eq!(t.potential(&flat), -2.0);
    }

    #[test]
    fn skew_construction_and_gradient() {
        let t = VmfStiefel::skew(3, &[2.0, -45.0, -4.0]).unwrap();
        let f = DMat::from_row_slice(
            3,
            3,
            &[0.0, 2.0, -45.0, -2.0, 0.0, -4.0, 45.0, 4.0, 0.0],
        );
        let x = DVec::from_column_slice(DMat::identity(3, 3).as_slice());
        let g = t.gradient(&x);
        let expect = DVec::from_column_slice(f.as_slice());
        assert_eq!(g, -expect);
        assert_gradient_consistent(&t, &x, 1e-6);
    }

    #[test]
    fn skew_rejects_wrong_count() {
        assert!(VmfStiefel::skew(3, &[1.0, 2.0]).is_err());
    }
}
