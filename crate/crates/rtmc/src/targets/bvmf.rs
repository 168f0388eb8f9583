use super::TargetDensity;
use crate::{DMat, DVec, Error, Result};

/// Exponential-family density on the sphere,
/// `pi(x) proportional to exp(c.x + x.A.x)` with symmetric `A`, so
/// `U(x) = -(c.x + x.A.x)` and `grad U = -(c + 2 A x)`.
#[derive(Debug, Clone)]
pub struct Bvmf {
    a: DMat,
    c: DVec,
    name: String,
}

impl Bvmf {
    /// Errors unless `A` is square, symmetric within `1e-12`, and matches
    /// the length of `c`.
    pub fn new(a: DMat, c: DVec) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != c.len() {
            return Err(Error::DimensionMismatch {
                context: "bvmf parameters",
                expected: c.len(),
                got: a.nrows(),
            });
        }
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self {
            a,
            c,
            name: "bvmf".to_string(),
        })
    }

    /// Convenience constructor for diagonal `A`.
    pub fn diagonal(a_diag: &[f64], c: &[f64]) -> Result<Self> {
        Self::new(
            DMat::from_diagonal(&DVec::from_column_slice(a_diag)),
            DVec::from_column_slice(c),
        )
    }

    pub fn a(&self) -> &DMat {
        &self.a
    }

    pub fn c(&self) -> &DVec {
        &self.c
    }
}

impl TargetDensity for Bvmf {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn potential(&self, x: &DVec) -> f64 {
        -(self.c.dot(x) + x.dot(&(&self.a * x)))
    }

    fn gradient_into(&self, x: &DVec, out: &mut DVec) {
        out.copy_from(&self.c);
        out.gemv(-2.0, &self.a, x, -1.0);
    }

    fn name(&self) -> &str {
        &self.name
    }
}
