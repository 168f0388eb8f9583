use super::ConstraintManifold;
use crate::{DMat, DVec};

/// Stiefel manifold `V_{d,p}` of `d x p` matrices with orthonormal columns,
/// embedded in `R^{d*p}` by column-major flattening.
///
/// The symmetric relation `X^T X = I` is de-duplicated into the
/// `m = p(p+1)/2` upper-triangular entries (including the diagonal), so the
/// constraint Jacobian keeps full row rank. Constraint `i` corresponds to the
/// column pair `(a, b)` with `a <= b` enumerated in column-major order of the
/// upper triangle: `(0,0), (0,1), (1,1), (0,2), ...`, i.e. `i = b(b+1)/2 + a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stiefel {
    rows: usize,
    cols: usize,
}

impl Stiefel {
    /// `V_{d,p}`: `d x p` matrices, `p <= d`.
    pub fn new(d: usize, p: usize) -> Self {
        assert!(p >= 1 && p <= d, "Stiefel needs 1 <= p <= d");
        Self { rows: d, cols: p }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column pair `(a, b)`, `a <= b`, addressed by constraint index `i`.
    pub fn column_pair(&self, i: usize) -> (usize, usize) {
        debug_assert!(i < self.constraint_dim());
        // Smallest b with b(b+1)/2 > i, then a = i - b(b-1)/2 ... walk is
        // fine: p is small in every use.
        let mut b = 0;
        let mut base = 0;
        while base + b + 1 <= i {
            base += b + 1;
            b += 1;
        }
        (i - base, b)
    }

    /// View a flat ambient vector as the `d x p` matrix it encodes.
    pub fn unflatten(&self, x: &[f64]) -> DMat {
        debug_assert_eq!(x.len(), self.rows * self.cols);
        DMat::from_column_slice(self.rows, self.cols, x)
    }

    /// Flatten a `d x p` matrix into ambient coordinates (column-major).
    pub fn flatten(&self, x: &DMat) -> DVec {
        debug_assert_eq!(x.shape(), (self.rows, self.cols));
        DVec::from_column_slice(x.as_slice())
    }

    #[inline]
    fn col<'a>(&self, x: &'a [f64], j: usize) -> &'a [f64] {
        &x[j * self.rows..(j + 1) * self.rows]
    }
}

impl ConstraintManifold for Stiefel {
    fn ambient_dim(&self) -> usize {
        self.rows * self.cols
    }

    fn constraint_dim(&self) -> usize {
        self.cols * (self.cols + 1) / 2
    }

    fn constraint_value(&self, x: &[f64], i: usize) -> f64 {
        let (a, b) = self.column_pair(i);
        let dot: f64 = self
            .col(x, a)
            .iter()
            .zip(self.col(x, b))
            .map(|(u, v)| u * v)
            .sum();
        if a == b {
            dot - 1.0
        } else {
            dot
        }
    }

    fn jacobian_row_write(&self, x: &[f64], i: usize, out: &mut [f64]) {
        out.fill(0.0);
        let (a, b) = self.column_pair(i);
        let d = self.rows;
        if a == b {
            let ca = self.col(x, a);
            for r in 0..d {
                out[a * d + r] = 2.0 * ca[r];
            }
        } else {
            let ca = self.col(x, a);
            let cb = self.col(x, b);
            for r in 0..d {
                out[a * d + r] = cb[r];
                out[b * d + r] = ca[r];
            }
        }
    }

    fn jacobian_row_dot(&self, x: &[f64], i: usize, y: &[f64]) -> f64 {
        let (a, b) = self.column_pair(i);
        if a == b {
            2.0 * dot(self.col(x, a), self.col(y, a))
        } else {
            dot(self.col(x, b), self.col(y, a)) + dot(self.col(x, a), self.col(y, b))
        }
    }

    fn jacobian_rows_dot(&self, u: &[f64], w: &[f64], i: usize) -> f64 {
        let (a, b) = self.column_pair(i);
        if a == b {
            4.0 * dot(self.col(u, a), self.col(w, a))
        } else {
            dot(self.col(u, b), self.col(w, b)) + dot(self.col(u, a), self.col(w, a))
        }
    }

    fn subtract_scaled_jacobian_row(&self, x: &[f64], i: usize, coef: f64, out: &mut [f64]) {
        let (a, b) = self.column_pair(i);
        let d = self.rows;
        if a == b {
            let ca = self.col(x, a);
            for r in 0..d {
                out[a * d + r] -= coef * 2.0 * ca[r];
            }
        } else {
            // Copy borrows: columns of x are disjoint from out.
            let ca = self.col(x, a);
            let cb = self.col(x, b);
            for r in 0..d {
                out[a * d + r] -= coef * cb[r];
            }
            for r in 0..d {
                out[b * d + r] -= coef * ca[r];
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}
