use super::ConstraintManifold;

/// Unit sphere `S^{n-1} = {x in R^n : x.x = 1}` with the single constraint
/// `g(x) = x.x - 1` and gradient `2x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sphere {
    ambient: usize,
}

impl Sphere {
    /// Sphere embedded in `R^n` (i.e. `S^{n-1}`). Panics if `n < 2`.
    pub fn ambient(n: usize) -> Self {
        assert!(n >= 2, "sphere needs ambient dimension >= 2");
        Self { ambient: n }
    }

    /// Intrinsic dimension `n - 1`.
    pub fn dim(&self) -> usize {
        self.ambient - 1
    }
}

impl ConstraintManifold for Sphere {
    fn ambient_dim(&self) -> usize {
        self.ambient
    }

    fn constraint_dim(&self) -> usize {
        1
    }

    fn constraint_value(&self, x: &[f64], _i: usize) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() - 1.0
    }

    fn jacobian_row_write(&self, x: &[f64], _i: usize, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = 2.0 * v;
        }
    }

    fn jacobian_row_dot(&self, x: &[f64], _i: usize, y: &[f64]) -> f64 {
        2.0 * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }

    fn jacobian_rows_dot(&self, a: &[f64], b: &[f64], _i: usize) -> f64 {
        4.0 * a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>()
    }

    fn subtract_scaled_jacobian_row(&self, x: &[f64], _i: usize, coef: f64, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o -= coef * 2.0 * v;
        }
    }
}
