use super::ConstraintManifold;
use std::ops::Range;

/// One block of a [`ProductManifold`]: either a constrained factor or an
/// unconstrained Euclidean block (optionally flagged nonnegative, which is
/// enforced by sampler-side rejection rather than a constraint).
pub enum Factor {
    Constrained(Box<dyn ConstraintManifold>),
    Euclidean { dim: usize, nonneg: bool },
}

impl Factor {
    pub fn manifold<M: ConstraintManifold + 'static>(m: M) -> Self {
        Factor::Constrained(Box::new(m))
    }

    pub fn euclidean(dim: usize, nonneg: bool) -> Self {
        Factor::Euclidean { dim, nonneg }
    }

    fn ambient_dim(&self) -> usize {
        match self {
            Factor::Constrained(m) => m.ambient_dim(),
            Factor::Euclidean { dim, .. } => *dim,
        }
    }

    fn constraint_dim(&self) -> usize {
        match self {
            Factor::Constrained(m) => m.constraint_dim(),
            Factor::Euclidean { .. } => 0,
        }
    }
}

/// Cartesian product of constrained factors and Euclidean blocks. Ambient
/// coordinates are the concatenation of the factor coordinates in order; the
/// constraint vector is the concatenation of the factor constraints.
pub struct ProductManifold {
    factors: Vec<Factor>,
    x_offsets: Vec<usize>,
    c_offsets: Vec<usize>,
    ambient: usize,
    constraints: usize,
}

impl ProductManifold {
    pub fn new(factors: Vec<Factor>) -> Self {
        let mut x_offsets = Vec::with_capacity(factors.len());
        let mut c_offsets = Vec::with_capacity(factors.len());
        let (mut xo, mut co) = (0, 0);
        for f in &factors {
            x_offsets.push(xo);
            c_offsets.push(co);
            xo += f.ambient_dim();
            co += f.constraint_dim();
        }
        Self {
            factors,
            x_offsets,
            c_offsets,
            ambient: xo,
            constraints: co,
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Ambient coordinate range occupied by factor `k`.
    pub fn factor_range(&self, k: usize) -> Range<usize> {
        self.x_offsets[k]..self.x_offsets[k] + self.factors[k].ambient_dim()
    }

    /// Coordinate ranges of Euclidean blocks flagged nonnegative, in ambient
    /// indices. These feed the samplers' rejection condition.
    pub fn nonneg_ranges(&self) -> Vec<Range<usize>> {
        self.factors
            .iter()
            .enumerate()
            .filter_map(|(k, f)| match f {
                Factor::Euclidean { nonneg: true, .. } => Some(self.factor_range(k)),
                _ => None,
            })
            .collect()
    }

    /// Factor owning global constraint `i`, with the local constraint index.
    fn locate(&self, i: usize) -> (usize, usize) {
        debug_assert!(i < self.constraints);
        // Few factors in practice; linear walk beats a binary search here.
        let mut k = self.factors.len() - 1;
        while self.c_offsets[k] > i {
            k -= 1;
        }
        (k, i - self.c_offsets[k])
    }

    fn block<'a>(&self, k: usize, x: &'a [f64]) -> &'a [f64] {
        &x[self.x_offsets[k]..self.x_offsets[k] + self.factors[k].ambient_dim()]
    }
}

impl ConstraintManifold for ProductManifold {
    fn ambient_dim(&self) -> usize {
        self.ambient
    }

    fn constraint_dim(&self) -> usize {
        self.constraints
    }

    fn constraint_value(&self, x: &[f64], i: usize) -> f64 {
        let (k, local) = self.locate(i);
        match &self.factors[k] {
            Factor::Constrained(m) => m.constraint_value(self.block(k, x), local),
            Factor::Euclidean { .. } => unreachable!("euclidean blocks have no constraints"),
        }
    }

    fn jacobian_row_write(&self, x: &[f64], i: usize, out: &mut [f64]) {
        out.fill(0.0);
        let (k, local) = self.locate(i);
        let range = self.factor_range(k);
        if let Factor::Constrained(m) = &self.factors[k] {
            m.jacobian_row_write(self.block(k, x), local, &mut out[range]);
        }
    }

    fn jacobian_row_dot(&self, x: &[f64], i: usize, y: &[f64]) -> f64 {
        let (k, local) = self.locate(i);
        match &self.factors[k] {
            Factor::Constrained(m) => {
                m.jacobian_row_dot(self.block(k, x), local, self.block(k, y))
            }
            Factor::Euclidean { .. } => 0.0,
        }
    }

    fn jacobian_rows_dot(&self, a: &[f64], b: &[f64], i: usize) -> f64 {
        let (k, local) = self.locate(i);
        match &self.factors[k] {
            Factor::Constrained(m) => {
                m.jacobian_rows_dot(self.block(k, a), self.block(k, b), local)
            }
            Factor::Euclidean { .. } => 0.0,
        }
    }

    fn subtract_scaled_jacobian_row(&self, x: &[f64], i: usize, coef: f64, out: &mut [f64]) {
        let (k, local) = self.locate(i);
        let range = self.factor_range(k);
        if let Factor::Constrained(m) = &self.factors[k] {
            m.subtract_scaled_jacobian_row(self.block(k, x), local, coef, &mut out[range]);
        }
    }
}
