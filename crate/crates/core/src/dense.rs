//! Thin wrapper over a dense partial-pivoting LU factorization.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

use crate::error::{Error, Result};

/// Pivot ratios above this are treated as singular.
pub const MAX_PIVOT_RATIO: f64 = 1e15;

pub struct DenseLu {
    lu: PartialPivLu<f64>,
    n: usize,
}

impl DenseLu {
    pub fn factor(n: usize, entry: impl Fn(usize, usize) -> f64, context: &str) -> Result<Self> {
        Self::from_mat(Mat::from_fn(n, n, entry), context)
    }

    pub fn from_mat(m: Mat<f64>, context: &str) -> Result<Self> {
        let n = m.nrows();
        let lu = m.partial_piv_lu();
        let diag = lu.U().diagonal();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..n {
            let v = diag[k].abs();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let ratio = if n == 0 { 1.0 } else { hi / lo };
        if !(ratio.is_finite() && ratio <= MAX_PIVOT_RATIO) {
            return Err(Error::SingularSystem {
                context: context.to_string(),
                ratio,
            });
        }
        Ok(Self { lu, n })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut rhs);
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_transpose_in_place(&mut rhs);
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}
