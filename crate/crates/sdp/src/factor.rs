//! Dense Cholesky for the large per-iteration systems, backed by faer's
//! blocked kernels. Small per-block factorizations stay on nalgebra.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

pub(crate) struct DenseLlt(Llt<f64>);

impl DenseLlt {
    /// `None` unless `m` is numerically positive definite.
    pub(crate) fn new(m: &DMatrix<f64>) -> Option<Self> {
        let a = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
        Llt::new(a.as_ref(), Side::Lower).ok().map(Self)
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.0.solve(&rhs);
        DVector::from_fn(b.len(), |i, _| x[(i, 0)])
    }

    pub(crate) fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let rhs = Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)]);
        let x = self.0.solve(&rhs);
        DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| x[(i, j)])
    }
}
