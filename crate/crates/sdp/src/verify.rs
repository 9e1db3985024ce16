//! Independent residual check of a returned solution.
//!
//! Everything here is recomputed from the problem data and the returned
//! `(y, X, λ)`; nothing from the solver's internal state is reused. The dual
//! matrices are first projected onto the PSD cone so that the reported
//! dual objective is the value of a genuinely PSD multiplier.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::problem::SdpProblem;
use crate::solver::SdpSolution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Most negative eigenvalue of any `S_k(y)` (0 if all are PSD).
    pub lmi_violation: f64,
    pub equality_residual: f64,
    /// Largest violation of `g·y ≥ h` (0 if satisfied).
    pub inequality_violation: f64,
    /// Largest negative eigenvalue removed from the dual matrices.
    pub dual_cone_violation: f64,
    /// `c - 𝒜*(X̂) - Aᵀλ` after projecting `X` onto the PSD cone.
    pub stationarity: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
}

impl ResidualReport {
    pub fn stationarity_l1(&self) -> f64 {
        self.stationarity.iter().map(|r| r.abs()).sum()
    }

    pub fn max_primal_residual(&self) -> f64 {
        self.lmi_violation
            .max(self.equality_residual)
            .max(self.inequality_violation)
    }

    /// Lower bound on the optimum valid whenever every feasible `y` obeys
    /// `|y_i| ≤ var_bound`.
    pub fn certified_lower_bound(&self, var_bound: f64) -> f64 {
        self.dual_objective - self.stationarity_l1() * var_bound
    }

    /// As [`Self::certified_lower_bound`] with a separate bound per variable.
    pub fn certified_lower_bound_with(&self, var_bounds: &[f64]) -> f64 {
        let slack: f64 = self
            .stationarity
            .iter()
            .zip(var_bounds)
            .map(|(r, b)| r.abs() * b)
            .sum();
        self.dual_objective - slack
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn psd_projection(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let worst = eig.eigenvalues.iter().copied().fold(0.0, f64::min);
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    (q * DMatrix::from_diagonal(&clipped) * q.transpose(), -worst)
}

pub fn verify(p: &SdpProblem, s: &SdpSolution) -> ResidualReport {
    let y = &s.y;
    let mut lmi_violation: f64 = 0.0;
    for b in &p.blocks {
        lmi_violation = lmi_violation.max(-min_eigenvalue(&b.evaluate(y)));
    }
    let equality_residual = p
        .equalities
        .iter()
        .map(|r| (r.evaluate(y) - r.rhs).abs())
        .fold(0.0, f64::max);
    let inequality_violation = p
        .inequalities
        .iter()
        .map(|r| (r.rhs - r.evaluate(y)).max(0.0))
        .fold(0.0, f64::max);

    let mut stationarity = p.objective.clone();
    let mut dual_objective = p.objective_offset;
    let mut dual_cone_violation: f64 = 0.0;
    for (b, x) in p.blocks.iter().zip(&s.dual_blocks) {
        let (xh, viol) = psd_projection(x);
        dual_cone_violation = dual_cone_violation.max(viol);
        dual_objective -= b.constant.inner(&xh);
        for (i, f) in &b.terms {
            stationarity[*i] -= f.inner(&xh);
        }
    }
    for (row, x) in p
        .inequalities
        .iter()
        .zip(&s.dual_blocks[p.blocks.len()..])
    {
        let mult = x[(0, 0)];
        dual_cone_violation = dual_cone_violation.max(-mult);
        let mult = mult.max(0.0);
        dual_objective += mult * row.rhs;
        for &(i, g) in &row.coeffs {
            stationarity[i] -= mult * g;
        }
    }
    for (row, lam) in p.equalities.iter().zip(&s.eq_multipliers) {
        dual_objective += lam * row.rhs;
        for &(i, a) in &row.coeffs {
            stationarity[i] -= lam * a;
        }
    }
    let primal_objective = p.objective_value(y);
    ResidualReport {
        lmi_violation,
        equality_residual,
        inequality_violation,
        dual_cone_violation,
        stationarity,
        primal_objective,
        dual_objective,
        gap: primal_objective - dual_objective,
    }
}
