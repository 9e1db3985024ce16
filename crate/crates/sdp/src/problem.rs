//! Problem description: linear objective over real variables subject to
//! affine linear matrix inequalities, linear equalities and linear
//! inequalities.
//!
//! ```text
//! minimize    cᵀ y
//! subject to  F_k0 + Σ_i y_i F_ki ⪰ 0     for every block k
//!             A y = b
//!             G y ≥ h
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::SdpError;

/// Sparse symmetric matrix stored as upper-triangular triplets.
///
/// An entry `(r, c, v)` with `r < c` stands for both `M[r][c]` and `M[c][r]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymSparse {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `v` at `(r, c)` (and its mirror). Duplicates are merged by
    /// [`SymSparse::compact`].
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        self.entries.push((r, c, v));
    }

    /// Sorts entries, sums duplicates and drops exact zeros.
    pub fn compact(&mut self) {
        self.entries
            .sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.iter().map(|e| e.1).max()
    }

    pub fn to_dense(&self, dim: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dim, dim);
        self.add_to(&mut m, 1.0);
        m
    }

    /// `m += scale * self`.
    pub fn add_to(&self, m: &mut DMatrix<f64>, scale: f64) {
        for &(r, c, v) in &self.entries {
            m[(r, c)] += scale * v;
            if r != c {
                m[(c, r)] += scale * v;
            }
        }
    }

    /// Frobenius inner product `⟨self, m⟩` for symmetric `m`.
    pub fn inner(&self, m: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| {
                if r == c {
                    v * m[(r, c)]
                } else {
                    v * (m[(r, c)] + m[(c, r)])
                }
            })
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }
}

/// One affine matrix map `S(y) = F_0 + Σ_i y_i F_i` constrained to be PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmiBlock {
    pub dim: usize,
    pub constant: SymSparse,
    /// `(variable index, coefficient matrix)`, at most one entry per variable.
    pub terms: Vec<(usize, SymSparse)>,
}

impl LmiBlock {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            constant: SymSparse::new(),
            terms: Vec::new(),
        }
    }

    /// Evaluates `S(y)` densely.
    pub fn evaluate(&self, y: &[f64]) -> DMatrix<f64> {
        let mut s = self.constant.to_dense(self.dim);
        for (i, f) in &self.terms {
            f.add_to(&mut s, y[*i]);
        }
        s
    }

    /// Merges duplicate variable terms and compacts every coefficient matrix.
    pub fn compact(&mut self) {
        self.constant.compact();
        self.terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, SymSparse)> = Vec::with_capacity(self.terms.len());
        for (i, f) in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1.entries.extend(f.entries),
                _ => merged.push((i, f)),
            }
        }
        for t in &mut merged {
            t.1.compact();
        }
        merged.retain(|t| !t.1.is_empty());
        self.terms = merged;
    }
}

/// Sparse linear row `Σ coeffs · y` compared against `rhs`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * y[i]).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub num_vars: usize,
    /// Minimized.
    pub objective: Vec<f64>,
    /// Constant added to the objective value; does not affect the argmin.
    #[serde(default)]
    pub objective_offset: f64,
    pub blocks: Vec<LmiBlock>,
    /// `a·y = rhs`.
    #[serde(default)]
    pub equalities: Vec<LinearConstraint>,
    /// `g·y ≥ rhs`.
    #[serde(default)]
    pub inequalities: Vec<LinearConstraint>,
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            ..Self::default()
        }
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(y).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.objective.len() != self.num_vars {
            return Err(SdpError::Dimension(format!(
                "objective has {} entries, expected {}",
                self.objective.len(),
                self.num_vars
            )));
        }
        if self.blocks.is_empty() && self.equalities.is_empty() && self.inequalities.is_empty() {
            return Err(SdpError::Dimension("problem has no constraints".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.objective_offset.is_finite() {
            return Err(SdpError::NonFinite("objective".into()));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if b.dim == 0 {
                return Err(SdpError::Dimension(format!("block {k} has dimension 0")));
            }
            let check = |f: &SymSparse, what: &str| -> Result<(), SdpError> {
                if let Some(m) = f.max_index() {
                    if m >= b.dim {
                        return Err(SdpError::Dimension(format!(
                            "block {k}: {what} index {m} out of range for dim {}",
                            b.dim
                        )));
                    }
                }
                if f.entries.iter().any(|e| !e.2.is_finite()) {
                    return Err(SdpError::NonFinite(format!("block {k}: {what}")));
                }
                Ok(())
            };
            check(&b.constant, "constant")?;
            for (i, f) in &b.terms {
                if *i >= self.num_vars {
                    return Err(SdpError::Dimension(format!(
                        "block {k}: variable {i} out of range ({} vars)",
                        self.num_vars
                    )));
                }
                check(f, &format!("F_{i}"))?;
            }
        }
        for (what, rows) in [("equality", &self.equalities), ("inequality", &self.inequalities)] {
            for (j, row) in rows.iter().enumerate() {
                if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.1.is_finite()) {
                    return Err(SdpError::NonFinite(format!("{what} {j}")));
                }
                if let Some(&(i, _)) = row.coeffs.iter().find(|c| c.0 >= self.num_vars) {
                    return Err(SdpError::Dimension(format!(
                        "{what} {j}: variable {i} out of range"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Lowers linear inequalities to 1×1 blocks and returns the combined list.
    pub(crate) fn cone_blocks(&self) -> Vec<LmiBlock> {
        let mut blocks = self.blocks.clone();
        for b in &mut blocks {
            b.compact();
        }
        for row in &self.inequalities {
            let mut blk = LmiBlock::new(1);
            blk.constant.push(0, 0, -row.rhs);
            for &(i, a) in &row.coeffs {
                let mut f = SymSparse::new();
                f.push(0, 0, a);
                blk.terms.push((i, f));
            }
            blk.compact();
            blocks.push(blk);
        }
        blocks
    }
}
