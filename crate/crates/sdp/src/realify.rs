//! Real embedding of Hermitian matrix inequalities.
//!
//! A Hermitian `H = R + iI` is PSD iff `[[R, -I], [I, R]]` is PSD; the
//! embedded matrix carries every eigenvalue of `H` twice.

use nalgebra::Complex;

use crate::error::SdpError;
use crate::problem::{LmiBlock, SymSparse};

/// Sparse Hermitian matrix as upper-triangular triplets: `(r, c, v)` with
/// `r ≤ c` means `H[r][c] = v` and `H[c][r] = conj(v)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HermSparse {
    pub entries: Vec<(usize, usize, Complex<f64>)>,
}

impl HermSparse {
    pub fn push(&mut self, r: usize, c: usize, v: Complex<f64>) {
        if r <= c {
            self.entries.push((r, c, v));
        } else {
            self.entries.push((c, r, v.conj()));
        }
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|e| e.2.im == 0.0)
    }
}

/// Hermitian analogue of [`LmiBlock`]: `F_0 + Σ_i y_i F_i ⪰ 0` with real `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexLmiBlock {
    pub dim: usize,
    pub constant: HermSparse,
    pub terms: Vec<(usize, HermSparse)>,
}

impl ComplexLmiBlock {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            constant: HermSparse::default(),
            terms: Vec::new(),
        }
    }

    pub fn is_real(&self) -> bool {
        self.constant.is_real() && self.terms.iter().all(|t| t.1.is_real())
    }
}

fn embed(h: &HermSparse, n: usize, what: &str) -> Result<SymSparse, SdpError> {
    let mut out = SymSparse::new();
    for &(r, c, v) in &h.entries {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(SdpError::NonFinite(what.into()));
        }
        if r >= n || c >= n {
            return Err(SdpError::Dimension(format!("{what}: index ({r},{c}) ≥ {n}")));
        }
        if r == c && v.im != 0.0 {
            return Err(SdpError::NotHermitian(format!(
                "{what}: diagonal entry ({r},{r}) has imaginary part {}",
                v.im
            )));
        }
        if v.re != 0.0 {
            out.push(r, c, v.re);
            out.push(r + n, c + n, v.re);
        }
        if v.im != 0.0 {
            out.push(c, r + n, v.im);
            out.push(r, c + n, -v.im);
        }
    }
    out.compact();
    Ok(out)
}

/// Maps a Hermitian block to the real symmetric block of twice the size.
pub fn realify(block: &ComplexLmiBlock) -> Result<LmiBlock, SdpError> {
    let n = block.dim;
    let mut out = LmiBlock::new(2 * n);
    out.constant = embed(&block.constant, n, "constant")?;
    for (i, f) in &block.terms {
        out.terms.push((*i, embed(f, n, &format!("F_{i}"))?));
    }
    out.compact();
    Ok(out)
}

/// Drops the imaginary parts of a block already known to be real.
pub fn real_part(block: &ComplexLmiBlock) -> Result<LmiBlock, SdpError> {
    if !block.is_real() {
        return Err(SdpError::NotHermitian("block has imaginary entries".into()));
    }
    let conv = |h: &HermSparse| {
        let mut s = SymSparse::new();
        for &(r, c, v) in &h.entries {
            s.push(r, c, v.re);
        }
        s
    };
    let mut out = LmiBlock::new(block.dim);
    out.constant = conv(&block.constant);
    for (i, f) in &block.terms {
        out.terms.push((*i, conv(f)));
    }
    out.compact();
    Ok(out)
}
