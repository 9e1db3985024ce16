//! Noncommutative words over measurement projectors and adversary operators,
//! their normal form, and assembly of symbolic moment matrices.
//!
//! Alice's letters commute with Bob's, and both commute with the adversary
//! letters `Z`. Within a party nothing commutes. Projectors obey
//! `P² = P` and `P_{0|x} P_{1|x} = 0`. Bases use only outcome-0 projectors;
//! outcome-1 letters are eliminated as `1 − P_{0|x}` when a polynomial is
//! turned into a linear functional.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use dicert_sdp::{ComplexLmiBlock, HermSparse, LmiBlock, SymSparse};
use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};

type C64 = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    /// Alice's projector `M_{a|x}`.
    A { x: u8, a: u8 },
    /// Bob's projector `N_{b|y}`.
    B { y: u8, b: u8 },
    /// Adversary operator `Z_{a,b}` at quadrature node `node`, or its adjoint.
    Z { a: u8, b: u8, node: u16, dagger: bool },
}

impl Letter {
    fn party(&self) -> u8 {
        match self {
            Letter::A { .. } => 0,
            Letter::B { .. } => 1,
            Letter::Z { .. } => 2,
        }
    }

    pub fn adjoint(self) -> Self {
        match self {
            Letter::Z { a, b, node, dagger } => Letter::Z {
                a,
                b,
                node,
                dagger: !dagger,
            },
            p => p,
        }
    }

    /// Setting and outcome for projector letters.
    fn projector(&self) -> Option<(u8, u8)> {
        match *self {
            Letter::A { x, a } => Some((x, a)),
            Letter::B { y, b } => Some((y, b)),
            Letter::Z { .. } => None,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::A { x, a } => write!(f, "M{a}|{x}"),
            Letter::B { y, b } => write!(f, "N{b}|{y}"),
            Letter::Z { a, b, node, dagger } => {
                write!(f, "Z{a}{b}.{node}{}", if *dagger { "*" } else { "" })
            }
        }
    }
}

/// A word of letters, or the zero operator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    zero: bool,
    letters: Vec<Letter>,
}

impl Monomial {
    pub fn identity() -> Self {
        Self {
            zero: false,
            letters: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self {
            zero: true,
            letters: Vec::new(),
        }
    }

    /// Builds a word and brings it to normal form.
    pub fn new(letters: impl IntoIterator<Item = Letter>) -> Self {
        canonicalize(&Self {
            zero: false,
            letters: letters.into_iter().collect(),
        })
    }

    pub fn letter(l: Letter) -> Self {
        Self::new([l])
    }

    /// Raw word without reduction.
    pub fn raw(letters: Vec<Letter>) -> Self {
        Self { zero: false, letters }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn is_identity(&self) -> bool {
        !self.zero && self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Canonical product `self · other`.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        if self.zero || other.zero {
            return Monomial::zero();
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        canonicalize(&Monomial::raw(letters))
    }

    pub fn adjoint(&self) -> Monomial {
        adjoint(self)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero {
            return write!(f, "0");
        }
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Normal form: parties ordered A, B, E with relative order kept inside each
/// party, then projector idempotence and orthogonality applied per party.
pub fn canonicalize(m: &Monomial) -> Monomial {
    if m.zero {
        return Monomial::zero();
    }
    let mut out: Vec<Letter> = Vec::with_capacity(m.letters.len());
    for party in 0..3 {
        let start = out.len();
        for &l in m.letters.iter().filter(|l| l.party() == party) {
            if let (Some(top), Some((s, o))) = (out[start..].last(), l.projector()) {
                if let Some((ts, to)) = top.projector() {
                    if ts == s {
                        if to == o {
                            continue;
                        }
                        return Monomial::zero();
                    }
                }
            }
            out.push(l);
        }
    }
    Monomial::raw(out)
}

/// Reversed word with every letter conjugated, in normal form.
pub fn adjoint(m: &Monomial) -> Monomial {
    if m.zero {
        return Monomial::zero();
    }
    canonicalize(&Monomial::raw(m.letters.iter().rev().map(|l| l.adjoint()).collect()))
}

/// Finite linear combination of canonical words with complex coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, C64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::term(Monomial::identity(), C64::new(c, 0.0))
    }

    pub fn term(m: Monomial, c: C64) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn monomial(m: Monomial) -> Self {
        Self::term(m, C64::new(1.0, 0.0))
    }

    pub fn letter(l: Letter) -> Self {
        Self::monomial(Monomial::letter(l))
    }

    pub fn add_term(&mut self, m: Monomial, c: C64) {
        let m = canonicalize(&m);
        if m.is_zero() || c == C64::new(0.0, 0.0) {
            return;
        }
        let e = self.terms.entry(m.clone()).or_insert(C64::new(0.0, 0.0));
        *e += c;
        if *e == C64::new(0.0, 0.0) {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, C64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in self.terms() {
            for (m2, c2) in other.terms() {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in self.terms() {
            out.add_term(m.adjoint(), c.conj());
        }
        out
    }

    /// Replaces every outcome-1 projector by `1 − P_{0|·}`.
    pub fn eliminate_outcome_one(&self) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in self.terms() {
            let mut acc = Polynomial::constant(1.0);
            for &l in m.letters() {
                let factor = match l {
                    Letter::A { x, a: 1 } => {
                        Polynomial::constant(1.0).add(&Polynomial::letter(Letter::A { x, a: 0 }).scale(-1.0))
                    }
                    Letter::B { y, b: 1 } => {
                        Polynomial::constant(1.0).add(&Polynomial::letter(Letter::B { y, b: 0 }).scale(-1.0))
                    }
                    other => Polynomial::letter(other),
                };
                acc = acc.mul(&factor);
            }
            out = out.add(&acc.scale_complex(c));
        }
        out
    }

    fn scale_complex(&self, s: C64) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * s);
        }
        out
    }
}

/// Alice's projector `M_{a|x}`.
pub fn alice(x: usize, a: usize) -> Letter {
    Letter::A { x: x as u8, a: a as u8 }
}

/// Bob's projector `N_{b|y}`.
pub fn bob(y: usize, b: usize) -> Letter {
    Letter::B { y: y as u8, b: b as u8 }
}

pub fn zed(a: usize, b: usize, node: usize, dagger: bool) -> Letter {
    Letter::Z {
        a: a as u8,
        b: b as u8,
        node: node as u16,
        dagger,
    }
}

/// Correlator operator `A_x B_y` with `A_x = 2M_{0|x} − 1`.
pub fn correlator_polynomial(x: usize, y: usize) -> Polynomial {
    let ax = Polynomial::letter(alice(x, 0)).scale(2.0).add(&Polynomial::constant(-1.0));
    let by = Polynomial::letter(bob(y, 0)).scale(2.0).add(&Polynomial::constant(-1.0));
    ax.mul(&by)
}

/// Nonzero canonical projector words of length ≤ `level` (outcome 0 only),
/// followed by `extras`, deduplicated, identity first.
pub fn generate_basis(n_x: usize, n_y: usize, level: usize, extras: &[Monomial]) -> Result<Vec<Monomial>> {
    if level == 0 {
        return Err(Error::Validation("basis level must be at least 1".into()));
    }
    let letters: Vec<Letter> = (0..n_x)
        .map(|x| alice(x, 0))
        .chain((0..n_y).map(|y| bob(y, 0)))
        .collect();
    let mut basis = vec![Monomial::identity()];
    let mut seen: std::collections::HashSet<Monomial> = basis.iter().cloned().collect();
    let mut frontier = vec![Monomial::identity()];
    for len in 1..=level {
        let mut next = Vec::new();
        for w in &frontier {
            for &l in &letters {
                let m = w.mul(&Monomial::letter(l));
                if !m.is_zero() && m.len() == len && seen.insert(m.clone()) {
                    next.push(m);
                }
            }
        }
        next.sort();
        basis.extend(next.iter().cloned());
        frontier = next;
    }
    for e in extras {
        let e = canonicalize(e);
        if !e.is_zero() && seen.insert(e.clone()) {
            basis.push(e);
        }
    }
    Ok(basis)
}

/// Symbolic moment matrix `M[u,v] = ⟨u† v⟩` over a basis.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub basis: Vec<Monomial>,
    /// Distinct nonzero words appearing in the matrix.
    pub words: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
    /// `conj[id]` is the id of the adjoint word.
    pub conj: Vec<usize>,
    /// Upper triangle, row-major; `None` for the zero operator.
    entries: Vec<Option<usize>>,
    /// Identify `⟨w⟩` with `⟨w†⟩` and keep everything real.
    pub hermitian_moments: bool,
}

impl MomentMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Word id at `(r, c)`; for `r > c` this is the conjugate of `(c, r)`.
    pub fn entry(&self, r: usize, c: usize) -> Option<usize> {
        if r <= c {
            self.entries[self.upper(r, c)]
        } else {
            self.entries[self.upper(c, r)].map(|id| self.conj[id])
        }
    }

    fn upper(&self, r: usize, c: usize) -> usize {
        let n = self.dim();
        r * n - r * (r + 1) / 2 + c
    }

    pub fn word_id(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn identity_id(&self) -> usize {
        self.index[&Monomial::identity()]
    }

    /// Debug dump: basis words and `[row, col, entry]` for the upper triangle,
    /// where the entry is `"0"`, `"1"` or `"w<id>"`.
    pub fn to_debug_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Dump {
            basis: Vec<String>,
            words: Vec<String>,
            entries: Vec<(usize, usize, String)>,
        }
        let id1 = self.identity_id();
        let mut entries = Vec::new();
        for r in 0..self.dim() {
            for c in r..self.dim() {
                let e = match self.entry(r, c) {
                    None => "0".to_string(),
                    Some(id) if id == id1 => "1".to_string(),
                    Some(id) => format!("w{id}"),
                };
                entries.push((r, c, e));
            }
        }
        serde_json::to_value(Dump {
            basis: self.basis.iter().map(|m| m.to_string()).collect(),
            words: self.words.iter().map(|m| m.to_string()).collect(),
            entries,
        })
        .expect("plain data")
    }
}

pub fn build_moment_matrix(basis: &[Monomial], hermitian_moments: bool) -> Result<MomentMatrix> {
    if basis.first().map(Monomial::is_identity) != Some(true) {
        return Err(Error::Validation("basis must start with the identity".into()));
    }
    let mut words = Vec::new();
    let mut index = HashMap::new();
    let mut intern = |m: Monomial, words: &mut Vec<Monomial>| -> usize {
        *index.entry(m.clone()).or_insert_with(|| {
            words.push(m);
            words.len() - 1
        })
    };
    intern(Monomial::identity(), &mut words);
    let n = basis.len();
    let adj: Vec<Monomial> = basis.iter().map(adjoint).collect();
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for r in 0..n {
        for c in r..n {
            let w = adj[r].mul(&basis[c]);
            entries.push(if w.is_zero() {
                None
            } else {
                Some(intern(w, &mut words))
            });
        }
    }
    // Close the table under adjoints.
    let mut k = 0;
    while k < words.len() {
        let a = adjoint(&words[k]);
        intern(a, &mut words);
        k += 1;
    }
    let conj = words.iter().map(|w| index[&adjoint(w)]).collect();
    let mut dedup = HashMap::new();
    for (i, w) in words.iter().enumerate() {
        if dedup.insert(w.clone(), i).is_some() {
            return Err(Error::Validation(format!("basis contains duplicate word {w}")));
        }
    }
    Ok(MomentMatrix {
        basis: basis.to_vec(),
        words,
        index,
        conj,
        entries,
        hermitian_moments,
    })
}

/// Affine real functional `constant + Σ coeffs·y`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Functional {
    pub constant: f64,
    pub coeffs: BTreeMap<usize, f64>,
}

impl Functional {
    pub fn add_coeff(&mut self, var: usize, v: f64) {
        *self.coeffs.entry(var).or_insert(0.0) += v;
    }

    pub fn add(&mut self, other: &Functional, scale: f64) {
        self.constant += scale * other.constant;
        for (&i, &v) in &other.coeffs {
            self.add_coeff(i, scale * v);
        }
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|(&i, &v)| v * y[i]).sum::<f64>()
    }

    pub fn to_pairs(&self) -> Vec<(usize, f64)> {
        self.coeffs.iter().filter(|e| *e.1 != 0.0).map(|(&i, &v)| (i, v)).collect()
    }
}

/// Assignment of SDP variables to moments `⟨w⟩`, keyed by canonical word.
///
/// A word and its adjoint share one real variable; in complex mode a
/// non-self-adjoint pair additionally owns an imaginary-part variable.
/// Blocks lowered through the same table share every common moment.
#[derive(Clone, Debug)]
pub struct VarTable {
    next: usize,
    re: HashMap<Monomial, usize>,
    im: HashMap<Monomial, usize>,
    /// Identity moment fixed to 1 instead of being a variable.
    pub normalized: bool,
    /// Identify `⟨w⟩` with `⟨w†⟩` and keep everything real.
    pub hermitian: bool,
}

impl VarTable {
    /// Variables are allocated from index `first` upwards.
    pub fn new(first: usize, normalized: bool, hermitian: bool) -> Self {
        Self {
            next: first,
            re: HashMap::new(),
            im: HashMap::new(),
            normalized,
            hermitian,
        }
    }

    /// One past the largest allocated index.
    pub fn next_var(&self) -> usize {
        self.next
    }

    pub fn len(&self) -> usize {
        self.re.len() + self.im.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// Variable holding the real part of `⟨w⟩`.
    pub fn re_var(&self, w: &Monomial) -> Option<usize> {
        self.re.get(&representative(w)).copied()
    }

    /// Per-variable magnitude bounds from a bound on `|⟨w⟩|`, indexed by
    /// variable; indices the table does not own get `fallback`.
    pub fn bounds(&self, len: usize, fallback: f64, word_bound: impl Fn(&Monomial) -> f64) -> Vec<f64> {
        let mut out = vec![fallback; len];
        for (w, &v) in self.re.iter().chain(self.im.iter()) {
            if v < len {
                out[v] = word_bound(w);
            }
        }
        out
    }

    /// For each variable index below `len`, the word it stands for and
    /// whether it holds the imaginary rather than the real part of `⟨w⟩`.
    pub fn labels(&self, len: usize) -> Vec<Option<(Monomial, bool)>> {
        let mut out = vec![None; len];
        for (imag, map) in [(false, &self.re), (true, &self.im)] {
            for (w, &v) in map {
                if v < len {
                    out[v] = Some((w.clone(), imag));
                }
            }
        }
        out
    }

    fn intern(&mut self, w: &Monomial) {
        if self.normalized && w.is_identity() {
            return;
        }
        let rep = representative(w);
        if self.re.contains_key(&rep) {
            return;
        }
        self.re.insert(rep.clone(), self.next);
        self.next += 1;
        if !self.hermitian && adjoint(&rep) != rep {
            self.im.insert(rep, self.next);
            self.next += 1;
        }
    }

    /// `⟨w⟩ = re + i·s·im` with `s = ±1` by orientation; `None` when the
    /// word has no variable.
    fn parts(&self, w: &Monomial) -> Option<(usize, Option<(usize, f64)>)> {
        let rep = representative(w);
        let re = *self.re.get(&rep)?;
        let im = if self.hermitian {
            None
        } else {
            self.im.get(&rep).map(|&v| (v, if *w == rep { 1.0 } else { -1.0 }))
        };
        Some((re, im))
    }

    /// Adds `Re(c·⟨w⟩)` to `f`.
    fn add_term(&self, w: &Monomial, c: C64, f: &mut Functional) -> Result<()> {
        if self.normalized && w.is_identity() {
            f.constant += c.re;
            return Ok(());
        }
        let (re, im) = self.parts(w).ok_or_else(|| Error::BasisTooSmall(w.to_string()))?;
        f.add_coeff(re, c.re);
        if let Some((v, s)) = im {
            f.add_coeff(v, -c.im * s);
        }
        Ok(())
    }
}

fn representative(w: &Monomial) -> Monomial {
    let a = adjoint(w);
    if a < *w {
        a
    } else {
        w.clone()
    }
}

/// Allocates variables for every moment of `mm` in `table` and returns the
/// real PSD block expressing `M ⪰ 0` (realified in complex mode).
pub fn lower_moment_matrix(mm: &MomentMatrix, table: &mut VarTable) -> Result<LmiBlock> {
    if table.hermitian != mm.hermitian_moments {
        return Err(Error::Validation("moment matrix and variable table disagree on Hermitian moments".into()));
    }
    for w in &mm.words {
        table.intern(w);
    }
    let n = mm.dim();
    let complex = !table.hermitian && mm.words.iter().any(|w| table.im.contains_key(&representative(w)));
    if !complex {
        let mut blk = LmiBlock::new(n);
        let mut terms: BTreeMap<usize, SymSparse> = BTreeMap::new();
        for r in 0..n {
            for c in r..n {
                let Some(id) = mm.entry(r, c) else { continue };
                let w = &mm.words[id];
                if table.normalized && w.is_identity() {
                    blk.constant.push(r, c, 1.0);
                } else {
                    let v = table.re_var(w).expect("interned");
                    terms.entry(v).or_default().push(r, c, 1.0);
                }
            }
        }
        blk.terms = terms.into_iter().collect();
        blk.compact();
        return Ok(blk);
    }
    let mut blk = ComplexLmiBlock::new(n);
    let mut terms: BTreeMap<usize, HermSparse> = BTreeMap::new();
    for r in 0..n {
        for c in r..n {
            let Some(id) = mm.entry(r, c) else { continue };
            let w = &mm.words[id];
            if table.normalized && w.is_identity() {
                blk.constant.push(r, c, C64::new(1.0, 0.0));
                continue;
            }
            let (re, im) = table.parts(w).expect("interned");
            terms.entry(re).or_default().push(r, c, C64::new(1.0, 0.0));
            if let Some((v, s)) = im {
                // Diagonal words are self-adjoint and carry no imaginary part.
                if r != c {
                    terms.entry(v).or_default().push(r, c, C64::new(0.0, s));
                }
            }
        }
    }
    blk.terms = terms.into_iter().collect();
    Ok(dicert_sdp::realify(&blk)?)
}

/// Real part of `⟨p⟩` as a functional of the moment variables.
pub fn polynomial_to_functional(p: &Polynomial, table: &VarTable) -> Result<Functional> {
    let mut f = Functional::default();
    for (m, c) in p.eliminate_outcome_one().terms() {
        table.add_term(m, c, &mut f)?;
    }
    Ok(f)
}
