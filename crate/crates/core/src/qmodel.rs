//! Two-qubit model of a polarization Bell test: states, half-wave-plate
//! observables, behaviors, correlators, Bell expressions and their bounds.
//!
//! Outcome `0` is always the `+1` eigenvalue of an observable.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_6, PI, SQRT_2};

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type ComplexMatrix = DMatrix<Complex<f64>>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_FLOOR: f64 = -1e-10;
const NORMALIZATION_TOL: f64 = 1e-9;

fn c(re: f64) -> Complex<f64> {
    Complex::new(re, 0.0)
}

pub fn pauli_x() -> ComplexMatrix {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn pauli_z() -> ComplexMatrix {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitState {
    density: ComplexMatrix,
}

impl TwoQubitState {
    pub fn new(density: ComplexMatrix) -> Result<Self> {
        if density.shape() != (4, 4) {
            return invalid(format!("density matrix must be 4×4, got {:?}", density.shape()));
        }
        if density.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("density matrix has non-finite entries");
        }
        let herm = hermiticity_defect(&density);
        if herm > HERMITIAN_TOL {
            return invalid(format!("density matrix not Hermitian (defect {herm:.2e})"));
        }
        let tr = density.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return invalid(format!("density matrix trace {tr} ≠ 1"));
        }
        let min_eig = SymmetricEigen::new(density.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < PSD_FLOOR {
            return invalid(format!("density matrix not PSD (min eigenvalue {min_eig:.3e})"));
        }
        Ok(Self { density })
    }

    pub fn density(&self) -> &ComplexMatrix {
        &self.density
    }

    pub fn maximally_mixed() -> Self {
        Self {
            density: ComplexMatrix::identity(4, 4) * c(0.25),
        }
    }

    /// `η ρ + (1 − η) 𝟙/4`.
    pub fn with_white_noise(&self, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        Ok(Self {
            density: &self.density * c(eta) + Self::maximally_mixed().density * c(1.0 - eta),
        })
    }

    /// `Tr[ρ (A ⊗ B)]`.
    pub fn expectation(&self, alice: &ComplexMatrix, bob: &ComplexMatrix) -> Complex<f64> {
        (&self.density * alice.kronecker(bob)).trace()
    }
}

/// `(|HH⟩ + |VV⟩)/√2` as a density operator.
pub fn bell_state_phi_plus() -> TwoQubitState {
    let mut psi = DMatrix::zeros(4, 1);
    psi[(0, 0)] = c(1.0 / SQRT_2);
    psi[(3, 0)] = c(1.0 / SQRT_2);
    TwoQubitState {
        density: &psi * psi.adjoint(),
    }
}

/// Dichotomic observable with eigenvalues ±1; outcome 0 ↔ +1.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryObservable {
    operator: ComplexMatrix,
}

impl BinaryObservable {
    pub fn new(operator: ComplexMatrix) -> Result<Self> {
        if operator.shape() != (2, 2) {
            return invalid("observable must be 2×2");
        }
        let herm = hermiticity_defect(&operator);
        if herm > HERMITIAN_TOL {
            return invalid(format!("observable not Hermitian (defect {herm:.2e})"));
        }
        let sq = &operator * &operator - ComplexMatrix::identity(2, 2);
        let inv = sq.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if inv > HERMITIAN_TOL {
            return invalid(format!("observable does not square to identity (defect {inv:.2e})"));
        }
        Ok(Self { operator })
    }

    pub fn operator(&self) -> &ComplexMatrix {
        &self.operator
    }

    /// Projector onto outcome `a`: `(𝟙 ± O)/2`.
    pub fn projector(&self, outcome: usize) -> ComplexMatrix {
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        (ComplexMatrix::identity(2, 2) + &self.operator * c(sign)) * c(0.5)
    }

    /// Observable `cos(φ)σ_z + sin(φ)σ_x` at Bloch angle `φ` (radians).
    pub fn from_bloch_angle(phi: f64) -> Self {
        Self {
            operator: pauli_z() * c(phi.cos()) + pauli_x() * c(phi.sin()),
        }
    }
}

/// Half-wave-plate orientation in degrees, normalized to `[-180, 180)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwpSetting {
    theta: f64,
}

impl HwpSetting {
    pub fn new(degrees: f64) -> Result<Self> {
        if !degrees.is_finite() {
            return invalid("HWP angle must be finite");
        }
        Ok(Self {
            theta: (degrees + 180.0).rem_euclid(360.0) - 180.0,
        })
    }

    pub fn degrees(&self) -> f64 {
        self.theta
    }

    /// A HWP at θ followed by a PBS measures along Bloch angle 4θ.
    pub fn bloch_angle(&self) -> f64 {
        4.0 * self.theta.to_radians()
    }
}

pub fn hwp_observable(setting: HwpSetting) -> BinaryObservable {
    BinaryObservable::from_bloch_angle(setting.bloch_angle())
}

/// Conditional probabilities `P(a,b|x,y)` for binary outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorTable {
    pub n_x: usize,
    pub n_y: usize,
    /// `[P(0,0), P(0,1), P(1,0), P(1,1)]`, indexed by `x * n_y + y`.
    probs: Vec<[f64; 4]>,
    stderr: Option<Vec<[f64; 4]>>,
}

impl BehaviorTable {
    pub fn new(n_x: usize, n_y: usize, probs: Vec<[f64; 4]>, stderr: Option<Vec<[f64; 4]>>) -> Result<Self> {
        if probs.len() != n_x * n_y {
            return invalid(format!("expected {} setting pairs, got {}", n_x * n_y, probs.len()));
        }
        if let Some(e) = &stderr {
            if e.len() != probs.len() || e.iter().flatten().any(|v| !(*v >= 0.0)) {
                return invalid("stderr table malformed or negative");
            }
        }
        for (k, p) in probs.iter().enumerate() {
            if p.iter().any(|v| !(-NORMALIZATION_TOL..=1.0 + NORMALIZATION_TOL).contains(v)) {
                return invalid(format!("probability outside [0,1] at pair {k}"));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return invalid(format!(
                    "probabilities at ({},{}) sum to {s}",
                    k / n_y,
                    k % n_y
                ));
            }
        }
        Ok(Self { n_x, n_y, probs, stderr })
    }

    pub fn uniform(n_x: usize, n_y: usize) -> Self {
        Self {
            n_x,
            n_y,
            probs: vec![[0.25; 4]; n_x * n_y],
            stderr: None,
        }
    }

    /// `P(a,b|x,y)`.
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.probs[x * self.n_y + y][2 * a + b]
    }

    pub fn cell(&self, x: usize, y: usize) -> [f64; 4] {
        self.probs[x * self.n_y + y]
    }

    pub fn cell_stderr(&self, x: usize, y: usize) -> Option<[f64; 4]> {
        self.stderr.as_ref().map(|e| e[x * self.n_y + y])
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for x in 0..self.n_x {
            for y in 0..self.n_y {
                let mut entry = serde_json::json!({ "p": self.cell(x, y) });
                if let Some(e) = self.cell_stderr(x, y) {
                    entry["stderr"] = serde_json::json!(e);
                }
                map.insert(pair_key(x, y), entry);
            }
        }
        serde_json::Value::Object(map)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Validation("behavior JSON must be an object".into()))?;
        let mut cells = BTreeMap::new();
        let mut errs = BTreeMap::new();
        for (k, entry) in obj {
            let key = parse_pair_key(k)?;
            let p: [f64; 4] = serde_json::from_value(entry["p"].clone())?;
            cells.insert(key, p);
            if let Some(e) = entry.get("stderr") {
                errs.insert(key, serde_json::from_value::<[f64; 4]>(e.clone())?);
            }
        }
        let n_x = cells.keys().map(|k| k.0 + 1).max().unwrap_or(0);
        let n_y = cells.keys().map(|k| k.1 + 1).max().unwrap_or(0);
        let mut probs = Vec::with_capacity(n_x * n_y);
        for x in 0..n_x {
            for y in 0..n_y {
                probs.push(*cells.get(&(x, y)).ok_or(Error::MissingCorrelator { x, y })?);
            }
        }
        let stderr = if errs.is_empty() {
            None
        } else {
            Some(
                (0..n_x * n_y)
                    .map(|k| errs.get(&(k / n_y, k % n_y)).copied().unwrap_or([0.0; 4]))
                    .collect(),
            )
        };
        Self::new(n_x, n_y, probs, stderr)
    }
}

pub fn pair_key(x: usize, y: usize) -> String {
    format!("{x},{y}")
}

pub fn parse_pair_key(k: &str) -> Result<(usize, usize)> {
    let (a, b) = k
        .split_once(',')
        .ok_or_else(|| Error::Validation(format!("setting pair key {k:?} is not \"x,y\"")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Validation(format!("bad setting index in {k:?}")))
    };
    Ok((parse(a)?, parse(b)?))
}

/// Born-rule behavior of `state` for the given observables.
pub fn behavior(state: &TwoQubitState, alice: &[BinaryObservable], bob: &[BinaryObservable]) -> Result<BehaviorTable> {
    for o in alice.iter().chain(bob) {
        // Re-validate: observables may have been built from raw angles.
        BinaryObservable::new(o.operator.clone())?;
    }
    let mut probs = Vec::with_capacity(alice.len() * bob.len());
    for a_obs in alice {
        for b_obs in bob {
            let mut cell = [0.0; 4];
            for a in 0..2 {
                for b in 0..2 {
                    let p = state.expectation(&a_obs.projector(a), &b_obs.projector(b)).re;
                    cell[2 * a + b] = p.clamp(0.0, 1.0);
                }
            }
            let s: f64 = cell.iter().sum();
            cell.iter_mut().for_each(|v| *v /= s);
            probs.push(cell);
        }
    }
    BehaviorTable::new(alice.len(), bob.len(), probs, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlator {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

/// Correlators `C(x,y)` keyed by setting pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorrelatorSet {
    values: BTreeMap<(usize, usize), Correlator>,
}

impl CorrelatorSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, x: usize, y: usize, value: f64, stderr: Option<f64>) -> Result<()> {
        if !value.is_finite() || value.abs() > 1.0 + NORMALIZATION_TOL {
            return invalid(format!("correlator C({x},{y}) = {value} outside [-1,1]"));
        }
        if let Some(e) = stderr {
            if !(e >= 0.0) {
                return invalid(format!("negative stderr for C({x},{y})"));
            }
        }
        self.values.insert((x, y), Correlator { value, stderr });
        Ok(())
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Correlator> {
        self.values.get(&(x, y)).copied()
    }

    pub fn value(&self, x: usize, y: usize) -> Result<f64> {
        self.get(x, y).map(|c| c.value).ok_or(Error::MissingCorrelator { x, y })
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), Correlator)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .values
            .iter()
            .map(|(&(x, y), c)| (pair_key(x, y), serde_json::to_value(c).expect("plain struct")))
            .collect();
        serde_json::Value::Object(map)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Validation("correlator JSON must be an object".into()))?;
        let mut out = Self::new();
        for (k, entry) in obj {
            let (x, y) = parse_pair_key(k)?;
            let c: Correlator = serde_json::from_value(entry.clone())?;
            out.insert(x, y, c.value, c.stderr)?;
        }
        Ok(out)
    }
}

/// `C(x,y) = P(0,0) + P(1,1) − P(0,1) − P(1,0)`, with first-order stderr
/// propagation when the behavior carries uncertainties.
pub fn correlators(b: &BehaviorTable) -> CorrelatorSet {
    let mut out = CorrelatorSet::new();
    for x in 0..b.n_x {
        for y in 0..b.n_y {
            let p = b.cell(x, y);
            let value = (p[0] + p[3] - p[1] - p[2]).clamp(-1.0, 1.0);
            let stderr = b
                .cell_stderr(x, y)
                .map(|e| e.iter().map(|v| v * v).sum::<f64>().sqrt());
            out.insert(x, y, value, stderr).expect("clamped correlator is valid");
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "parameter")]
pub enum BellFamily {
    ModChsh,
    IDelta(f64),
    JGamma(f64),
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BellExpression {
    pub family: BellFamily,
    coeffs: BTreeMap<(usize, usize), f64>,
}

impl BellExpression {
    pub fn custom(coeffs: impl IntoIterator<Item = ((usize, usize), f64)>) -> Result<Self> {
        let coeffs: BTreeMap<_, _> = coeffs.into_iter().collect();
        if coeffs.values().any(|c| !c.is_finite()) {
            return invalid("Bell coefficients must be finite");
        }
        Ok(Self {
            family: BellFamily::Custom,
            coeffs,
        })
    }

    pub fn coeff(&self, x: usize, y: usize) -> f64 {
        self.coeffs.get(&(x, y)).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, *v))
    }

    pub fn n_x(&self) -> usize {
        self.coeffs.keys().map(|k| k.0 + 1).max().unwrap_or(0)
    }

    pub fn n_y(&self) -> usize {
        self.coeffs.keys().map(|k| k.1 + 1).max().unwrap_or(0)
    }

    /// Human-readable label such as `I_δ(0.5)`.
    pub fn label(&self) -> String {
        match self.family {
            BellFamily::ModChsh => "modCHSH".into(),
            BellFamily::IDelta(d) => format!("I_delta({d})"),
            BellFamily::JGamma(g) => format!("J_gamma({g})"),
            BellFamily::Custom => "custom".into(),
        }
    }
}

/// `4cos²(γ + π/6) − 1`.
fn j_gamma_weight(gamma: f64) -> f64 {
    4.0 * (gamma + FRAC_PI_6).cos().powi(2) - 1.0
}

pub fn make_bell(family: BellFamily) -> Result<BellExpression> {
    let coeffs: Vec<((usize, usize), f64)> = match family {
        BellFamily::ModChsh => vec![
            ((0, 1), 1.0),
            ((0, 2), 1.0),
            ((1, 0), 1.0),
            ((1, 1), 1.0),
            ((1, 2), -1.0),
        ],
        BellFamily::IDelta(delta) => {
            if !(delta > 0.0 && delta <= FRAC_PI_6 + 1e-15) {
                return invalid(format!("δ = {delta} outside (0, π/6]"));
            }
            let s = 1.0 / delta.sin();
            vec![
                ((0, 0), 1.0),
                ((0, 1), s),
                ((1, 0), s),
                ((1, 1), -1.0 / (2.0 * delta).cos()),
            ]
        }
        BellFamily::JGamma(gamma) => {
            if !(0.0..=PI / 12.0 + 1e-15).contains(&gamma) {
                return invalid(format!("γ = {gamma} outside [0, π/12]"));
            }
            let w = j_gamma_weight(gamma);
            vec![((0, 0), 1.0), ((0, 1), w), ((1, 0), w), ((1, 1), -w)]
        }
        BellFamily::Custom => return invalid("custom expressions are built with BellExpression::custom"),
    };
    Ok(BellExpression {
        family,
        coeffs: coeffs.into_iter().collect(),
    })
}

/// A value with an optional one-sigma uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub stderr: Option<f64>,
}

/// `Σ coeff(x,y)·C(x,y)`; stderr assumes independent setting pairs.
pub fn bell_value(c: &CorrelatorSet, e: &BellExpression) -> Result<Measured> {
    let mut value = 0.0;
    let mut var = 0.0;
    let mut all_err = true;
    for ((x, y), k) in e.terms() {
        let corr = c.get(x, y).ok_or(Error::MissingCorrelator { x, y })?;
        value += k * corr.value;
        match corr.stderr {
            Some(s) => var += k * k * s * s,
            None => all_err = false,
        }
    }
    Ok(Measured {
        value,
        stderr: all_err.then(|| var.sqrt()),
    })
}

pub fn tsirelson_bound(e: &BellExpression) -> Result<f64> {
    match e.family {
        BellFamily::ModChsh => Ok(1.0 + 2.0 * SQRT_2),
        BellFamily::IDelta(d) => Ok(2.0 * d.cos().powi(3) / ((2.0 * d).cos() * d.sin())),
        BellFamily::JGamma(g) => Ok(8.0 * (g + FRAC_PI_6).cos().powi(3)),
        BellFamily::Custom => Err(Error::Unsupported(
            "no closed-form Tsirelson bound for a custom expression; maximize with the NPA relaxation".into(),
        )),
    }
}

/// Maximum over deterministic ±1 strategies.
pub fn classical_bound(e: &BellExpression) -> f64 {
    let (nx, ny) = (e.n_x(), e.n_y());
    let sign = |bits: usize, k: usize| if bits >> k & 1 == 0 { 1.0 } else { -1.0 };
    let mut best = f64::NEG_INFINITY;
    for sa in 0..1usize << nx {
        for sb in 0..1usize << ny {
            let v: f64 = e
                .terms()
                .map(|((x, y), k)| k * sign(sa, x) * sign(sb, y))
                .sum();
            best = best.max(v);
        }
    }
    best
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return invalid(format!("noise weight η = {eta} outside [0,1]"));
    }
    Ok(())
}

/// Mixing with white noise scales every correlator (and its stderr) by `η`.
pub fn apply_white_noise(c: &CorrelatorSet, eta: f64) -> Result<CorrelatorSet> {
    check_eta(eta)?;
    let mut out = CorrelatorSet::new();
    for ((x, y), corr) in c.iter() {
        out.insert(x, y, eta * corr.value, corr.stderr.map(|s| eta * s))?;
    }
    Ok(out)
}

pub fn relative_bell_value(observed: f64, e: &BellExpression) -> Result<f64> {
    Ok(observed / tsirelson_bound(e)?)
}

/// HWP orientations for both parties, `alice[x]` and `bob[y]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    pub alice: Vec<HwpSetting>,
    pub bob: Vec<HwpSetting>,
}

impl AngleSet {
    pub fn from_degrees(alice: &[f64], bob: &[f64]) -> Result<Self> {
        Ok(Self {
            alice: alice.iter().map(|&d| HwpSetting::new(d)).collect::<Result<_>>()?,
            bob: bob.iter().map(|&d| HwpSetting::new(d)).collect::<Result<_>>()?,
        })
    }

    pub fn observables(&self) -> (Vec<BinaryObservable>, Vec<BinaryObservable>) {
        (
            self.alice.iter().map(|s| hwp_observable(*s)).collect(),
            self.bob.iter().map(|s| hwp_observable(*s)).collect(),
        )
    }

    /// CSV with columns `role,setting,theta_degrees`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("role,setting,theta_degrees\n");
        for (role, list) in [("alice", &self.alice), ("bob", &self.bob)] {
            for (k, s) in list.iter().enumerate() {
                out.push_str(&format!("{role},{k},{}\n", s.degrees()));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut alice = BTreeMap::new();
        let mut bob = BTreeMap::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["role", "setting", "theta_degrees"] {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header role,setting,theta_degrees".into(),
            });
        }
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            let perr = |msg: &str| Error::Parse { line, msg: msg.into() };
            let idx: usize = rec[1].parse().map_err(|_| perr("bad setting index"))?;
            let theta: f64 = rec[2].parse().map_err(|_| perr("bad angle"))?;
            let setting = HwpSetting::new(theta).map_err(|_| perr("non-finite angle"))?;
            let target = match &rec[0] {
                "alice" => &mut alice,
                "bob" => &mut bob,
                other => return Err(perr(&format!("unknown role {other:?}"))),
            };
            if target.insert(idx, setting).is_some() {
                return Err(perr("duplicate setting"));
            }
        }
        let collect = |m: BTreeMap<usize, HwpSetting>, who: &str| -> Result<Vec<HwpSetting>> {
            if m.keys().copied().ne(0..m.len()) {
                return invalid(format!("{who} settings are not contiguous from 0"));
            }
            Ok(m.into_values().collect())
        };
        Ok(Self {
            alice: collect(alice, "alice")?,
            bob: collect(bob, "bob")?,
        })
    }
}

/// HWP angles achieving the Tsirelson bound on `|φ+⟩`.
///
/// Bloch angles: I_δ uses A = (0, π/2 + δ), B = (π/2, −δ); J_γ uses
/// A = (0, 2π/3 − 2γ), B = (π/2 − 3γ, 11π/6 − γ); modCHSH uses
/// A = (0, π/2), B = (π/2, π/4, −π/4). A plate angle is a quarter of the
/// Bloch angle up to the 90° period, chosen to match the lab convention.
pub fn optimal_angles(family: BellFamily) -> Result<AngleSet> {
    match family {
        BellFamily::IDelta(d) => {
            make_bell(family)?;
            let d = d.to_degrees();
            AngleSet::from_degrees(&[0.0, (90.0 + d) / 4.0 - 90.0], &[22.5, 90.0 - d / 4.0])
        }
        BellFamily::JGamma(g) => {
            make_bell(family)?;
            let g = g.to_degrees();
            AngleSet::from_degrees(&[0.0, 30.0 - g / 2.0], &[22.5 - 0.75 * g, 82.5 - g / 4.0])
        }
        BellFamily::ModChsh => AngleSet::from_degrees(&[0.0, 22.5], &[22.5, 11.25, -11.25]),
        BellFamily::Custom => Err(Error::Unsupported("no known optimal angles for custom expressions".into())),
    }
}

/// HWP angles as used in the lab for I_δ, rounded to 0.01°, keyed by δ.
pub const LAB_ANGLES_I_DELTA: [(f64, [f64; 4]); 5] = [
    (0.3, [0.0, -63.20, 22.5, 85.70]),
    (0.4, [0.0, -61.77, 22.5, 84.27]),
    (0.45, [0.0, -61.05, 22.5, 83.55]),
    (0.5, [0.0, -60.34, 22.5, 82.84]),
    (0.52, [0.0, -60.05, 22.5, 82.55]),
];

/// HWP angles as used in the lab for J_γ, keyed by γ/π.
pub const LAB_ANGLES_J_GAMMA: [(f64, [f64; 4]); 3] = [
    (0.0, [0.0, 30.0, 22.5, 82.5]),
    (1.0 / 24.0, [0.0, 26.25, 16.88, 80.63]),
    (1.0 / 12.0, [0.0, 22.5, 11.25, 78.75]),
];

/// Recorded lab angles for a family, if tabulated. Entries are
/// `[A(x=0), A(x=1), B(y=0), B(y=1)]`.
pub fn lab_angles(family: BellFamily) -> Option<AngleSet> {
    let row = match family {
        BellFamily::IDelta(d) => LAB_ANGLES_I_DELTA.iter().find(|r| (r.0 - d).abs() < 1e-9)?.1,
        BellFamily::JGamma(g) => LAB_ANGLES_J_GAMMA.iter().find(|r| (r.0 * PI - g).abs() < 1e-9)?.1,
        _ => return None,
    };
    AngleSet::from_degrees(&row[..2], &row[2..]).ok()
}

/// Correlators of `|φ+⟩` mixed with white noise of weight `1 − η`, measured
/// at the given HWP angles.
pub fn simulate_correlators(angles: &AngleSet, eta: f64) -> Result<CorrelatorSet> {
    let state = bell_state_phi_plus().with_white_noise(eta)?;
    let (a, b) = angles.observables();
    Ok(correlators(&behavior(&state, &a, &b)?))
}
