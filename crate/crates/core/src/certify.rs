//! Randomness certification: the guessing-probability relaxation for
//! min-entropy, and the quadrature lower bound on the conditional von Neumann
//! entropy of the outcome pair at the target settings.
//!
//! Every reported bound comes from the dual side of the solved program,
//! lowered by the residual slack computed in [`dicert_sdp::verify`], so an
//! inaccurate solve can only weaken a bound.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use dicert_sdp::{solve, verify, LinearConstraint, SdpProblem, SdpSolution, SolveStatus, SolverOptions};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ncalg::{
    alice, bob, build_moment_matrix, correlator_polynomial, generate_basis, lower_moment_matrix,
    polynomial_to_functional, zed, Functional, Letter, Monomial, Polynomial, VarTable,
};
use crate::qmodel::{make_bell, BellExpression, BellFamily, CorrelatorSet};

/// Gauss-Radau rule for `∫₀¹ f(t) dt` with the node `t = 1` fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `w_i / (t_i ln 2)`.
    pub coeffs: Vec<f64>,
}

impl QuadratureRule {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }
}

/// Golub-Welsch on the shifted-Legendre Jacobi matrix with the last
/// diagonal entry modified so that 1 is an eigenvalue.
pub fn gauss_radau(m: usize) -> Result<QuadratureRule> {
    if !(2..=64).contains(&m) {
        return invalid(format!("quadrature size {m} outside 2..=64"));
    }
    if m == 2 {
        // Closed form, free of eigensolver rounding.
        return Ok(rule(vec![1.0 / 3.0, 1.0], vec![0.75, 0.25]));
    }
    // Monic shifted Legendre: p_{k+1} = (t − ½) p_k − β_k p_{k−1}.
    let beta = |k: usize| {
        let k = k as f64;
        k * k / (4.0 * (4.0 * k * k - 1.0))
    };
    let (mut p_prev, mut p) = (1.0, 0.5);
    for k in 1..m - 1 {
        let next = 0.5 * p - beta(k) * p_prev;
        p_prev = p;
        p = next;
    }
    let mut j = DMatrix::zeros(m, m);
    for k in 0..m {
        j[(k, k)] = 0.5;
    }
    for k in 1..m {
        let b = beta(k).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    j[(m - 1, m - 1)] = 1.0 - beta(m - 1) * p_prev / p;
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // The fixed endpoint is exact by construction.
    pairs[m - 1].0 = 1.0;
    let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(rule(nodes, weights))
}

fn rule(nodes: Vec<f64>, weights: Vec<f64>) -> QuadratureRule {
    let coeffs = nodes.iter().zip(&weights).map(|(t, w)| w / (t * LN_2)).collect();
    QuadratureRule { nodes, weights, coeffs }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    Geq,
    Leq,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// Bell value `≥` (or `=` when `exact`) a threshold.
    Bell {
        expression: BellExpression,
        value: f64,
        exact: bool,
    },
    Correlator {
        x: usize,
        y: usize,
        sense: Sense,
        value: f64,
    },
    /// Marginal `⟨A_x⟩` or `⟨B_y⟩` fixed to a value.
    Marginal { party: Party, setting: usize, value: f64 },
}

impl Constraint {
    fn polynomial(&self) -> Polynomial {
        match self {
            Constraint::Bell { expression, .. } => expression
                .terms()
                .fold(Polynomial::zero(), |acc, ((x, y), k)| acc.add(&correlator_polynomial(x, y).scale(k))),
            Constraint::Correlator { x, y, .. } => correlator_polynomial(*x, *y),
            Constraint::Marginal { party, setting, .. } => {
                let l = match party {
                    Party::Alice => alice(*setting, 0),
                    Party::Bob => bob(*setting, 0),
                };
                Polynomial::letter(l).scale(2.0).add(&Polynomial::constant(-1.0))
            }
        }
    }

    fn sense_value(&self) -> (Sense, f64) {
        match self {
            Constraint::Bell { value, exact, .. } => (if *exact { Sense::Eq } else { Sense::Geq }, *value),
            Constraint::Correlator { sense, value, .. } => (*sense, *value),
            Constraint::Marginal { value, .. } => (Sense::Eq, *value),
        }
    }

    fn settings(&self) -> (usize, usize) {
        match self {
            Constraint::Bell { expression, .. } => (expression.n_x(), expression.n_y()),
            Constraint::Correlator { x, y, .. } => (x + 1, y + 1),
            Constraint::Marginal { party: Party::Alice, setting, .. } => (setting + 1, 0),
            Constraint::Marginal { party: Party::Bob, setting, .. } => (0, setting + 1),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn bell_geq(expression: BellExpression, value: f64) -> Self {
        Self {
            constraints: vec![Constraint::Bell {
                expression,
                value,
                exact: false,
            }],
        }
    }

    /// One inequality per term of `expression`, oriented by the sign of its
    /// coefficient: `C(x,y) ≥ v` for positive and `C(x,y) ≤ v` for negative
    /// coefficients.
    pub fn correlators_ineq(expression: &BellExpression, values: &CorrelatorSet) -> Result<Self> {
        let mut constraints = Vec::new();
        for ((x, y), k) in expression.terms() {
            let value = values.value(x, y)?;
            let sense = if k >= 0.0 { Sense::Geq } else { Sense::Leq };
            constraints.push(Constraint::Correlator { x, y, sense, value });
        }
        Ok(Self { constraints })
    }

    pub fn with(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn mode(&self) -> &'static str {
        if self.constraints.is_empty() {
            "none"
        } else if self.constraints.iter().any(|c| matches!(c, Constraint::Bell { .. })) {
            "bell-geq"
        } else {
            "correlators-ineq"
        }
    }

    pub fn settings(&self) -> (usize, usize) {
        self.constraints
            .iter()
            .map(Constraint::settings)
            .fold((0, 0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Method {
    MinEntropy,
    VonNeumann { nodes: usize },
}

/// How the quadrature nodes of the entropy bound are solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeCoupling {
    /// One program per node; the bound is the weighted sum of the optima.
    #[default]
    Separate,
    /// One program with a moment block per node, sharing every moment that
    /// involves only Alice and Bob.
    Joint,
}

/// Words multiplying each adversary operator in the entropy relaxation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZBasis {
    /// `P Z`, `P Z†` for `P ∈ {1, M_{0|x*}, N_{0|y*}, M_{0|x*}N_{0|y*}}`.
    Target,
    /// `P Z`, `P Z†` for `P` ranging over every projector word of length ≤ 1
    /// and every product `M_{0|x}N_{0|y}`.
    #[default]
    AllSettings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificationTask {
    pub n_x: usize,
    pub n_y: usize,
    pub x_star: usize,
    pub y_star: usize,
    pub constraints: ConstraintSet,
    pub method: Method,
    /// NPA level of the projector part of the basis.
    pub level: usize,
    pub z_basis: ZBasis,
    pub coupling: NodeCoupling,
    /// Real symmetric moments (`⟨w⟩ = ⟨w†⟩`). Sound for these objectives,
    /// whose data are real, since conjugating a model gives another model
    /// and their average has real moments.
    pub hermitian_moments: bool,
    pub solver: SolverOptions,
}

impl CertificationTask {
    /// Task with the scenario inferred from the constraints, targets
    /// `x* = y* = 0`, level 2 and default solver settings.
    pub fn new(constraints: ConstraintSet, method: Method) -> Result<Self> {
        let (n_x, n_y) = constraints.settings();
        let t = Self {
            n_x: n_x.max(1),
            n_y: n_y.max(1),
            x_star: 0,
            y_star: 0,
            constraints,
            method,
            level: 2,
            z_basis: ZBasis::default(),
            coupling: NodeCoupling::default(),
            hermitian_moments: true,
            solver: SolverOptions::default(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_star >= self.n_x || self.y_star >= self.n_y {
            return invalid(format!(
                "target settings ({},{}) outside a {}×{} scenario",
                self.x_star, self.y_star, self.n_x, self.n_y
            ));
        }
        let (nx, ny) = self.constraints.settings();
        if nx > self.n_x || ny > self.n_y {
            return invalid("constraints reference settings outside the scenario");
        }
        if self.level == 0 {
            return invalid("basis level must be at least 1");
        }
        if let Method::VonNeumann { nodes } = self.method {
            if nodes < 2 {
                return invalid("von Neumann bound needs at least 2 quadrature nodes");
            }
        }
        for c in &self.constraints.constraints {
            if !c.sense_value().1.is_finite() {
                return invalid("constraint values must be finite");
            }
        }
        self.solver.validate()?;
        Ok(())
    }
}

/// A lowered program plus what is needed to certify its optimum.
#[derive(Clone, Debug)]
pub struct BuiltProgram {
    pub problem: SdpProblem,
    /// A priori bound on each `|y_i|` at the optimum, for the residual slack.
    pub var_bounds: Vec<f64>,
    /// Word behind each variable, and whether it is the imaginary part.
    pub variables: Vec<Option<(Monomial, bool)>>,
    pub block_dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    pub num_vars: usize,
    pub block_dims: Vec<usize>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub max_infeasibility: f64,
    /// Amount subtracted from the dual objective to make it rigorous.
    pub residual_slack: f64,
    /// Certified lower bound on the minimized objective.
    pub certified_minimum: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeContribution {
    pub node: usize,
    pub t: f64,
    pub coeff: f64,
    /// Certified lower bound on the node's infimum (`None` in joint mode).
    pub infimum: Option<f64>,
    pub contribution: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationResult {
    pub method: Method,
    pub constraint_mode: String,
    pub entropy_bits: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guessing_probability: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeContribution>,
    pub diagnostics: Vec<SolveDiagnostics>,
    /// Every solve reached optimal or near-optimal status.
    pub certified: bool,
    /// The raw bound fell outside `[0, 2]` and was clamped.
    pub clamped: bool,
    pub messages: Vec<String>,
}

fn apply_constraints(
    problem: &mut SdpProblem,
    constraints: &ConstraintSet,
    functional: &dyn Fn(&Polynomial) -> Result<Functional>,
) -> Result<()> {
    for c in &constraints.constraints {
        let f = functional(&c.polynomial())?;
        let (sense, value) = c.sense_value();
        let coeffs = f.to_pairs();
        let rhs = value - f.constant;
        match sense {
            Sense::Geq => problem.inequalities.push(LinearConstraint::new(coeffs, rhs)),
            Sense::Leq => problem
                .inequalities
                .push(LinearConstraint::new(coeffs.into_iter().map(|(i, v)| (i, -v)).collect(), -rhs)),
            Sense::Eq => problem.equalities.push(LinearConstraint::new(coeffs, rhs)),
        }
    }
    Ok(())
}

fn set_objective(problem: &mut SdpProblem, f: &Functional, scale: f64) {
    problem.objective_offset += scale * f.constant;
    for (&i, &v) in &f.coeffs {
        problem.objective[i] += scale * v;
    }
}

/// Target product `M_{a|x*} N_{b|y*}`.
fn target_projector(task: &CertificationTask, a: usize, b: usize) -> Polynomial {
    Polynomial::monomial(Monomial::new([alice(task.x_star, a), bob(task.y_star, b)]))
}

/// Four subnormalized moment blocks, one per guessed pair `(a,b)`; the
/// objective (minimized) is `−Σ_ab ⟨M_{a|x*}N_{b|y*}⟩_ab`.
pub fn build_guessing_program(task: &CertificationTask) -> Result<BuiltProgram> {
    task.validate()?;
    let basis = generate_basis(task.n_x, task.n_y, task.level, &[])?;
    let mm = build_moment_matrix(&basis, task.hermitian_moments)?;
    let mut tables = Vec::with_capacity(4);
    let mut blocks = Vec::with_capacity(4);
    let mut next = 0;
    for _ in 0..4 {
        let mut t = VarTable::new(next, false, task.hermitian_moments);
        blocks.push(lower_moment_matrix(&mm, &mut t)?);
        next = t.next_var();
        tables.push(t);
    }
    let mut problem = SdpProblem::new(next);
    let block_dims = blocks.iter().map(|b| b.dim).collect();
    problem.blocks = blocks;
    for (k, t) in tables.iter().enumerate() {
        let f = polynomial_to_functional(&target_projector(task, k / 2, k % 2), t)?;
        set_objective(&mut problem, &f, -1.0);
    }
    let mut norm = Functional::default();
    for t in &tables {
        norm.add(&polynomial_to_functional(&Polynomial::constant(1.0), t)?, 1.0);
    }
    problem.equalities.push(LinearConstraint::new(norm.to_pairs(), 1.0));
    let summed = |p: &Polynomial| -> Result<Functional> {
        let mut f = Functional::default();
        for t in &tables {
            f.add(&polynomial_to_functional(p, t)?, 1.0);
        }
        Ok(f)
    };
    apply_constraints(&mut problem, &task.constraints, &summed)?;
    // Subnormalized moments of projector words.
    let var_bounds = vec![1.0; problem.num_vars];
    // Variables of the four blocks are labelled by block order.
    let mut variables = vec![None; problem.num_vars];
    for t in &tables {
        for (v, l) in t.labels(problem.num_vars).into_iter().enumerate() {
            if l.is_some() {
                variables[v] = l;
            }
        }
    }
    Ok(BuiltProgram {
        problem,
        var_bounds,
        variables,
        block_dims,
    })
}

fn solve_certified(built: &BuiltProgram, options: &SolverOptions) -> Result<(SdpSolution, SolveDiagnostics)> {
    let sol = solve(&built.problem, options)?;
    let report = verify(&built.problem, &sol);
    let certified_minimum = report.certified_lower_bound_with(&built.var_bounds);
    let diag = SolveDiagnostics {
        status: sol.status,
        iterations: sol.iterations,
        num_vars: built.problem.num_vars,
        block_dims: built.block_dims.clone(),
        primal_objective: sol.primal_objective,
        dual_objective: report.dual_objective,
        relative_gap: sol.relative_gap,
        max_infeasibility: sol.max_infeasibility(),
        residual_slack: report.dual_objective - certified_minimum,
        certified_minimum,
        message: sol.message.clone(),
    };
    Ok((sol, diag))
}

fn converged(s: SolveStatus) -> bool {
    matches!(s, SolveStatus::Optimal | SolveStatus::NearOptimal)
}

fn clamp_entropy(raw: f64, messages: &mut Vec<String>) -> (f64, bool) {
    if !raw.is_finite() {
        messages.push("bound is not finite; reporting 0".into());
        return (0.0, true);
    }
    if raw < 0.0 {
        messages.push(format!("raw bound {raw:.3e} below 0 clamped to 0"));
        (0.0, true)
    } else if raw > 2.0 {
        messages.push(format!("raw bound {raw:.6} above 2 clamped to 2"));
        (2.0, true)
    } else {
        // `+ 0.0` turns a negative zero into zero.
        (raw + 0.0, false)
    }
}

/// `−log₂` of the certified upper bound on the guessing probability.
pub fn min_entropy(task: &CertificationTask) -> Result<CertificationResult> {
    if task.method != Method::MinEntropy {
        return invalid("min_entropy needs method MinEntropy");
    }
    let built = build_guessing_program(task)?;
    let (sol, diag) = solve_certified(&built, &task.solver)?;
    let mut messages = Vec::new();
    let certified = converged(sol.status);
    let entropy_bits;
    let mut guess = None;
    if sol.status == SolveStatus::InfeasibleDetected {
        messages.push("constraints admit no quantum behavior at this level".into());
        entropy_bits = 0.0;
    } else {
        let p = (-diag.certified_minimum).clamp(0.25, 1.0);
        guess = Some(p);
        entropy_bits = -p.log2();
        if !certified {
            messages.push(format!("solver stopped with status {:?}", sol.status));
        }
    }
    let (entropy_bits, clamped) = clamp_entropy(entropy_bits, &mut messages);
    Ok(CertificationResult {
        method: task.method,
        constraint_mode: task.constraints.mode().into(),
        entropy_bits,
        guessing_probability: guess,
        nodes: Vec::new(),
        diagnostics: vec![diag],
        certified,
        clamped,
        messages,
    })
}

fn z_prefixes(task: &CertificationTask) -> Vec<Monomial> {
    let mut out = vec![Monomial::identity()];
    match task.z_basis {
        ZBasis::Target => {
            out.push(Monomial::letter(alice(task.x_star, 0)));
            out.push(Monomial::letter(bob(task.y_star, 0)));
            out.push(Monomial::new([alice(task.x_star, 0), bob(task.y_star, 0)]));
        }
        ZBasis::AllSettings => {
            out.extend((0..task.n_x).map(|x| Monomial::letter(alice(x, 0))));
            out.extend((0..task.n_y).map(|y| Monomial::letter(bob(y, 0))));
            for x in 0..task.n_x {
                for y in 0..task.n_y {
                    out.push(Monomial::new([alice(x, 0), bob(y, 0)]));
                }
            }
        }
    }
    out
}

fn node_basis(task: &CertificationTask, node: usize) -> Result<Vec<Monomial>> {
    let mut extras = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for p in z_prefixes(task) {
                for dagger in [false, true] {
                    extras.push(p.mul(&Monomial::letter(zed(a, b, node, dagger))));
                }
            }
        }
    }
    generate_basis(task.n_x, task.n_y, task.level, &extras)
}

/// `Σ_ab ⟨M_a N_b (Z_ab + Z_ab† + (1−t) Z_ab† Z_ab)⟩ + t ⟨Z_ab Z_ab†⟩`.
pub fn node_objective(task: &CertificationTask, node: usize, t: f64) -> Polynomial {
    let mut obj = Polynomial::zero();
    for a in 0..2 {
        for b in 0..2 {
            let z = Polynomial::letter(zed(a, b, node, false));
            let zd = Polynomial::letter(zed(a, b, node, true));
            let inner = z.add(&zd).add(&zd.mul(&z).scale(1.0 - t));
            obj = obj
                .add(&target_projector(task, a, b).mul(&inner))
                .add(&z.mul(&zd).scale(t));
        }
    }
    obj
}

/// Norm bound on the optimal adversary operators at node `t`.
fn z_norm_bound(t: f64) -> f64 {
    1.5 * (1.0 / t).max(1.0 / (1.0 - t))
}

/// Programs for the von Neumann bound: one per node `i < m` in separate
/// mode, or a single program in joint mode. Each minimizes the node
/// objective(s); in joint mode the objective is already weighted by `c_i`.
pub fn build_bff_program(task: &CertificationTask, q: &QuadratureRule) -> Result<Vec<BuiltProgram>> {
    task.validate()?;
    if q.m() < 2 {
        return invalid("quadrature needs at least 2 nodes");
    }
    let inner = q.m() - 1;
    match task.coupling {
        NodeCoupling::Separate => (0..inner)
            .map(|i| build_node_programs(task, q, &[i], false))
            .collect(),
        NodeCoupling::Joint => Ok(vec![build_node_programs(task, q, &(0..inner).collect::<Vec<_>>(), true)?]),
    }
}

fn build_node_programs(task: &CertificationTask, q: &QuadratureRule, nodes: &[usize], weighted: bool) -> Result<BuiltProgram> {
    let mut table = VarTable::new(0, true, task.hermitian_moments);
    let mut blocks = Vec::new();
    let mut bases = Vec::new();
    for &i in nodes {
        let basis = node_basis(task, i)?;
        let mm = build_moment_matrix(&basis, task.hermitian_moments)?;
        blocks.push(lower_moment_matrix(&mm, &mut table)?);
        bases.push((i, basis));
    }
    let mut problem = SdpProblem::new(table.next_var());
    let block_dims = blocks.iter().map(|b| b.dim).collect();
    problem.blocks = blocks;
    // ‖Z‖ ≤ α gives ⟨p†p Z†Z⟩ ≤ α²⟨p†p⟩ for every basis word p·Z. Without
    // these the Z moments have zero-cost directions of unbounded growth.
    for (i, basis) in &bases {
        let alpha2 = z_norm_bound(q.nodes[*i]).powi(2);
        for u in basis {
            let Some((last, prefix)) = u.letters().split_last() else { continue };
            if !matches!(last, Letter::Z { .. }) {
                continue;
            }
            let p = Monomial::new(prefix.iter().copied());
            let pp = Polynomial::monomial(p.adjoint().mul(&p)).scale(alpha2);
            let uu = Polynomial::monomial(u.adjoint().mul(u)).scale(-1.0);
            let f = polynomial_to_functional(&pp.add(&uu), &table)?;
            problem.inequalities.push(LinearConstraint::new(f.to_pairs(), -f.constant));
        }
    }
    for &i in nodes {
        let t = q.nodes[i];
        let f = polynomial_to_functional(&node_objective(task, i, t), &table)?;
        set_objective(&mut problem, &f, if weighted { q.coeffs[i] } else { 1.0 });
    }
    apply_constraints(&mut problem, &task.constraints, &|p| polynomial_to_functional(p, &table))?;
    // |⟨w⟩| ≤ ‖w‖ ≤ product of the Z norm bounds along the word.
    let var_bounds = table.bounds(problem.num_vars, 1.0, |w| {
        w.letters()
            .iter()
            .map(|l| match l {
                Letter::Z { node, .. } => z_norm_bound(q.nodes[*node as usize]),
                _ => 1.0,
            })
            .product()
    });
    let variables = table.labels(problem.num_vars);
    Ok(BuiltProgram {
        problem,
        var_bounds,
        variables,
        block_dims,
    })
}

/// `Σ_{i<m} c_i (1 + inf_i)`, clamped to `[0, 2]`.
pub fn von_neumann_entropy(task: &CertificationTask) -> Result<CertificationResult> {
    let Method::VonNeumann { nodes } = task.method else {
        return invalid("von_neumann_entropy needs method VonNeumann");
    };
    let q = gauss_radau(nodes)?;
    let programs = build_bff_program(task, &q)?;
    let inner = q.m() - 1;
    let mut diagnostics = Vec::new();
    let mut messages = Vec::new();
    let mut contributions = Vec::new();
    let mut certified = true;
    let mut raw = 0.0;
    let mut infeasible = false;
    for (k, built) in programs.iter().enumerate() {
        let (sol, diag) = solve_certified(built, &task.solver)?;
        certified &= converged(sol.status);
        infeasible |= sol.status == SolveStatus::InfeasibleDetected;
        if !converged(sol.status) {
            messages.push(format!("program {k} stopped with status {:?}", sol.status));
        }
        match task.coupling {
            NodeCoupling::Separate => {
                let c = q.coeffs[k];
                let contribution = c * (1.0 + diag.certified_minimum);
                raw += contribution;
                contributions.push(NodeContribution {
                    node: k,
                    t: q.nodes[k],
                    coeff: c,
                    infimum: Some(diag.certified_minimum),
                    contribution: Some(contribution),
                });
            }
            NodeCoupling::Joint => {
                raw += q.coeffs[..inner].iter().sum::<f64>() + diag.certified_minimum;
                contributions.extend((0..inner).map(|i| NodeContribution {
                    node: i,
                    t: q.nodes[i],
                    coeff: q.coeffs[i],
                    infimum: None,
                    contribution: None,
                }));
            }
        }
        diagnostics.push(diag);
    }
    if infeasible {
        messages.push("constraints admit no quantum behavior at this level".into());
        raw = 0.0;
    }
    let (entropy_bits, clamped) = clamp_entropy(raw, &mut messages);
    Ok(CertificationResult {
        method: task.method,
        constraint_mode: task.constraints.mode().into(),
        entropy_bits,
        guessing_probability: None,
        nodes: contributions,
        diagnostics,
        certified,
        clamped,
        messages,
    })
}

pub fn certify(task: &CertificationTask) -> Result<CertificationResult> {
    match task.method {
        Method::MinEntropy => min_entropy(task),
        Method::VonNeumann { .. } => von_neumann_entropy(task),
    }
}

/// Upper bound on the maximal quantum value of `e` from the normalized NPA
/// relaxation at `level`.
pub fn npa_max_bell_value(e: &BellExpression, level: usize, options: &SolverOptions) -> Result<f64> {
    let basis = generate_basis(e.n_x(), e.n_y(), level, &[])?;
    let mm = build_moment_matrix(&basis, true)?;
    let mut table = VarTable::new(0, true, true);
    let blk = lower_moment_matrix(&mm, &mut table)?;
    let mut problem = SdpProblem::new(table.next_var());
    problem.blocks.push(blk);
    let bell = Constraint::Bell {
        expression: e.clone(),
        value: 0.0,
        exact: false,
    };
    let f = polynomial_to_functional(&bell.polynomial(), &table)?;
    set_objective(&mut problem, &f, -1.0);
    let built = BuiltProgram {
        var_bounds: vec![1.0; problem.num_vars],
        variables: table.labels(problem.num_vars),
        problem,
        block_dims: vec![mm.dim()],
    };
    let (sol, diag) = solve_certified(&built, options)?;
    if !converged(sol.status) {
        return Err(Error::Solver(format!("NPA maximization ended with {:?}: {}", sol.status, sol.message)));
    }
    Ok(-diag.certified_minimum)
}

/// `observed − k·stderr`, the threshold used with finite statistics.
pub fn finite_stat_adjust(observed: f64, stderr: f64, k: f64) -> Result<f64> {
    if !(stderr >= 0.0) || !observed.is_finite() || !k.is_finite() {
        return invalid("finite-statistics adjustment needs finite values and stderr ≥ 0");
    }
    Ok(observed - k * stderr)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub events_per_second: f64,
    pub von_neumann_bits_per_second: Option<f64>,
    pub min_entropy_bits_per_second: Option<f64>,
}

/// Bits per second for whichever entropy kinds are available.
pub fn rate_report(von_neumann_bits: Option<f64>, min_entropy_bits: Option<f64>, events_per_second: f64) -> Result<RateReport> {
    if !(events_per_second > 0.0) || !events_per_second.is_finite() {
        return invalid("event rate must be positive");
    }
    Ok(RateReport {
        events_per_second,
        von_neumann_bits_per_second: von_neumann_bits.map(|h| h * events_per_second),
        min_entropy_bits_per_second: min_entropy_bits.map(|h| h * events_per_second),
    })
}

/// Serializable task description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    /// `"I"`, `"J"` or `"modCHSH"`.
    pub family: String,
    #[serde(default)]
    pub parameter: Option<f64>,
    /// `"bell"` or `"correlators"`.
    pub mode: String,
    /// Bell threshold in `"bell"` mode.
    #[serde(default)]
    pub value: Option<f64>,
    /// Correlator values keyed `"x,y"` in `"correlators"` mode.
    #[serde(default)]
    pub values: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub stderr: f64,
    #[serde(default)]
    pub k: f64,
    /// `"minentropy"` or `"vonneumann"`.
    pub method: String,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_level")]
    pub basis_level: usize,
    #[serde(default)]
    pub z_basis: ZBasis,
    #[serde(default)]
    pub coupling: NodeCoupling,
}

fn default_nodes() -> usize {
    6
}

fn default_level() -> usize {
    2
}

pub fn parse_family(name: &str, parameter: Option<f64>) -> Result<BellFamily> {
    let need = || parameter.ok_or_else(|| Error::Validation(format!("family {name} needs a parameter")));
    match name {
        "I" | "i" | "IDelta" | "delta" => Ok(BellFamily::IDelta(need()?)),
        "J" | "j" | "JGamma" | "gamma" => Ok(BellFamily::JGamma(need()?)),
        "modCHSH" | "modchsh" | "ModChsh" => Ok(BellFamily::ModChsh),
        other => invalid(format!("unknown Bell family {other:?}")),
    }
}

pub fn parse_method(name: &str, nodes: usize) -> Result<Method> {
    match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "minentropy" | "hmin" => Ok(Method::MinEntropy),
        "vonneumann" | "vn" => Ok(Method::VonNeumann { nodes }),
        other => invalid(format!("unknown method {other:?}")),
    }
}

impl TaskSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_task(&self) -> Result<CertificationTask> {
        let family = parse_family(&self.family, self.parameter)?;
        let expression = make_bell(family)?;
        let constraints = match self.mode.as_str() {
            "bell" => {
                let v = self
                    .value
                    .ok_or_else(|| Error::Validation("bell mode needs a value".into()))?;
                ConstraintSet::bell_geq(expression, finite_stat_adjust(v, self.stderr, self.k)?)
            }
            "correlators" => {
                let values = self
                    .values
                    .as_ref()
                    .ok_or_else(|| Error::Validation("correlators mode needs values".into()))?;
                let mut set = CorrelatorSet::new();
                for (key, v) in values {
                    let (x, y) = crate::qmodel::parse_pair_key(key)?;
                    set.insert(x, y, *v, None)?;
                }
                ConstraintSet::correlators_ineq(&expression, &set)?
            }
            other => return invalid(format!("unknown constraint mode {other:?}")),
        };
        let mut task = CertificationTask::new(constraints, parse_method(&self.method, self.nodes)?)?;
        task.level = self.basis_level;
        task.z_basis = self.z_basis;
        task.coupling = self.coupling;
        task.validate()?;
        Ok(task)
    }
}

impl CertificationResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
