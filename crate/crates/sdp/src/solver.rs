//! Infeasible-start primal-dual path following with Nesterov-Todd scaling
//! and Mehrotra predictor-corrector steps.
//!
//! The y-side of [`SdpProblem`] is called primal here (its objective is the
//! value being minimized). The multiplier side
//!
//! ```text
//! maximize    -Σ_k ⟨F_k0, X_k⟩ + bᵀλ
//! subject to  Σ_k ⟨F_ki, X_k⟩ + (Aᵀλ)_i = c_i,   X_k ⪰ 0
//! ```
//!
//! is the dual. Any dual-feasible `(X, λ)` gives a lower bound on the primal
//! optimum, which is what callers needing a certified bound should consume.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::SdpError;
use crate::factor::DenseLlt;
use crate::problem::{LmiBlock, SdpProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative duality gap target.
    pub gap_tol: f64,
    /// Relative primal and dual infeasibility target.
    pub feas_tol: f64,
    pub max_iterations: usize,
    /// Fraction of the step to the cone boundary that is actually taken.
    pub step_fraction: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iterations: 200,
            step_fraction: 0.98,
            verbose: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SdpError> {
        if !(self.gap_tol > 0.0 && self.feas_tol > 0.0) {
            return Err(SdpError::Options("tolerances must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(SdpError::Options("step fraction must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 {
            return Err(SdpError::Options("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Threshold below which a stalled run is still reported near-optimal.
    fn near_tol(&self) -> f64 {
        (1e4 * self.gap_tol.max(self.feas_tol)).max(1e-6)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    InfeasibleDetected,
    IterationLimit,
    NumericalFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    /// Multipliers of the equality constraints.
    pub eq_multipliers: Vec<f64>,
    /// Dual matrices `X_k`: one per problem block followed by one 1×1 block
    /// per linear inequality.
    pub dual_blocks: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `primal_objective - dual_objective`.
    pub gap: f64,
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    /// Relative gap after every iteration.
    pub gap_history: Vec<f64>,
    pub message: String,
}

impl SdpSolution {
    pub fn max_infeasibility(&self) -> f64 {
        self.primal_infeasibility.max(self.dual_infeasibility)
    }

    /// Multipliers of the linear inequalities (`g·y ≥ h`), in problem order.
    pub fn ineq_multipliers(&self, p: &SdpProblem) -> Vec<f64> {
        self.dual_blocks[p.blocks.len()..]
            .iter()
            .map(|x| x[(0, 0)])
            .collect()
    }
}

/// Per-iteration data of one cone block.
struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
}

struct Direction {
    dy: DVector<f64>,
    dlam: DVector<f64>,
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
}

struct Iterate {
    y: DVector<f64>,
    lam: DVector<f64>,
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
}

#[derive(Clone, Copy)]
struct Metrics {
    pobj: f64,
    dobj: f64,
    relgap: f64,
    pinf: f64,
    dinf: f64,
}

impl Metrics {
    fn merit(&self) -> f64 {
        self.relgap.max(self.pinf).max(self.dinf)
    }
}

pub fn solve(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    options.validate()?;
    Solver::new(problem, options).run()
}

struct Solver<'a> {
    problem: &'a SdpProblem,
    options: &'a SolverOptions,
    blocks: Vec<LmiBlock>,
    c: DVector<f64>,
    a_eq: DMatrix<f64>,
    b_eq: DVector<f64>,
    norm_f0: f64,
    norm_b: f64,
    norm_c: f64,
    cone_dim: usize,
    /// Cholesky of `𝒜𝒜*` over the variables that appear in some block.
    gram: Option<(DenseLlt, Vec<bool>)>,
}

impl<'a> Solver<'a> {
    fn new(problem: &'a SdpProblem, options: &'a SolverOptions) -> Self {
        let blocks = problem.cone_blocks();
        let n = problem.num_vars;
        let p = problem.equalities.len();
        let mut a_eq = DMatrix::zeros(p, n);
        let mut b_eq = DVector::zeros(p);
        for (j, row) in problem.equalities.iter().enumerate() {
            for &(i, a) in &row.coeffs {
                a_eq[(j, i)] += a;
            }
            b_eq[j] = row.rhs;
        }
        let c = DVector::from_column_slice(&problem.objective);
        let norm_f0 = blocks
            .iter()
            .map(|b| b.constant.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt();
        let cone_dim = blocks.iter().map(|b| b.dim).sum();
        let gram = gram_factor(&blocks, n);
        Self {
            problem,
            options,
            norm_b: b_eq.norm(),
            norm_c: c.norm(),
            blocks,
            c,
            a_eq,
            b_eq,
            norm_f0,
            cone_dim,
            gram,
        }
    }

    fn initial_point(&self) -> Iterate {
        let n = self.problem.num_vars;
        let mut x = Vec::with_capacity(self.blocks.len());
        let mut s = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let nk = b.dim as f64;
            let max_f = b
                .terms
                .iter()
                .map(|(_, f)| f.frobenius_norm())
                .fold(b.constant.frobenius_norm(), f64::max);
            let ratio = b
                .terms
                .iter()
                .map(|(i, f)| (1.0 + self.c[*i].abs()) / (1.0 + f.frobenius_norm()))
                .fold(0.0, f64::max);
            let xi = 10f64.max(nk.sqrt()).max(nk * ratio);
            let eta = 10f64.max(nk.sqrt()).max(max_f);
            x.push(DMatrix::identity(b.dim, b.dim) * xi);
            s.push(DMatrix::identity(b.dim, b.dim) * eta);
        }
        Iterate {
            y: DVector::zeros(n),
            lam: DVector::zeros(self.problem.equalities.len()),
            x,
            s,
        }
    }

    /// `(𝒜*(X))_i = Σ_k ⟨F_ki, X_k⟩`.
    fn adjoint(&self, mats: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.problem.num_vars);
        for (b, m) in self.blocks.iter().zip(mats) {
            for (i, f) in &b.terms {
                out[*i] += f.inner(m);
            }
        }
        out
    }

    fn lmi_residuals(&self, it: &Iterate) -> Vec<DMatrix<f64>> {
        let y = it.y.as_slice();
        self.blocks
            .iter()
            .zip(&it.s)
            .map(|(b, s)| b.evaluate(y) - s)
            .collect()
    }

    fn metrics(&self, it: &Iterate, r_s: &[DMatrix<f64>], r_c: &DVector<f64>, r_a: &DVector<f64>) -> Metrics {
        let off = self.problem.objective_offset;
        let pobj = self.c.dot(&it.y) + off;
        let f0x: f64 = self
            .blocks
            .iter()
            .zip(&it.x)
            .map(|(b, x)| b.constant.inner(x))
            .sum();
        let dobj = -f0x + self.b_eq.dot(&it.lam) + off;
        let rs_norm = r_s.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        let pinf = (rs_norm / (1.0 + self.norm_f0)).max(r_a.norm() / (1.0 + self.norm_b));
        let dinf = r_c.norm() / (1.0 + self.norm_c);
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        Metrics {
            pobj,
            dobj,
            relgap,
            pinf,
            dinf,
        }
    }

    fn run(&self) -> Result<SdpSolution, SdpError> {
        let opts = self.options;
        let mut it = self.initial_point();
        let mut history = Vec::new();
        let mut best: Option<(Metrics, Iterate)> = None;
        let mut status = SolveStatus::IterationLimit;
        let mut message = String::from("iteration limit reached");
        let mut iterations = 0;
        let mut stalls = 0;

        for iter in 0..=opts.max_iterations {
            let r_s = self.lmi_residuals(&it);
            let r_c = &self.c - self.adjoint(&it.x) - self.a_eq.transpose() * &it.lam;
            let r_a = &self.b_eq - &self.a_eq * &it.y;
            let m = self.metrics(&it, &r_s, &r_c, &r_a);
            if iter > 0 {
                history.push(m.relgap);
            }
            iterations = iter;
            if opts.verbose {
                eprintln!(
                    "{iter:4} pobj {:+.10e} dobj {:+.10e} gap {:.2e} pinf {:.2e} dinf {:.2e}",
                    m.pobj, m.dobj, m.relgap, m.pinf, m.dinf
                );
            }
            if best.as_ref().map_or(true, |(bm, _)| m.merit() <= bm.merit()) {
                best = Some((m, clone_iterate(&it)));
            }
            if m.relgap <= opts.gap_tol && m.pinf <= opts.feas_tol && m.dinf <= opts.feas_tol {
                status = SolveStatus::Optimal;
                message = "converged".into();
                best = Some((m, it));
                break;
            }
            if let Some(msg) = self.infeasibility_certificate(&it, &r_s, &r_c, &r_a) {
                status = SolveStatus::InfeasibleDetected;
                message = msg;
                best = Some((m, it));
                break;
            }
            if iter == opts.max_iterations {
                break;
            }

            let step = match self.step(&mut it, &r_s, &r_c, &r_a) {
                Ok(alpha) => alpha,
                Err(msg) => {
                    status = SolveStatus::NumericalFailure;
                    message = msg;
                    break;
                }
            };
            if step < 1e-9 {
                stalls += 1;
                if stalls >= 3 {
                    status = SolveStatus::NumericalFailure;
                    message = "step length collapsed".into();
                    break;
                }
            } else {
                stalls = 0;
            }
        }

        let (m, it) = best.expect("at least one iterate is evaluated");
        if status != SolveStatus::Optimal && status != SolveStatus::InfeasibleDetected {
            let near = opts.near_tol();
            if m.relgap <= near && m.pinf <= near && m.dinf <= near {
                message = format!("{message}; best iterate within {near:.0e}");
                status = SolveStatus::NearOptimal;
            }
        }
        Ok(SdpSolution {
            status,
            y: it.y.as_slice().to_vec(),
            eq_multipliers: it.lam.as_slice().to_vec(),
            dual_blocks: it.x,
            primal_objective: m.pobj,
            dual_objective: m.dobj,
            gap: m.pobj - m.dobj,
            relative_gap: m.relgap,
            primal_infeasibility: m.pinf,
            dual_infeasibility: m.dinf,
            iterations,
            gap_history: history,
            message,
        })
    }

    /// Farkas-type certificates, checked on the current iterate.
    fn infeasibility_certificate(
        &self,
        it: &Iterate,
        r_s: &[DMatrix<f64>],
        r_c: &DVector<f64>,
        r_a: &DVector<f64>,
    ) -> Option<String> {
        let tol = self.options.feas_tol;
        // Primal infeasible: 𝒜*(X) + Aᵀλ = 0 with -⟨F0,X⟩ + bᵀλ > 0.
        let f0x: f64 = self
            .blocks
            .iter()
            .zip(&it.x)
            .map(|(b, x)| b.constant.inner(x))
            .sum();
        let t = -f0x + self.b_eq.dot(&it.lam);
        if t > 0.0 {
            let lhs = (&self.c - r_c).norm();
            let xnorm = it.x.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if lhs / t < tol && xnorm > 1e6 {
                return Some("primal infeasible: dual ray found".into());
            }
        }
        // Dual infeasible: Σ y_i F_i ⪰ 0, A y = 0 with cᵀy < 0.
        let cy = self.c.dot(&it.y);
        if cy < 0.0 {
            let mut res = 0.0;
            for (b, (s, r)) in self.blocks.iter().zip(it.s.iter().zip(r_s)) {
                let mut m = s + r;
                b.constant.add_to(&mut m, -1.0);
                res += m.norm_squared() - s.norm_squared();
            }
            let ay = (&self.b_eq - r_a).norm();
            let ynorm = it.y.amax();
            if res.max(0.0).sqrt() / -cy < tol && ay / -cy < tol && ynorm > 1e6 {
                return Some("dual infeasible: primal objective unbounded".into());
            }
        }
        None
    }

    fn scalings(&self, it: &Iterate) -> Result<Vec<Scaling>, String> {
        let mut out = Vec::with_capacity(self.blocks.len());
        for (k, (x, s)) in it.x.iter().zip(&it.s).enumerate() {
            let lx = Cholesky::new(x.clone())
                .ok_or_else(|| format!("X block {k} lost positive definiteness"))?
                .unpack();
            let ls = Cholesky::new(s.clone())
                .ok_or_else(|| format!("S block {k} lost positive definiteness"))?
                .unpack();
            let prod = ls.transpose() * &lx;
            let svd = prod.svd(true, true);
            let u_v_t = svd.v_t.ok_or("svd failed")?;
            let d = svd.singular_values;
            if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(format!("degenerate scaling in block {k}"));
            }
            let v = u_v_t.transpose();
            let mut g = &lx * &v;
            let mut g_inv_left = v.transpose();
            for j in 0..d.len() {
                let sq = d[j].sqrt();
                g.column_mut(j).scale_mut(1.0 / sq);
                g_inv_left.row_mut(j).scale_mut(sq);
            }
            let lx_inv = lx
                .solve_lower_triangular(&DMatrix::identity(x.nrows(), x.nrows()))
                .ok_or("singular Cholesky factor")?;
            let g_inv = g_inv_left * lx_inv;
            let w = &g * g.transpose();
            out.push(Scaling { g, g_inv, w, d });
        }
        Ok(out)
    }

    fn schur(&self, sc: &[Scaling]) -> DMatrix<f64> {
        let n = self.problem.num_vars;
        let mut h = DMatrix::zeros(n, n);
        for (b, s) in self.blocks.iter().zip(sc) {
            let dim = b.dim;
            let mut t = DMatrix::zeros(dim, dim);
            for (jt, (j, fj)) in b.terms.iter().enumerate() {
                t.fill(0.0);
                for &(p, q, v) in &fj.entries {
                    let wp = s.w.column(p);
                    let wq = s.w.column(q);
                    t.ger(v, &wp, &wq, 1.0);
                    if p != q {
                        t.ger(v, &wq, &wp, 1.0);
                    }
                }
                for (i, fi) in &b.terms[..=jt] {
                    let val = fi.inner(&t);
                    h[(*i, *j)] += val;
                    if i != j {
                        h[(*j, *i)] += val;
                    }
                }
            }
        }
        h
    }

    fn step(
        &self,
        it: &mut Iterate,
        r_s: &[DMatrix<f64>],
        r_c: &DVector<f64>,
        r_a: &DVector<f64>,
    ) -> Result<f64, String> {
        let sc = self.scalings(it)?;
        let h = self.schur(&sc);
        let kkt = KktSolver::new(h, &self.a_eq)?;
        let w_rs_w: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(r_s)
            .map(|(s, r)| &s.w * r * &s.w)
            .collect();
        let mu = it
            .x
            .iter()
            .zip(&it.s)
            .map(|(x, s)| x.dot(s))
            .sum::<f64>()
            / self.cone_dim as f64;

        // Predictor: target V∘(dX̃ + dS̃) = -V².
        let rhs_aff: Vec<DMatrix<f64>> = sc
            .iter()
            .map(|s| DMatrix::from_diagonal(&s.d.map(|v| -v * v)))
            .collect();
        let aff = self.direction(&sc, &kkt, &w_rs_w, &rhs_aff, r_s, r_c, r_a)?;
        let ap = max_step(&it.x, &aff.dx).min(1.0);
        let ad = max_step(&it.s, &aff.ds).min(1.0);
        let mu_aff = it
            .x
            .iter()
            .zip(&aff.dx)
            .zip(it.s.iter().zip(&aff.ds))
            .map(|((x, dx), (s, ds))| (x + dx * ap).dot(&(s + ds * ad)))
            .sum::<f64>()
            / self.cone_dim as f64;
        let sigma = if mu > 0.0 {
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // Corrector with the second-order Mehrotra term.
        let rhs: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(aff.dx.iter().zip(&aff.ds))
            .map(|(s, (dx, ds))| {
                let dxt = &s.g_inv * dx * s.g_inv.transpose();
                let dst = s.g.transpose() * ds * &s.g;
                let prod = &dxt * &dst;
                let jordan = (&prod + prod.transpose()) * 0.5;
                let mut r = -jordan;
                for i in 0..s.d.len() {
                    r[(i, i)] += sigma * mu - s.d[i] * s.d[i];
                }
                r
            })
            .collect();
        let dir = self.direction(&sc, &kkt, &w_rs_w, &rhs, r_s, r_c, r_a)?;
        let frac = self.options.step_fraction;
        let ap = (frac * max_step(&it.x, &dir.dx)).min(1.0);
        let ad = (frac * max_step(&it.s, &dir.ds)).min(1.0);

        for (x, dx) in it.x.iter_mut().zip(&dir.dx) {
            *x += dx * ap;
            symmetrize(x);
        }
        it.lam += &dir.dlam * ap;
        it.y += &dir.dy * ad;
        for (s, ds) in it.s.iter_mut().zip(&dir.ds) {
            *s += ds * ad;
            symmetrize(s);
        }
        Ok(ap.min(ad))
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        sc: &[Scaling],
        kkt: &KktSolver,
        w_rs_w: &[DMatrix<f64>],
        rhs: &[DMatrix<f64>],
        r_s: &[DMatrix<f64>],
        r_c: &DVector<f64>,
        r_a: &DVector<f64>,
    ) -> Result<Direction, String> {
        // Solve the scaled Lyapunov equation D∘M = R (D diagonal).
        let gdg: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(rhs)
            .map(|(s, r)| {
                let mut m = r.clone();
                let d = &s.d;
                for j in 0..d.len() {
                    for i in 0..d.len() {
                        m[(i, j)] *= 2.0 / (d[i] + d[j]);
                    }
                }
                &s.g * m * s.g.transpose()
            })
            .collect();
        let p: Vec<DMatrix<f64>> = gdg.iter().zip(w_rs_w).map(|(a, b)| a - b).collect();
        let g = self.adjoint(&p) - r_c;
        let (dy, dlam) = kkt.solve(&g, r_a, &self.a_eq)?;
        let y = dy.as_slice();
        let ds: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .zip(r_s)
            .map(|(b, r)| {
                let mut m = r.clone();
                for (i, f) in &b.terms {
                    f.add_to(&mut m, y[*i]);
                }
                m
            })
            .collect();
        let mut dx: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(gdg)
            .zip(&ds)
            .map(|((s, a), d)| {
                let mut m = a - &s.w * d * &s.w;
                symmetrize(&mut m);
                m
            })
            .collect();
        // Project the rounding error out of 𝒜*(dX) + Aᵀdλ = r_c. Near the
        // optimum the Schur system is too ill conditioned for the dual
        // residual to keep shrinking otherwise.
        if let Some((chol, active)) = &self.gram {
            let mut e = r_c - self.adjoint(&dx) - self.a_eq.transpose() * &dlam;
            for (v, on) in e.iter_mut().zip(active) {
                if !on {
                    *v = 0.0;
                }
            }
            let z = chol.solve(&e);
            for (b, m) in self.blocks.iter().zip(dx.iter_mut()) {
                for (i, f) in &b.terms {
                    f.add_to(m, z[*i]);
                }
            }
        }
        Ok(Direction { dy, dlam, dx, ds })
    }
}

/// Solves `H dy - Aᵀ dλ = g`, `A dy = r` through the Schur complement of `H`.
struct KktSolver {
    h: DMatrix<f64>,
    chol: DenseLlt,
    /// Cholesky of `A H⁻¹ Aᵀ`, absent without equalities.
    eq: Option<(DMatrix<f64>, Cholesky<f64, nalgebra::Dyn>)>,
}

impl KktSolver {
    fn new(mut h: DMatrix<f64>, a: &DMatrix<f64>) -> Result<Self, String> {
        let n = h.nrows();
        let original = h.clone();
        let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = 0.0;
        let chol = loop {
            if let Some(c) = DenseLlt::new(&h) {
                break c;
            }
            reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
            if reg > 1e-4 * scale {
                return Err("Schur complement is not positive definite".into());
            }
            for i in 0..n {
                h[(i, i)] += reg;
            }
        };
        let eq = if a.nrows() > 0 {
            let hinv_at = chol.solve_mat(&a.transpose());
            let m = a * &hinv_at;
            let mc = Cholesky::new(m).ok_or("equality constraints are linearly dependent")?;
            Some((hinv_at, mc))
        } else {
            None
        };
        Ok(Self { h: original, chol, eq })
    }

    fn solve(
        &self,
        g: &DVector<f64>,
        r: &DVector<f64>,
        a: &DMatrix<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), String> {
        let mut hg = self.chol.solve(g);
        // Iterative refinement: H is badly conditioned near the optimum.
        for _ in 0..2 {
            let res = g - &self.h * &hg;
            hg += self.chol.solve(&res);
        }
        match &self.eq {
            None => Ok((hg, DVector::zeros(0))),
            Some((hinv_at, mc)) => {
                let dlam = mc.solve(&(r - a * &hg));
                let dy = hg + hinv_at * &dlam;
                Ok((dy, dlam))
            }
        }
    }
}

fn gram_factor(blocks: &[LmiBlock], n: usize) -> Option<(DenseLlt, Vec<bool>)> {
    let mut g = DMatrix::zeros(n, n);
    for b in blocks {
        let mut at: HashMap<(usize, usize), Vec<(usize, f64)>> = HashMap::new();
        for (i, f) in &b.terms {
            for &(r, c, v) in &f.entries {
                at.entry((r, c)).or_default().push((*i, v));
            }
        }
        for ((r, c), list) in at {
            let w = if r == c { 1.0 } else { 2.0 };
            for &(i, vi) in &list {
                for &(j, vj) in &list {
                    g[(i, j)] += w * vi * vj;
                }
            }
        }
    }
    let active: Vec<bool> = (0..n).map(|i| g[(i, i)] > 0.0).collect();
    for i in 0..n {
        if !active[i] {
            g[(i, i)] = 1.0;
        }
    }
    DenseLlt::new(&g).map(|c| (c, active))
}

fn clone_iterate(it: &Iterate) -> Iterate {
    Iterate {
        y: it.y.clone(),
        lam: it.lam.clone(),
        x: it.x.clone(),
        s: it.s.clone(),
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest `α` with `M + α dM ⪰ 0` for every block (may be infinite).
fn max_step(mats: &[DMatrix<f64>], dirs: &[DMatrix<f64>]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (m, d) in mats.iter().zip(dirs) {
        if m.nrows() == 1 {
            if d[(0, 0)] < 0.0 {
                alpha = alpha.min(-m[(0, 0)] / d[(0, 0)]);
            }
            continue;
        }
        let Some(chol) = Cholesky::new(m.clone()) else {
            return 0.0;
        };
        let l = chol.l();
        let Some(tmp) = l.solve_lower_triangular(d) else {
            return 0.0;
        };
        let Some(mut inner) = l.solve_lower_triangular(&tmp.transpose()) else {
            return 0.0;
        };
        symmetrize(&mut inner);
        let lmin = SymmetricEigen::new(inner)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}
