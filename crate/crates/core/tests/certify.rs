use std::f64::consts::{LN_2, PI};

use dicert::certify::*;
use dicert::ncalg::{Letter, Monomial};
use dicert::qmodel::*;
use dicert::Error;
use dicert_sdp::{solve, SolveStatus};
use nalgebra::{Complex, DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex<f64>;

fn bell_task(family: BellFamily, value: f64, method: Method) -> CertificationTask {
    CertificationTask::new(ConstraintSet::bell_geq(make_bell(family).unwrap(), value), method).unwrap()
}

fn entropy(task: &CertificationTask) -> f64 {
    let r = certify(task).unwrap();
    assert!(r.certified, "{:?}", r.messages);
    r.entropy_bits
}

#[test]
fn radau_rules_integrate_polynomials_exactly() {
    for m in 2..=12 {
        let q = gauss_radau(m).unwrap();
        assert_eq!(q.nodes[m - 1], 1.0);
        assert!(q.weights.iter().all(|w| *w > 0.0));
        assert!(q.nodes.windows(2).all(|w| w[0] < w[1]) && q.nodes[0] > 0.0);
        for k in 0..=(2 * m - 2) {
            let sum: f64 = q.nodes.iter().zip(&q.weights).map(|(t, w)| w * t.powi(k as i32)).sum();
            assert!((sum - 1.0 / (k as f64 + 1.0)).abs() < 1e-12, "m={m} k={k}");
        }
        for i in 0..m {
            assert!((q.coeffs[i] - q.weights[i] / (q.nodes[i] * LN_2)).abs() < 1e-12);
        }
    }
    let q = gauss_radau(2).unwrap();
    assert_eq!(q.nodes[0], 1.0 / 3.0);
    assert_eq!(q.weights, [0.75, 0.25]);
    assert!(gauss_radau(1).is_err());
}

/// At a self-testing point Eve is decoupled and every `p(ab)` is ¼, so
/// node `t` contributes `c·3t/(1+3t)` with scalar `Z = −1/(1+3t)`.
fn decoupled_bound(m: usize) -> f64 {
    let q = gauss_radau(m).unwrap();
    (0..m - 1).map(|i| q.coeffs[i] * 3.0 * q.nodes[i] / (1.0 + 3.0 * q.nodes[i])).sum()
}

#[test]
fn von_neumann_at_tsirelson_matches_decoupled_adversary() {
    assert!((decoupled_bound(2) - 9.0 / (8.0 * LN_2)).abs() < 1e-12);
    let f = BellFamily::IDelta(0.45);
    let q = tsirelson_bound(&make_bell(f).unwrap()).unwrap();
    for m in [2, 4] {
        let mut t = bell_task(f, q, Method::VonNeumann { nodes: m });
        t.z_basis = ZBasis::Target;
        let h = entropy(&t);
        assert!((h - decoupled_bound(m)).abs() < 1e-3, "m={m}: {h} vs {}", decoupled_bound(m));
    }
}

#[test]
fn unconstrained_bounds_are_zero() {
    let t = CertificationTask {
        n_x: 2,
        n_y: 2,
        ..CertificationTask::new(ConstraintSet::none(), Method::MinEntropy).unwrap()
    };
    assert!(entropy(&t).abs() < 1e-6);
    let mut v = t.clone();
    v.method = Method::VonNeumann { nodes: 3 };
    v.z_basis = ZBasis::Target;
    let r = certify(&v).unwrap();
    assert!(r.entropy_bits.abs() < 1e-6, "{r:?}");
}

#[test]
fn min_entropy_grows_with_violation() {
    let f = BellFamily::IDelta(0.5);
    let mut last = -1.0;
    for v in [5.03, 5.08, 5.12, 5.16, 5.19, 5.21] {
        let h = entropy(&bell_task(f, v, Method::MinEntropy));
        assert!(h >= last - 1e-6, "{v}: {h} < {last}");
        last = h;
    }
}

#[test]
fn von_neumann_grows_with_violation() {
    let f = BellFamily::JGamma(PI / 12.0);
    let mut last = -1.0;
    for v in [2.5, 2.7, 2.8] {
        let mut t = bell_task(f, v, Method::VonNeumann { nodes: 3 });
        t.z_basis = ZBasis::Target;
        let h = entropy(&t);
        assert!(h >= last - 1e-6, "{v}: {h} < {last}");
        last = h;
    }
}

#[test]
fn npa_maximum_equals_tsirelson_bound() {
    let families = [
        BellFamily::IDelta(0.52),
        BellFamily::IDelta(0.3),
        BellFamily::JGamma(0.0),
        BellFamily::JGamma(PI / 24.0),
        BellFamily::JGamma(PI / 12.0),
        BellFamily::ModChsh,
    ];
    for f in families {
        let e = make_bell(f).unwrap();
        let npa = npa_max_bell_value(&e, 2, &Default::default()).unwrap();
        let q = tsirelson_bound(&e).unwrap();
        assert!((npa - q).abs() < 1e-5, "{f:?}: {npa} vs {q}");
    }
    let q = tsirelson_bound(&make_bell(BellFamily::ModChsh).unwrap()).unwrap();
    assert!((q - (1.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
}

#[test]
fn infeasible_thresholds_give_zero() {
    let f = BellFamily::IDelta(0.5);
    let t = bell_task(f, 5.5, Method::MinEntropy);
    let r = certify(&t).unwrap();
    assert_eq!(r.entropy_bits, 0.0);
    assert!(!r.messages.is_empty());
}

#[test]
fn min_entropy_is_below_von_neumann() {
    let t = bell_task(BellFamily::JGamma(PI / 12.0), 2.811, Method::MinEntropy);
    let hmin = entropy(&t);
    let mut v = t.clone();
    v.method = Method::VonNeumann { nodes: 6 };
    let hvn = entropy(&v);
    assert!(hmin <= hvn + 1e-4, "{hmin} > {hvn}");
}

fn eta_scaled(f: BellFamily, value: f64) -> (BellExpression, CorrelatorSet) {
    let e = make_bell(f).unwrap();
    let eta = value / tsirelson_bound(&e).unwrap();
    (e, simulate_correlators(&optimal_angles(f).unwrap(), eta).unwrap())
}

#[test]
fn correlator_constraints_are_at_least_as_strong() {
    let f = BellFamily::IDelta(0.45);
    let (e, c) = eta_scaled(f, 5.366);
    let mut bell = bell_task(f, 5.366, Method::VonNeumann { nodes: 6 });
    bell.z_basis = ZBasis::Target;
    let mut cor = bell.clone();
    cor.constraints = ConstraintSet::correlators_ineq(&e, &c).unwrap();
    assert_eq!(cor.constraints.mode(), "correlators-ineq");
    let (hb, hc) = (entropy(&bell), entropy(&cor));
    assert!(hc >= hb - 1e-3, "{hc} < {hb}");
    // Same for the guessing probability.
    let mut bm = bell.clone();
    bm.method = Method::MinEntropy;
    let mut cm = cor.clone();
    cm.method = Method::MinEntropy;
    assert!(entropy(&cm) >= entropy(&bm) - 1e-6);
}

#[test]
fn eight_nodes_do_not_lower_the_bound() {
    let mut t = bell_task(BellFamily::IDelta(0.5), 5.187, Method::VonNeumann { nodes: 6 });
    let h6 = entropy(&t);
    t.method = Method::VonNeumann { nodes: 8 };
    let h8 = entropy(&t);
    assert!(h8 >= h6 - 1e-3, "{h8} < {h6}");
}

#[test]
fn joint_program_is_at_least_the_sum_of_separate_ones() {
    let mut t = bell_task(BellFamily::IDelta(0.45), 5.3, Method::VonNeumann { nodes: 3 });
    t.z_basis = ZBasis::Target;
    let separate = certify(&t).unwrap();
    t.coupling = NodeCoupling::Joint;
    let joint = certify(&t).unwrap();
    assert!(joint.certified);
    assert_eq!(joint.diagnostics.len(), 1);
    assert_eq!(separate.diagnostics.len(), 2);
    assert!(joint.entropy_bits >= separate.entropy_bits - 1e-4);
}

/// Operators of `ρ_AB ⊗ σ_E` on C² ⊗ C² ⊗ C².
struct Adversary {
    alice: Vec<DMatrix<C>>,
    bob: Vec<DMatrix<C>>,
    z: Vec<DMatrix<C>>,
    rho: DMatrix<C>,
}

impl Adversary {
    fn new(state: &TwoQubitState, angles: &AngleSet, alpha: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id2 = DMatrix::<C>::identity(2, 2);
        let (a, b) = angles.observables();
        let mut random = |n: usize| DMatrix::from_fn(n, n, |_, _| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let g = random(2);
        let sigma = &g * g.adjoint();
        let sigma = &sigma / sigma.trace();
        let z = (0..4)
            .map(|_| {
                let m = random(2);
                let norm = m.clone().svd(false, false).singular_values.max();
                id2.kronecker(&id2).kronecker(&(m * C::new(0.9 * alpha / norm, 0.0)))
            })
            .collect();
        Adversary {
            alice: a.iter().map(|o| o.projector(0).kronecker(&id2).kronecker(&id2)).collect(),
            bob: b.iter().map(|o| id2.kronecker(&o.projector(0)).kronecker(&id2)).collect(),
            z,
            rho: state.density().kronecker(&sigma),
        }
    }

    fn moment(&self, w: &Monomial) -> C {
        let id = DMatrix::<C>::identity(8, 8);
        let op = w.letters().iter().fold(id.clone(), |acc, l| {
            let m = match *l {
                Letter::A { x, a } => {
                    let p = &self.alice[x as usize];
                    if a == 0 { p.clone() } else { &id - p }
                }
                Letter::B { y, b } => {
                    let p = &self.bob[y as usize];
                    if b == 0 { p.clone() } else { &id - p }
                }
                Letter::Z { a, b, dagger, .. } => {
                    let z = &self.z[(2 * a + b) as usize];
                    if dagger { z.adjoint() } else { z.clone() }
                }
            };
            acc * m
        });
        (&self.rho * op).trace()
    }
}

#[test]
fn explicit_adversaries_are_feasible_and_never_beat_the_relaxation() {
    let f = BellFamily::IDelta(0.45);
    let angles = optimal_angles(f).unwrap();
    let state = bell_state_phi_plus().with_white_noise(0.97).unwrap();
    let (a, b) = angles.observables();
    let value = bell_value(&correlators(&behavior(&state, &a, &b).unwrap()), &make_bell(f).unwrap())
        .unwrap()
        .value;
    let mut task = bell_task(f, value - 1e-9, Method::VonNeumann { nodes: 4 });
    task.z_basis = ZBasis::Target;
    let q = gauss_radau(4).unwrap();
    let programs = build_bff_program(&task, &q).unwrap();
    for (node, built) in programs.iter().enumerate() {
        let t = q.nodes[node];
        let alpha = 1.5 * (1.0 / t).max(1.0 / (1.0 - t));
        let p = &built.problem;
        let sol = solve(p, &task.solver).unwrap();
        assert!(matches!(sol.status, SolveStatus::Optimal | SolveStatus::NearOptimal));
        let minimum = dicert_sdp::verify(p, &sol).certified_lower_bound_with(&built.var_bounds);
        for seed in 0..5 {
            let model = Adversary::new(&state, &angles, alpha, 100 * node as u64 + seed);
            let y: Vec<f64> = built
                .variables
                .iter()
                .map(|l| {
                    let (w, imag) = l.as_ref().expect("every variable is a moment");
                    let m = model.moment(w);
                    if *imag { m.im } else { m.re }
                })
                .collect();
            for blk in &p.blocks {
                let min = SymmetricEigen::new(blk.evaluate(&y)).eigenvalues.min();
                assert!(min > -1e-9, "node {node} seed {seed}: moment matrix eigenvalue {min}");
            }
            for row in &p.inequalities {
                assert!(row.evaluate(&y) >= row.rhs - 1e-9, "node {node} seed {seed}: inequality");
            }
            let obj = p.objective_value(&y);
            assert!(obj >= minimum - 1e-7, "node {node} seed {seed}: model {obj} below bound {minimum}");
            assert!(y.iter().zip(&built.var_bounds).all(|(v, bnd)| v.abs() <= bnd + 1e-9));
        }
    }
}

#[test]
fn finite_statistics_and_rates() {
    assert_eq!(finite_stat_adjust(5.179, 0.006, 0.0).unwrap(), 5.179);
    assert!((finite_stat_adjust(5.179, 0.006, 1.0).unwrap() - 5.173).abs() < 1e-12);
    assert!((finite_stat_adjust(5.366, 0.007, 1.0).unwrap() - 5.359).abs() < 1e-12);
    assert!(finite_stat_adjust(5.0, -0.1, 1.0).is_err());
    let r = rate_report(Some(1.88), Some(1.50), 675.0).unwrap();
    assert!((r.von_neumann_bits_per_second.unwrap() - 1269.0).abs() < 1e-9);
    assert!((r.min_entropy_bits_per_second.unwrap() - 1012.5).abs() < 1e-9);
    assert!(rate_report(None, None, 0.0).is_err());
}

#[test]
fn task_specs_parse_and_reject_unknown_fields() {
    let spec = TaskSpec::from_json(
        r#"{"family":"I","parameter":0.52,"mode":"bell","value":5.179,"stderr":0.006,"k":1,"method":"vonneumann"}"#,
    )
    .unwrap();
    let task = spec.to_task().unwrap();
    assert_eq!(task.method, Method::VonNeumann { nodes: 6 });
    assert_eq!(task.level, 2);
    match &task.constraints.constraints[0] {
        Constraint::Bell { value, .. } => assert!((value - 5.173).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
    let bad = TaskSpec::from_json(r#"{"family":"I","mode":"bell","method":"minentropy","colour":1}"#);
    assert!(matches!(bad, Err(Error::Json(_))));
    let no_param = TaskSpec::from_json(r#"{"family":"J","mode":"bell","value":5,"method":"minentropy"}"#).unwrap();
    assert!(matches!(no_param.to_task(), Err(Error::Validation(_))));
    let cor = TaskSpec::from_json(
        r#"{"family":"J","parameter":0,"mode":"correlators","values":{"0,0":0.5,"0,1":0.86,"1,0":0.86,"1,1":-0.5},"method":"hmin"}"#,
    )
    .unwrap()
    .to_task()
    .unwrap();
    assert_eq!(cor.constraints.constraints.len(), 4);
}

#[test]
fn results_serialize_with_diagnostics() {
    let r = certify(&bell_task(BellFamily::IDelta(0.52), 5.179, Method::MinEntropy)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(v["method"]["kind"], "min-entropy");
    assert_eq!(v["constraint_mode"], "bell-geq");
    assert!(v["guessing_probability"].as_f64().unwrap() > 0.25);
    assert_eq!(v["diagnostics"][0]["block_dims"], serde_json::json!([13, 13, 13, 13]));
}
