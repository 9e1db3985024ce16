//! The `simulate`, `ingest` and `certify` commands, independent of argument
//! parsing so they can be driven from tests.

use std::path::PathBuf;

use dicert::certify::{
    certify, finite_stat_adjust, parse_method, rate_report, CertificationTask, ConstraintSet, NodeCoupling, TaskSpec,
    ZBasis,
};
use dicert::qmodel::{
    bell_state_phi_plus, bell_value, behavior, classical_bound, correlators, lab_angles, make_bell, optimal_angles,
    relative_bell_value, tsirelson_bound, AngleSet, BellFamily, CorrelatorSet,
};
use dicert::stats::{aggregate_runs, load_counts, summary_to_correlators, AggregationMode};
use serde_json::{json, Value};

use crate::{solver_options, CliError};

/// What a command prints, plus an error to exit with after printing.
pub struct Report {
    pub json: Value,
    pub text: String,
    pub failure: Option<CliError>,
}

impl Report {
    fn ok(json: Value, text: String) -> Self {
        Report { json, text, failure: None }
    }
}

pub struct SimulateArgs {
    pub family: BellFamily,
    pub angles: Option<PathBuf>,
    pub eta: f64,
}

/// Angles from a file, else the recorded lab angles, else the closed-form
/// optimum.
fn resolve_angles(family: BellFamily, file: Option<&PathBuf>) -> Result<(AngleSet, &'static str), CliError> {
    if let Some(path) = file {
        return Ok((AngleSet::from_csv(&std::fs::read_to_string(path)?)?, "file"));
    }
    if let Some(a) = lab_angles(family) {
        return Ok((a, "lab"));
    }
    Ok((optimal_angles(family)?, "optimal"))
}

pub fn simulate(args: &SimulateArgs) -> Result<Report, CliError> {
    let e = make_bell(args.family)?;
    let (angles, source) = resolve_angles(args.family, args.angles.as_ref())?;
    let state = bell_state_phi_plus().with_white_noise(args.eta)?;
    let (a, b) = angles.observables();
    let table = behavior(&state, &a, &b)?;
    let c = correlators(&table);
    let v = bell_value(&c, &e)?.value;
    let q = tsirelson_bound(&e)?;
    let relative = relative_bell_value(v, &e)?;
    let json = json!({
        "expression": e.label(),
        "eta": args.eta,
        "angle_source": source,
        "angles": angles,
        "behavior": table.to_json(),
        "correlators": c.to_json(),
        "bell_value": v,
        "classical_bound": classical_bound(&e),
        "tsirelson_bound": q,
        "relative_value": relative,
    });
    let mut text = format!("{} with η = {}, {source} angles\n", e.label(), args.eta);
    for ((x, y), corr) in c.iter() {
        text.push_str(&format!("  C({x},{y}) = {:+.6}\n", corr.value));
    }
    text.push_str(&format!(
        "Bell value {v:.4}  (classical {:.4}, quantum {q:.4}, relative {relative:.4})\n",
        classical_bound(&e)
    ));
    Ok(Report::ok(json, text))
}

pub struct IngestArgs {
    pub counts: PathBuf,
    pub family: Option<BellFamily>,
    pub mode: AggregationMode,
}

pub fn ingest(args: &IngestArgs) -> Result<Report, CliError> {
    let file = load_counts(&args.counts)?;
    let summary = aggregate_runs(&file.runs, args.mode)?;
    let c = summary_to_correlators(&summary)?;
    let mut json = json!({
        "runs": file.runs.len(),
        "mode": args.mode,
        "summary": serde_json::to_value(&summary)?,
        "correlators": c.to_json(),
        "warnings": file.warnings,
    });
    let mut text = format!("{} runs, {} events\n", file.runs.len(), summary.total_events);
    if let Some(r) = summary.rate_hz {
        text.push_str(&format!("rate {r:.1} events/s\n"));
    }
    for p in &summary.pairs {
        text.push_str(&format!("  C({},{}) = {:+.5} ± {:.5}  (N = {})\n", p.x, p.y, p.c, p.stderr, p.n));
    }
    for w in &file.warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    if let Some(f) = args.family {
        let e = make_bell(f)?;
        let v = bell_value(&c, &e)?;
        json["expression"] = json!(e.label());
        json["bell_value"] = json!(v);
        match v.stderr {
            Some(s) => text.push_str(&format!("{} = {:.4} ± {s:.4}\n", e.label(), v.value)),
            None => text.push_str(&format!("{} = {:.4}\n", e.label(), v.value)),
        }
    }
    Ok(Report::ok(json, text))
}

pub enum CertifyInput {
    /// `Bell ≥ value − k·stderr`.
    Bell { value: f64, stderr: f64, k: f64 },
    /// One inequality per term of the expression.
    Correlators(CorrelatorSet),
    /// A complete serialized task.
    Task(TaskSpec),
}

pub struct CertifyArgs {
    pub family: Option<BellFamily>,
    pub input: CertifyInput,
    pub method: String,
    pub nodes: usize,
    pub level: usize,
    pub z_basis: ZBasis,
    pub coupling: NodeCoupling,
    pub rate: Option<f64>,
}

fn certify_task(args: &CertifyArgs) -> Result<CertificationTask, CliError> {
    let need_family = || {
        args.family
            .ok_or_else(|| CliError::Validation("--family is required unless --task is given".into()))
    };
    let mut task = match &args.input {
        CertifyInput::Task(spec) => spec.to_task()?,
        CertifyInput::Bell { value, stderr, k } => {
            let e = make_bell(need_family()?)?;
            let threshold = finite_stat_adjust(*value, *stderr, *k)?;
            let mut t = CertificationTask::new(ConstraintSet::bell_geq(e, threshold), parse_method(&args.method, args.nodes)?)?;
            t.level = args.level;
            t.z_basis = args.z_basis;
            t.coupling = args.coupling;
            t
        }
        CertifyInput::Correlators(c) => {
            let e = make_bell(need_family()?)?;
            let mut t = CertificationTask::new(ConstraintSet::correlators_ineq(&e, c)?, parse_method(&args.method, args.nodes)?)?;
            t.level = args.level;
            t.z_basis = args.z_basis;
            t.coupling = args.coupling;
            t
        }
    };
    task.solver = solver_options()?;
    task.validate()?;
    Ok(task)
}

pub fn run_certify(args: &CertifyArgs) -> Result<Report, CliError> {
    let task = certify_task(args)?;
    let r = certify(&task)?;
    let mut json = serde_json::to_value(&r)?;
    let mut text = format!(
        "{} bound ({} constraints): {:.4} bits{}\n",
        match r.method {
            dicert::certify::Method::MinEntropy => "min-entropy".to_string(),
            dicert::certify::Method::VonNeumann { nodes } => format!("von Neumann, {nodes} nodes,"),
        },
        r.constraint_mode,
        r.entropy_bits,
        if r.clamped { " (clamped)" } else { "" }
    );
    if let Some(p) = r.guessing_probability {
        text.push_str(&format!("guessing probability ≤ {p:.6}\n"));
    }
    for d in &r.diagnostics {
        text.push_str(&format!(
            "  {:?}: {} iterations, gap {:.1e}, infeasibility {:.1e}, slack {:.1e}\n",
            d.status, d.iterations, d.relative_gap, d.max_infeasibility, d.residual_slack
        ));
    }
    for m in &r.messages {
        text.push_str(&format!("note: {m}\n"));
    }
    if let Some(rate) = args.rate {
        let (vn, hm) = match r.method {
            dicert::certify::Method::MinEntropy => (None, Some(r.entropy_bits)),
            dicert::certify::Method::VonNeumann { .. } => (Some(r.entropy_bits), None),
        };
        let report = rate_report(vn, hm, rate)?;
        let bits = report.von_neumann_bits_per_second.or(report.min_entropy_bits_per_second).unwrap_or(0.0);
        text.push_str(&format!("{bits:.1} bits/s at {rate} events/s\n"));
        json["rate"] = serde_json::to_value(report)?;
    }
    let failure = (!r.certified).then(|| CliError::Solver(format!("solve did not converge: {}", r.messages.join("; "))));
    Ok(Report { json, text, failure })
}

/// Correlators from an `ingest --json` output or a bare `{"x,y": ...}` map.
pub fn correlators_from_json(v: &Value) -> Result<CorrelatorSet, CliError> {
    let inner = v.get("correlators").unwrap_or(v);
    Ok(CorrelatorSet::from_json(inner)?)
}
