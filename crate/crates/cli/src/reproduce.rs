//! Recompute the published tables from the bundled inputs and compare.

use dicert::certify::{certify, finite_stat_adjust, rate_report, CertificationTask, ConstraintSet, Method};
use dicert::qmodel::{
    bell_value, classical_bound, lab_angles, make_bell, simulate_correlators, tsirelson_bound, BellFamily,
};
use serde::Serialize;

use crate::fixtures::{experiments, Experiment};
use crate::params::rounding_tolerance;
use crate::{solver_options, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Table {
    ViolationILowrate,
    EntropyILowrate,
    ViolationJ,
    EntropyJ,
    ViolationIHighrate,
    EntropyIHighrate,
    Angles,
    Rates,
}

impl Table {
    pub const ALL: [Table; 8] = [
        Table::ViolationILowrate,
        Table::EntropyILowrate,
        Table::ViolationJ,
        Table::EntropyJ,
        Table::ViolationIHighrate,
        Table::EntropyIHighrate,
        Table::Angles,
        Table::Rates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Table::ViolationILowrate => "violation-I-lowrate",
            Table::EntropyILowrate => "entropy-I-lowrate",
            Table::ViolationJ => "violation-J",
            Table::EntropyJ => "entropy-J",
            Table::ViolationIHighrate => "violation-I-highrate",
            Table::EntropyIHighrate => "entropy-I-highrate",
            Table::Angles => "angles",
            Table::Rates => "rates",
        }
    }

    pub fn parse(s: &str) -> Option<Table> {
        Table::ALL.into_iter().find(|t| t.name().eq_ignore_ascii_case(s))
    }
}

/// Tolerance on a reproduced min-entropy, in bits.
pub const MIN_ENTROPY_TOL: f64 = 0.02;
/// Tolerance on a reproduced von Neumann bound, in bits.
pub const VON_NEUMANN_TOL: f64 = 0.03;
/// Tolerance on an ideal Bell value at the recorded angles.
pub const ANGLE_TOL: f64 = 5e-3;
/// Tolerance on a rate in bits per second.
pub const RATE_TOL: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub table: &'static str,
    pub label: String,
    pub quantity: &'static str,
    pub expected: f64,
    pub computed: f64,
    pub delta: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Row {
    fn new(table: Table, label: impl Into<String>, quantity: &'static str, expected: f64, computed: f64, tol: f64) -> Self {
        let delta = (computed - expected).abs();
        Row {
            table: table.name(),
            label: label.into(),
            quantity,
            expected,
            computed,
            delta,
            tolerance: tol,
            // A small allowance for printed values that sit on the boundary.
            pass: delta <= tol * (1.0 + 1e-9),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Options {
    /// Skip the von Neumann columns, which take seconds per row.
    pub min_entropy_only: bool,
}

/// Certified entropy for the constraint `Bell ≥ value`.
pub fn certify_bell(family: BellFamily, value: f64, method: Method) -> Result<f64, CliError> {
    let mut task = CertificationTask::new(ConstraintSet::bell_geq(make_bell(family)?, value), method)?;
    task.solver = solver_options()?;
    let r = certify(&task)?;
    if !r.certified {
        return Err(CliError::Solver(format!("{family:?} at {value}: {}", r.messages.join("; "))));
    }
    Ok(r.entropy_bits)
}

fn violation(table: Table, exp: &Experiment) -> Result<Vec<Row>, CliError> {
    let mut out = Vec::new();
    for row in &exp.rows {
        let e = make_bell(exp.family(row)?)?;
        let label = format!("{} {}", exp.family, row.parameter);
        let c = classical_bound(&e);
        let q = tsirelson_bound(&e)?;
        let classical: f64 = row.classical.parse().map_err(|_| CliError::Validation(row.classical.clone()))?;
        let quantum: f64 = row.quantum.parse().map_err(|_| CliError::Validation(row.quantum.clone()))?;
        out.push(Row::new(table, &label, "classical", classical, c, rounding_tolerance(&row.classical)));
        out.push(Row::new(table, &label, "quantum", quantum, q, rounding_tolerance(&row.quantum)));
    }
    Ok(out)
}

fn entropy(table: Table, exp: &Experiment, opts: Options) -> Result<Vec<Row>, CliError> {
    let mut out = Vec::new();
    for row in &exp.rows {
        let f = exp.family(row)?;
        let label = format!("{} {} @ {}", exp.family, row.parameter, row.observed);
        let h = certify_bell(f, row.observed, Method::MinEntropy)?;
        out.push(Row::new(table, &label, "min-entropy", row.hmin, h, MIN_ENTROPY_TOL));
        if opts.min_entropy_only {
            continue;
        }
        let vn = Method::VonNeumann { nodes: 6 };
        let h = certify_bell(f, row.observed, vn)?;
        out.push(Row::new(table, &label, "von-neumann", row.vn_bell6, h, VON_NEUMANN_TOL));
        if let Some(expected) = row.vn_finite {
            let v = finite_stat_adjust(row.observed, row.stderr, 1.0)?;
            let h = certify_bell(f, v, vn)?;
            let label = format!("{} {} @ {v:.3}", exp.family, row.parameter);
            out.push(Row::new(table, label, "von-neumann-1sigma", expected, h, VON_NEUMANN_TOL));
        }
    }
    Ok(out)
}

fn angles() -> Result<Vec<Row>, CliError> {
    let mut out = Vec::new();
    for exp in experiments().experiments {
        for row in &exp.rows {
            let f = exp.family(row)?;
            let label = format!("{} {}", exp.family, row.parameter);
            if out.iter().any(|r: &Row| r.label == label) {
                continue;
            }
            let angles = lab_angles(f).ok_or_else(|| CliError::Validation(format!("no recorded angles for {label}")))?;
            let e = make_bell(f)?;
            let v = bell_value(&simulate_correlators(&angles, 1.0)?, &e)?.value;
            out.push(Row::new(Table::Angles, label, "ideal-bell", tsirelson_bound(&e)?, v, ANGLE_TOL));
        }
    }
    Ok(out)
}

/// Rates from the published per-event entropies: the 8-node correlator
/// column for von Neumann and the min-entropy column.
fn rates() -> Result<Vec<Row>, CliError> {
    let mut out = Vec::new();
    for exp in experiments().experiments {
        let row = &exp.rows[exp.rate.row];
        let r = rate_report(Some(row.vn_cor8), Some(row.hmin), exp.events_per_second)?;
        let label = format!("{} ev/s ({} {})", exp.events_per_second, exp.family, row.parameter);
        let vn = r.von_neumann_bits_per_second.unwrap_or(f64::NAN);
        let hm = r.min_entropy_bits_per_second.unwrap_or(f64::NAN);
        out.push(Row::new(Table::Rates, &label, "von-neumann-bits/s", exp.rate.von_neumann, vn, RATE_TOL));
        out.push(Row::new(Table::Rates, &label, "min-entropy-bits/s", exp.rate.min_entropy, hm, RATE_TOL));
    }
    Ok(out)
}

pub fn run(table: Table, opts: Options) -> Result<Vec<Row>, CliError> {
    let all = experiments();
    match table {
        Table::ViolationILowrate => violation(table, all.get("I-lowrate")),
        Table::ViolationJ => violation(table, all.get("J")),
        Table::ViolationIHighrate => violation(table, all.get("I-highrate")),
        Table::EntropyILowrate => entropy(table, all.get("I-lowrate"), opts),
        Table::EntropyJ => entropy(table, all.get("J"), opts),
        Table::EntropyIHighrate => entropy(table, all.get("I-highrate"), opts),
        Table::Angles => angles(),
        Table::Rates => rates(),
    }
}

/// Plain-text rendering, one line per row.
pub fn render(rows: &[Row]) -> String {
    let mut s = format!(
        "{:<22} {:<24} {:<20} {:>10} {:>10} {:>9} {:>8}  result\n",
        "table", "row", "quantity", "published", "computed", "|diff|", "tol"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<22} {:<24} {:<20} {:>10.4} {:>10.4} {:>9.4} {:>8.4}  {}\n",
            r.table,
            r.label,
            r.quantity,
            r.expected,
            r.computed,
            r.delta,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    s
}
