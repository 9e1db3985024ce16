//! Published experimental values, bundled with the binary.

use dicert::qmodel::BellFamily;
use serde::Deserialize;

use crate::params;
use crate::CliError;

const EXPERIMENTS: &str = include_str!("../fixtures/experiments.json");

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiments {
    pub experiments: Vec<Experiment>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub family: String,
    pub events_per_second: f64,
    pub runs: usize,
    pub run_seconds: f64,
    pub rows: Vec<Row>,
    pub rate: RateClaim,
}

/// One parameter value of an experiment. Bound columns are kept as printed so
/// their rounding is known.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub parameter: String,
    pub classical: String,
    pub quantum: String,
    pub observed: f64,
    pub stderr: f64,
    pub relative: f64,
    pub vn_cor8: f64,
    pub vn_cor6: f64,
    pub vn_bell6: f64,
    pub hmin: f64,
    /// Von Neumann bound one stderr below the observed value.
    #[serde(default)]
    pub vn_finite: Option<f64>,
}

/// Stated generation rate, attributed to `rows[row]`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateClaim {
    pub row: usize,
    pub von_neumann: f64,
    pub min_entropy: f64,
}

pub fn experiments() -> Experiments {
    serde_json::from_str(EXPERIMENTS).expect("bundled fixture parses")
}

impl Experiments {
    pub fn get(&self, name: &str) -> &Experiment {
        self.experiments
            .iter()
            .find(|e| e.name == name)
            .unwrap_or_else(|| panic!("no bundled experiment {name}"))
    }
}

impl Experiment {
    pub fn family(&self, row: &Row) -> Result<BellFamily, CliError> {
        params::family(&self.family, Some(params::parse_real(&row.parameter)?))
    }

    /// Events recorded for each setting pair in one run.
    pub fn events_per_run(&self) -> u64 {
        (self.events_per_second * self.run_seconds).round() as u64
    }
}
