use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dicert::certify::{NodeCoupling, TaskSpec, ZBasis};
use dicert::qmodel::BellFamily;
use dicert::stats::AggregationMode;
use dicert_cli::commands::{self, CertifyArgs, CertifyInput, IngestArgs, Report, SimulateArgs};
use dicert_cli::reproduce::{self, Table};
use dicert_cli::{params, CliError};

#[derive(Parser)]
#[command(name = "dicert", version, about = "Device-independent randomness certification from Bell tests")]
struct Cli {
    /// Print machine-readable JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Correlators and Bell value of a noisy |φ+⟩ at given HWP angles.
    Simulate {
        #[command(flatten)]
        family: FamilyArgs,
        /// CSV with columns role,setting,theta_degrees.
        #[arg(long)]
        angles: Option<PathBuf>,
        /// Weight of |φ+⟩ against white noise.
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
    },
    /// Summarize a coincidence-count CSV.
    Ingest {
        #[arg(long)]
        counts: PathBuf,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_enum, default_value_t = Mode::PerRun)]
        mode: Mode,
    },
    /// Certified entropy for a Bell value or a set of correlators.
    Certify(CertifyCli),
    /// Recompute the published tables and compare.
    Reproduce {
        /// One of violation-I-lowrate, entropy-I-lowrate, violation-J,
        /// entropy-J, violation-I-highrate, entropy-I-highrate, angles,
        /// rates, or all.
        #[arg(long, default_value = "all")]
        table: String,
        /// Skip the von Neumann columns.
        #[arg(long)]
        min_entropy_only: bool,
    },
}

#[derive(Args)]
struct FamilyArgs {
    /// I, J or modCHSH.
    #[arg(long)]
    family: Option<String>,
    /// δ of the I family.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// γ of the J family; accepts fractions of pi such as pi/24.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
}

impl FamilyArgs {
    fn resolve(&self) -> Result<Option<BellFamily>, CliError> {
        let Some(name) = &self.family else {
            if self.delta.is_some() || self.gamma.is_some() {
                return Err(CliError::Validation("--delta/--gamma need --family".into()));
            }
            return Ok(None);
        };
        let parameter = match (&self.delta, &self.gamma) {
            (Some(_), Some(_)) => return Err(CliError::Validation("give --delta or --gamma, not both".into())),
            (Some(p), None) | (None, Some(p)) => Some(params::parse_real(p)?),
            (None, None) => None,
        };
        params::family(name, parameter).map(Some)
    }

    fn required(&self) -> Result<BellFamily, CliError> {
        self.resolve()?
            .ok_or_else(|| CliError::Validation("--family is required".into()))
    }
}

#[derive(Args)]
struct CertifyCli {
    #[command(flatten)]
    family: FamilyArgs,
    /// Observed Bell value; the constraint is Bell ≥ value − k·stderr.
    #[arg(long, allow_hyphen_values = true)]
    bell: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    stderr: f64,
    #[arg(long, default_value_t = 0.0)]
    k: f64,
    /// Correlator JSON (an `ingest --json` output or an "x,y" map).
    #[arg(long)]
    correlators: Option<PathBuf>,
    /// Complete task JSON; overrides the other constraint flags.
    #[arg(long)]
    task: Option<PathBuf>,
    /// minentropy or vonneumann.
    #[arg(long, default_value = "minentropy")]
    method: String,
    /// Gauss-Radau nodes for the von Neumann bound.
    #[arg(long, default_value_t = 6)]
    nodes: usize,
    /// NPA level of the projector part of the basis.
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long, value_enum, default_value_t = Basis::AllSettings)]
    z_basis: Basis,
    #[arg(long)]
    joint: bool,
    /// Event rate; also print bits per second.
    #[arg(long)]
    rate: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    PerRun,
    Pooled,
}

#[derive(Clone, Copy, ValueEnum)]
enum Basis {
    Target,
    AllSettings,
}

fn certify_args(c: &CertifyCli) -> Result<CertifyArgs, CliError> {
    let input = match (&c.task, &c.correlators, c.bell) {
        (Some(path), _, _) => CertifyInput::Task(TaskSpec::from_json(&std::fs::read_to_string(path)?)?),
        (None, Some(_), Some(_)) => {
            return Err(CliError::Validation("give --bell or --correlators, not both".into()));
        }
        (None, Some(path), None) => {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            CertifyInput::Correlators(commands::correlators_from_json(&v)?)
        }
        (None, None, Some(value)) => CertifyInput::Bell {
            value,
            stderr: c.stderr,
            k: c.k,
        },
        (None, None, None) => {
            return Err(CliError::Validation("one of --bell, --correlators or --task is required".into()));
        }
    };
    Ok(CertifyArgs {
        family: c.family.resolve()?,
        input,
        method: c.method.clone(),
        nodes: c.nodes,
        level: c.level,
        z_basis: match c.z_basis {
            Basis::Target => ZBasis::Target,
            Basis::AllSettings => ZBasis::AllSettings,
        },
        coupling: if c.joint { NodeCoupling::Joint } else { NodeCoupling::Separate },
        rate: c.rate,
    })
}

fn run_reproduce(table: &str, min_entropy_only: bool) -> Result<Report, CliError> {
    let tables: Vec<Table> = if table.eq_ignore_ascii_case("all") {
        Table::ALL.to_vec()
    } else {
        vec![Table::parse(table).ok_or_else(|| CliError::Validation(format!("unknown table {table:?}")))?]
    };
    let opts = reproduce::Options { min_entropy_only };
    let mut rows = Vec::new();
    for t in tables {
        rows.extend(reproduce::run(t, opts)?);
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    let text = format!("{}{} of {} rows within tolerance\n", reproduce::render(&rows), rows.len() - failed, rows.len());
    Ok(Report {
        json: serde_json::json!({ "rows": rows, "failed": failed }),
        text,
        failure: (failed > 0).then(|| CliError::Mismatch(format!("{failed} rows outside tolerance"))),
    })
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Simulate { family, angles, eta } => commands::simulate(&SimulateArgs {
            family: family.required()?,
            angles: angles.clone(),
            eta: *eta,
        }),
        Command::Ingest { counts, family, mode } => commands::ingest(&IngestArgs {
            counts: counts.clone(),
            family: family.resolve()?,
            mode: match mode {
                Mode::PerRun => AggregationMode::PerRunStddev,
                Mode::Pooled => AggregationMode::PooledBinomial,
            },
        }),
        Command::Certify(c) => commands::run_certify(&certify_args(c)?),
        Command::Reproduce { table, min_entropy_only } => run_reproduce(table, *min_entropy_only),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report.json).expect("JSON values serialize"));
            } else {
                print!("{}", report.text);
            }
            match report.failure {
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code())
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
