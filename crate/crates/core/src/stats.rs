//! Coincidence counts to correlators: estimation, run aggregation, CSV
//! ingest and seeded synthesis of test data.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qmodel::{BehaviorTable, CorrelatorSet};

/// Coincidence counts `n(a,b)` for one setting pair, ordered
/// `[n00, n01, n10, n11]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub x: usize,
    pub y: usize,
    pub n: [u64; 4],
}

impl CountsRecord {
    pub fn total(&self) -> u64 {
        self.n.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDataset {
    pub run: u64,
    pub records: Vec<CountsRecord>,
    #[serde(default)]
    pub collection_seconds: Option<f64>,
    #[serde(default)]
    pub coincidence_window_ns: Option<f64>,
}

impl RunDataset {
    pub fn new(run: u64, records: Vec<CountsRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert((r.x, r.y)) {
                return invalid(format!("run {run}: duplicate record for ({},{})", r.x, r.y));
            }
        }
        Ok(Self {
            run,
            records,
            collection_seconds: None,
            coincidence_window_ns: None,
        })
    }

    pub fn total_events(&self) -> u64 {
        self.records.iter().map(CountsRecord::total).sum()
    }

    fn pairs(&self) -> BTreeSet<(usize, usize)> {
        self.records.iter().map(|r| (r.x, r.y)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub x: usize,
    pub y: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub stderr: f64,
    #[serde(rename = "N")]
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub pairs: Vec<PairEstimate>,
    pub total_events: u64,
    /// Mean coincidence rate; `None` when collection times are unknown.
    pub rate_hz: Option<f64>,
}

impl ExperimentSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        for p in &s.pairs {
            if !(p.stderr >= 0.0) || !(p.c.abs() <= 1.0 + 1e-9) {
                return invalid(format!("summary entry ({},{}) out of range", p.x, p.y));
            }
        }
        Ok(s)
    }
}

/// `C = (n00 + n11 − n01 − n10)/N`, `stderr = √((1 − C²)/N)`.
pub fn estimate_correlator(r: &CountsRecord) -> Result<(f64, f64)> {
    let total = r.total();
    if total == 0 {
        return invalid(format!("no counts for setting pair ({},{})", r.x, r.y));
    }
    let n = total as f64;
    let c = (r.n[0] as f64 + r.n[3] as f64 - r.n[1] as f64 - r.n[2] as f64) / n;
    Ok((c, ((1.0 - c * c).max(0.0) / n).sqrt()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationMode {
    /// Mean of per-run estimates; stderr is the sample deviation over runs
    /// divided by √runs.
    #[default]
    PerRunStddev,
    /// Counts summed over runs, then a single binomial estimate.
    PooledBinomial,
}

pub fn aggregate_runs(runs: &[RunDataset], mode: AggregationMode) -> Result<ExperimentSummary> {
    let first = runs.first().ok_or_else(|| Error::Validation("no runs to aggregate".into()))?;
    let pairs = first.pairs();
    for r in runs {
        if r.pairs() != pairs {
            return invalid(format!(
                "run {} covers settings {:?}, run {} covers {:?}",
                r.run,
                r.pairs(),
                first.run,
                pairs
            ));
        }
    }
    let mut pooled: BTreeMap<(usize, usize), CountsRecord> = BTreeMap::new();
    let mut per_run: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for run in runs {
        for rec in &run.records {
            let e = pooled.entry((rec.x, rec.y)).or_insert(CountsRecord {
                x: rec.x,
                y: rec.y,
                n: [0; 4],
            });
            for k in 0..4 {
                e.n[k] += rec.n[k];
            }
            per_run.entry((rec.x, rec.y)).or_default().push(estimate_correlator(rec)?.0);
        }
    }
    let mut out = Vec::with_capacity(pooled.len());
    for (key, rec) in &pooled {
        let (c_pool, se_pool) = estimate_correlator(rec)?;
        let (c, stderr) = match mode {
            AggregationMode::PooledBinomial => (c_pool, se_pool),
            // A single run has no spread to measure; fall back to binomial.
            AggregationMode::PerRunStddev if runs.len() < 2 => (c_pool, se_pool),
            AggregationMode::PerRunStddev => {
                let v = &per_run[key];
                let m = v.len() as f64;
                let mean = v.iter().sum::<f64>() / m;
                let var = v.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0);
                (mean, (var / m).sqrt())
            }
        };
        out.push(PairEstimate {
            x: key.0,
            y: key.1,
            c,
            stderr,
            n: rec.total(),
        });
    }
    let total_events = runs.iter().map(RunDataset::total_events).sum();
    let seconds: Option<f64> = runs.iter().map(|r| r.collection_seconds).sum();
    Ok(ExperimentSummary {
        pairs: out,
        total_events,
        rate_hz: seconds.filter(|s| *s > 0.0).map(|s| total_events as f64 / s),
    })
}

pub fn summary_to_correlators(s: &ExperimentSummary) -> Result<CorrelatorSet> {
    let mut c = CorrelatorSet::new();
    for p in &s.pairs {
        c.insert(p.x, p.y, p.c.clamp(-1.0, 1.0), Some(p.stderr))?;
    }
    Ok(c)
}

/// Multinomial counts drawn per setting pair, deterministic in `seed`.
pub fn synthesize_counts(b: &BehaviorTable, events_per_pair: u64, seed: u64) -> Result<RunDataset> {
    synthesize_run(b, events_per_pair, &mut ChaCha8Rng::seed_from_u64(seed), 0)
}

/// Several runs from one seeded stream, each with `events_per_pair` per pair.
pub fn synthesize_runs(b: &BehaviorTable, events_per_pair: u64, runs: usize, seed: u64) -> Result<Vec<RunDataset>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..runs)
        .map(|k| synthesize_run(b, events_per_pair, &mut rng, k as u64))
        .collect()
}

fn synthesize_run(b: &BehaviorTable, events: u64, rng: &mut ChaCha8Rng, run: u64) -> Result<RunDataset> {
    if events == 0 {
        return invalid("events per pair must be at least 1");
    }
    let mut records = Vec::with_capacity(b.n_x * b.n_y);
    for x in 0..b.n_x {
        for y in 0..b.n_y {
            let p = b.cell(x, y);
            let mut n = [0u64; 4];
            let mut left = events;
            let mut mass = 1.0;
            // Sequential conditional binomials.
            for k in 0..3 {
                let q = if mass > 0.0 { (p[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
                let draw = Binomial::new(left, q)
                    .map_err(|e| Error::Validation(format!("binomial parameters: {e}")))?
                    .sample(rng);
                n[k] = draw;
                left -= draw;
                mass -= p[k];
            }
            n[3] = left;
            records.push(CountsRecord { x, y, n });
        }
    }
    RunDataset::new(run, records)
}

/// Runs parsed from a counts CSV, with non-fatal diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CountsFile {
    pub runs: Vec<RunDataset>,
    pub warnings: Vec<String>,
}

const COUNTS_HEADER: [&str; 7] = ["run", "x", "y", "n00", "n01", "n10", "n11"];

/// Reads `run,x,y,n00,n01,n10,n11` rows grouped by run id.
pub fn read_counts(reader: impl Read) -> Result<CountsFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => {
            return Ok(CountsFile {
                runs: Vec::new(),
                warnings: vec!["counts file is empty".into()],
            })
        }
        Some(h) => h?,
    };
    if header.iter().ne(COUNTS_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}", COUNTS_HEADER.join(",")),
        });
    }
    let mut by_run: BTreeMap<u64, Vec<CountsRecord>> = BTreeMap::new();
    for row in rows {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let perr = |msg: String| Error::Parse { line, msg };
        if row.len() != 7 {
            return Err(perr(format!("expected 7 fields, got {}", row.len())));
        }
        let int = |k: usize| -> Result<i64> {
            row[k]
                .parse::<i64>()
                .map_err(|_| perr(format!("{} = {:?} is not an integer", COUNTS_HEADER[k], &row[k])))
        };
        let mut v = [0i64; 7];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = int(k)?;
            if *slot < 0 {
                return Err(perr(format!("{} is negative", COUNTS_HEADER[k])));
            }
        }
        let rec = CountsRecord {
            x: v[1] as usize,
            y: v[2] as usize,
            n: [v[3] as u64, v[4] as u64, v[5] as u64, v[6] as u64],
        };
        let list = by_run.entry(v[0] as u64).or_default();
        if list.iter().any(|r| (r.x, r.y) == (rec.x, rec.y)) {
            return Err(perr(format!("duplicate setting pair ({},{}) in run {}", rec.x, rec.y, v[0])));
        }
        list.push(rec);
    }
    let mut warnings = Vec::new();
    if by_run.is_empty() {
        warnings.push("counts file has a header but no records".into());
    }
    let runs = by_run
        .into_iter()
        .map(|(run, records)| RunDataset::new(run, records))
        .collect::<Result<_>>()?;
    Ok(CountsFile { runs, warnings })
}

pub fn load_counts(path: impl AsRef<std::path::Path>) -> Result<CountsFile> {
    read_counts(std::fs::File::open(path)?)
}

pub fn write_counts(runs: &[RunDataset], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COUNTS_HEADER)?;
    for run in runs {
        for r in &run.records {
            w.write_record([
                run.run.to_string(),
                r.x.to_string(),
                r.y.to_string(),
                r.n[0].to_string(),
                r.n[1].to_string(),
                r.n[2].to_string(),
                r.n[3].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
