//! Experiment orchestration: fan (scenario, seed) jobs out to a worker pool,
//! then emit the per-round CSV, the JSON summary and the scaling table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{realize_channels, sample_doas};
use crate::config::{parse_config, ScenarioConfig};
use crate::error::{Error, Result};
use crate::harness::{run_training, stream_rng, RoundMetrics, Scenario};
use crate::linalg::scaled_identity;
use crate::optimizer::{optimize_against, OptimizerSettings};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "RSFLLM_SEED";

pub const CSV_HEADER: &str = "round,client,scenario,seed,mse_db,sum_rate_nats,accuracy,loss,bound,empirical_divergence,r_out_1,r_out_2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub scenarios: Vec<Scenario>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub emit_formats: Vec<EmitFormat>,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Invariant("manifest needs at least one scenario".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Invariant("manifest needs at least one seed".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidValue {
                key: "workers".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Seed taken from `RSFLLM_SEED` when set, else the configured one.
pub fn default_seed(config: &ScenarioConfig) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::InvalidValue {
            key: SEED_ENV.into(),
            reason: format!("`{v}` is not a nonnegative integer"),
        }),
        Err(_) => Ok(config.seed),
    }
}

/// Six significant digits, with `-inf`, `inf` and `nan` sentinels.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.5e}")
    }
}

/// One CSV row per (round, client).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub round: usize,
    pub client: usize,
    pub scenario: Scenario,
    pub seed: u64,
    pub mse_db: f64,
    pub sum_rate_nats: f64,
    pub accuracy: f64,
    pub loss: f64,
    pub bound: f64,
    pub empirical_divergence: f64,
    pub r_out_1: f64,
    pub r_out_2: f64,
}

impl MetricRow {
    pub fn csv_line(&self) -> String {
        let nums = [
            self.mse_db,
            self.sum_rate_nats,
            self.accuracy,
            self.loss,
            self.bound,
            self.empirical_divergence,
            self.r_out_1,
            self.r_out_2,
        ];
        let mut line = format!("{},{},{},{}", self.round, self.client, self.scenario, self.seed);
        for x in nums {
            line.push(',');
            line.push_str(&format_number(x));
        }
        line
    }
}

pub fn rows_from_metrics(metrics: &[RoundMetrics]) -> Vec<MetricRow> {
    metrics
        .iter()
        .flat_map(|m| {
            (0..m.accuracy.len()).map(move |q| MetricRow {
                round: m.round,
                client: q,
                scenario: m.scenario,
                seed: m.seed,
                mse_db: m.per_client_mse_db[q],
                sum_rate_nats: m.sum_rate,
                accuracy: m.accuracy[q],
                loss: m.loss[q],
                bound: m.divergence_bound[q],
                empirical_divergence: m.empirical_divergence[q],
                r_out_1: m.r_out_1[q],
                r_out_2: m.r_out_2[q],
            })
        })
        .collect()
}

pub fn csv_body(rows: &[MetricRow]) -> String {
    let mut s = String::with_capacity(rows.len() * 128);
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    /// `None` when the metric has no finite sample.
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    /// Mean and population standard deviation over the finite entries.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Stat { mean: None, std: None };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Stat {
            mean: Some(mean),
            std: Some(var.sqrt()),
        }
    }
}

pub type Summary = BTreeMap<String, BTreeMap<String, Stat>>;

/// `{scenario: {metric: {mean, std}}}`; rates also in bits.
pub fn summarize(rows: &[MetricRow]) -> Summary {
    let mut by_scenario: BTreeMap<String, Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        by_scenario.entry(r.scenario.to_string()).or_default().push(r);
    }
    by_scenario
        .into_iter()
        .map(|(name, rs)| {
            let last_round = rs.iter().map(|r| r.round).max().unwrap_or(0);
            let col = |f: fn(&MetricRow) -> f64| Stat::of(rs.iter().map(|r| f(r)));
            let mut m = BTreeMap::new();
            m.insert("mse_db".into(), col(|r| r.mse_db));
            m.insert("sum_rate_nats".into(), col(|r| r.sum_rate_nats));
            m.insert("sum_rate_bits".into(), col(|r| r.sum_rate_nats / std::f64::consts::LN_2));
            m.insert("accuracy".into(), col(|r| r.accuracy));
            m.insert(
                "final_accuracy".into(),
                Stat::of(rs.iter().filter(|r| r.round == last_round).map(|r| r.accuracy)),
            );
            m.insert("loss".into(), col(|r| r.loss));
            m.insert("bound".into(), col(|r| r.bound));
            m.insert("empirical_divergence".into(), col(|r| r.empirical_divergence));
            m.insert("r_out_1".into(), col(|r| r.r_out_1));
            m.insert("r_out_2".into(), col(|r| r.r_out_2));
            m.insert("r_out_1_bits".into(), col(|r| r.r_out_1 / std::f64::consts::LN_2));
            m.insert("r_out_2_bits".into(), col(|r| r.r_out_2 / std::f64::consts::LN_2));
            (name, m)
        })
        .collect()
}

#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<MetricRow>,
    pub summary: Summary,
    pub written: Vec<PathBuf>,
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Invariant(format!("worker pool: {e}")))
}

/// Runs every (scenario, seed) job of an already parsed config. Rows come
/// back in manifest order regardless of scheduling. The first failing job
/// is reported after the successful ones are collected.
pub fn run_jobs(
    config: &ScenarioConfig,
    scenarios: &[Scenario],
    seeds: &[u64],
    workers: Option<usize>,
) -> (Vec<MetricRow>, Option<Error>) {
    let jobs: Vec<(Scenario, u64)> = scenarios
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results: Vec<Result<Vec<RoundMetrics>>> = match pool(workers) {
        Ok(p) => p.install(|| jobs.par_iter().map(|&(s, seed)| run_training(config, s, seed)).collect()),
        Err(e) => return (Vec::new(), Some(e)),
    };
    let mut rows = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(m) => rows.extend(rows_from_metrics(&m)),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    (rows, first_err)
}

/// Executes a manifest and writes `metrics.csv` and `summary.json`.
/// Outputs of completed jobs are written even when a job fails.
pub fn run(manifest: &RunManifest) -> Result<RunOutput> {
    manifest.validate()?;
    let config = parse_config(&manifest.config_path)?;
    let (rows, err) = run_jobs(&config, &manifest.scenarios, &manifest.seeds, manifest.workers);
    fs::create_dir_all(&manifest.output_dir)?;
    let summary = summarize(&rows);
    let mut written = Vec::new();
    if manifest.emit_formats.contains(&EmitFormat::Csv) {
        let path = manifest.output_dir.join("metrics.csv");
        fs::write(&path, csv_body(&rows))?;
        written.push(path);
    }
    if manifest.emit_formats.contains(&EmitFormat::Json) {
        let path = manifest.output_dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        written.push(path);
    }
    match err {
        Some(e) => Err(e),
        None => Ok(RunOutput { rows, summary, written }),
    }
}

/// Resource-element counts swept by [`bench_scaling`].
pub const BENCH_SIZES: [usize; 4] = [64, 128, 256, 512];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub resource_elements: usize,
    pub iterations: usize,
    /// Best-of-repeats wall time in seconds.
    pub seconds: f64,
    pub seconds_per_iteration: f64,
    /// Per-iteration time relative to the previous size; NaN for the first.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Every doubling keeps the per-iteration ratio within `[1, 4]`.
    pub linear: bool,
}

impl BenchReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("resource_elements,iterations,seconds,seconds_per_iteration,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.resource_elements,
                r.iterations,
                format_number(r.seconds),
                format_number(r.seconds_per_iteration),
                format_number(r.ratio)
            );
        }
        s
    }
}

/// Times the jamming-unaware optimizer over [`BENCH_SIZES`] with the
/// config's antennas. The grid keeps `K` symbols when it divides the size.
pub fn bench_scaling(config: &ScenarioConfig, repeats: usize) -> Result<BenchReport> {
    let mut rows: Vec<BenchRow> = Vec::new();
    for &nk in &BENCH_SIZES {
        let mut cfg = config.clone();
        cfg.symbols = if nk % config.symbols == 0 { config.symbols } else { 1 };
        cfg.subcarriers = nk / cfg.symbols;
        cfg.max_blocks = None;
        cfg.validate()?;
        let mut rng = stream_rng(cfg.seed, &[nk as u64]);
        let doas = sample_doas(&cfg, &mut rng);
        let channels = realize_channels(&cfg, &doas, &mut rng)?;
        let white = vec![scaled_identity(cfg.rx_antennas, cfg.noise_power); nk];
        let mut best = f64::INFINITY;
        let mut iterations = 0;
        for _ in 0..repeats.max(1) {
            let t = Instant::now();
            let (_, report) = optimize_against(&channels, cfg.user_power, cfg.blocks_per_user(), &white, OptimizerSettings::default())?;
            best = best.min(t.elapsed().as_secs_f64());
            iterations = report.iterations;
        }
        let per_iter = best / iterations.max(1) as f64;
        let ratio = rows.last().map_or(f64::NAN, |p| per_iter / p.seconds_per_iteration);
        rows.push(BenchRow {
            resource_elements: nk,
            iterations,
            seconds: best,
            seconds_per_iteration: per_iter,
            ratio,
        });
    }
    let linear = rows.iter().skip(1).all(|r| (1.0..=4.0).contains(&r.ratio));
    Ok(BenchReport { rows, linear })
}

/// Parses a comma-separated scenario list.
pub fn parse_scenarios(list: &str) -> Result<Vec<Scenario>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// Parses a comma-separated seed list; `a..b` ranges are half-open.
pub fn parse_seeds(list: &str) -> Result<Vec<u64>> {
    let bad = |s: &str| Error::InvalidValue {
        key: "seeds".into(),
        reason: format!("`{s}` is not a seed or range"),
    };
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.parse().map_err(|_| bad(part))?;
            let b: u64 = b.parse().map_err(|_| bad(part))?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    Ok(out)
}

/// Reads a CSV file and drops the header line.
pub fn read_csv_body(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().skip(1).map(|l| format!("{l}\n")).collect())
}
