//! Benchmark harness: runs the NAND simulator and both software baselines on
//! the same workload and writes CSV plus a JSON summary.
//!
//! Baseline latencies are measured wall clock (monotonic clock, warm-up runs,
//! median over repetitions). NAND latency and energy come from the analytic
//! model. No energy figure is produced for the software baselines.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{program_array, query, ArrayError, ArrayGeometry, QueryOptions, QueryPattern, ReferencePattern, SenseMode};
use crate::baselines::{brute_force_match, lsh_query, BaselineError, LshConfig, LshIndex};
use crate::datagen::{generate_dataset, DatagenError, DatasetConfig};
use crate::device::{DeviceError, DeviceParams};
use crate::perf::{estimate_for_count, two_point_residual, PerfError, PerfParams, PerfReport, SweepWorkload};
use crate::string::StringError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Perf(#[from] PerfError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("NAND match sets disagree with brute force on queries {0:?}")]
    Disagreement(Vec<usize>),
}

impl BenchError {
    /// Process exit code: 1 usage/config, 2 capacity, 3 disagreement.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Disagreement(_) => 3,
            BenchError::Array(ArrayError::Capacity { .. })
            | BenchError::Array(ArrayError::String(StringError::Capacity { .. }))
            | BenchError::Perf(PerfError::Bound { .. }) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    Nand,
    Brute,
    Lsh,
}

impl Matcher {
    pub fn name(self) -> &'static str {
        match self {
            Matcher::Nand => "nand",
            Matcher::Brute => "brute",
            Matcher::Lsh => "lsh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub dataset: DatasetConfig,
    pub geometry: ArrayGeometry,
    pub device_params: Option<PathBuf>,
    pub perf_params: Option<PathBuf>,
    pub matchers: Vec<Matcher>,
    pub output_dir: Option<PathBuf>,
    pub warmup: usize,
    pub repetitions: usize,
    pub lsh: LshConfig,
    pub sense: SenseMode,
    /// Unit pulse width of the NAND schedule (s).
    pub delta_t: f64,
    /// Worker threads for matcher-internal parallelism; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            geometry: ArrayGeometry::reference(),
            device_params: None,
            perf_params: None,
            matchers: vec![Matcher::Nand, Matcher::Brute, Matcher::Lsh],
            output_dir: None,
            warmup: 1,
            repetitions: 5,
            lsh: LshConfig::default(),
            sense: SenseMode::Compact,
            delta_t: 1e-7,
            threads: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.matchers.is_empty() {
            return Err(BenchError::Config("no matchers selected".into()));
        }
        if self.repetitions < 5 {
            return Err(BenchError::Config(format!("repetitions = {} (at least 5 required)", self.repetitions)));
        }
        if self.threads == Some(0) {
            return Err(BenchError::Config("threads must be at least 1".into()));
        }
        for p in self.device_params.iter().chain(self.perf_params.iter()) {
            if !p.exists() {
                return Err(BenchError::Config(format!("{} does not exist", p.display())));
            }
        }
        self.geometry.validate()?;
        let max = self.geometry.max_patterns();
        if self.dataset.n > max {
            return Err(ArrayError::Capacity { dimension: "patterns", needed: self.dataset.n, available: max }.into());
        }
        self.dataset.validate()?;
        Ok(())
    }

    pub fn device(&self) -> Result<DeviceParams, BenchError> {
        Ok(match &self.device_params {
            Some(p) => DeviceParams::load(p)?,
            None => DeviceParams::default(),
        })
    }

    pub fn perf(&self) -> Result<PerfParams, BenchError> {
        Ok(match &self.perf_params {
            Some(p) => PerfParams::load(p)?,
            None => PerfParams::default(),
        })
    }

    fn has(&self, m: Matcher) -> bool {
        self.matchers.contains(&m)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, BenchError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| BenchError::Config(e.to_string()))
    }
}

/// Median wall-clock seconds of `f` over `reps` runs after `warmup` runs.
pub fn time_median<T>(warmup: usize, reps: usize, mut f: impl FnMut() -> T) -> f64 {
    for _ in 0..warmup {
        std::hint::black_box(f());
    }
    let mut samples: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed().as_secs_f64()
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub threads: usize,
    pub version: String,
}

impl Environment {
    fn capture(threads: usize) -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            threads,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub matcher: Matcher,
    pub query: usize,
    pub latency_s: f64,
    /// `measured` (wall clock) or `modeled` (analytic).
    pub latency_kind: String,
    pub energy_j: Option<f64>,
    pub matches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherSummary {
    pub matcher: Matcher,
    pub latency_kind: String,
    /// Sum over queries, i.e. the sequential-processing time.
    pub total_latency_s: f64,
    pub median_query_latency_s: f64,
    pub total_energy_j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub a: Matcher,
    pub b: Matcher,
    /// Queries on which the two match sets are identical.
    pub equal: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NandModel {
    pub per_query: PerfReport,
    pub total_latency_s: f64,
    pub total_energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub patterns: usize,
    pub queries: usize,
    pub seed: u64,
    pub matchers: Vec<Matcher>,
    pub environment: Environment,
    pub rows: Vec<QueryRow>,
    pub summaries: Vec<MatcherSummary>,
    pub nand: Option<NandModel>,
    pub agreement: Vec<Agreement>,
    pub match_counts: Vec<(Matcher, Vec<usize>)>,
    /// Share of brute-force matches that LSH also returns.
    pub lsh_recall: Option<f64>,
    /// Measured brute-force latency divided by modeled NAND latency.
    pub brute_over_nand_latency: Option<f64>,
    pub nand_equals_brute: Option<bool>,
}

impl BenchReport {
    /// Copy with every wall-clock-derived value zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.rows {
            if row.latency_kind == "measured" {
                row.latency_s = 0.0;
            }
        }
        for s in &mut r.summaries {
            if s.latency_kind == "measured" {
                s.total_latency_s = 0.0;
                s.median_query_latency_s = 0.0;
            }
        }
        r.brute_over_nand_latency = None;
        r
    }
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

struct Workload {
    refs: Vec<ReferencePattern>,
    queries: Vec<QueryPattern>,
}

fn workload(cfg: &DatasetConfig) -> Result<Workload, BenchError> {
    let d = generate_dataset(cfg)?;
    Ok(Workload { refs: d.references, queries: d.queries })
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    let device = cfg.device()?;
    let pp = cfg.perf()?;
    let pool = cfg.pool()?;
    let w = workload(&cfg.dataset)?;
    let nq = w.queries.len();

    let mut rows = Vec::new();
    let mut sets: Vec<(Matcher, Vec<BTreeSet<usize>>)> = Vec::new();
    let mut nand = None;

    if cfg.has(Matcher::Nand) {
        let state = program_array(&w.refs, cfg.geometry)?;
        let opts = QueryOptions { delta_t: cfg.delta_t, sense: cfg.sense, threshold: 1.0 };
        let results = pool.install(|| w.queries.iter().map(|q| query(&state, q, &device, &opts)).collect::<Result<Vec<_>, _>>())?;
        let sw = SweepWorkload { active_blocks: state.active_blocks(), steps: state.dims().steps, sense: cfg.sense };
        let per_query = estimate_for_count(&cfg.geometry, state.stored_count(), &sw, &pp)?;
        debug_assert!(results.iter().all(|r| r.sense_rounds == per_query.rounds));
        for (i, r) in results.iter().enumerate() {
            rows.push(QueryRow {
                matcher: Matcher::Nand,
                query: i,
                latency_s: per_query.latency_s,
                latency_kind: "modeled".into(),
                energy_j: Some(per_query.energy_j),
                matches: r.matches.len(),
            });
        }
        nand = Some(NandModel {
            total_latency_s: per_query.latency_s * nq as f64,
            total_energy_j: per_query.energy_j * nq as f64,
            per_query,
        });
        sets.push((Matcher::Nand, results.into_iter().map(|r| r.matches).collect()));
    }

    if cfg.has(Matcher::Brute) {
        let mut found = Vec::with_capacity(nq);
        for (i, q) in w.queries.iter().enumerate() {
            let m = brute_force_match(q, &w.refs)?;
            let t = time_median(cfg.warmup, cfg.repetitions, || brute_force_match(q, &w.refs));
            rows.push(QueryRow { matcher: Matcher::Brute, query: i, latency_s: t, latency_kind: "measured".into(), energy_j: None, matches: m.len() });
            found.push(m);
        }
        sets.push((Matcher::Brute, found));
    }

    if cfg.has(Matcher::Lsh) {
        let index = LshIndex::build(&w.refs, cfg.lsh)?;
        let mut found = Vec::with_capacity(nq);
        for (i, q) in w.queries.iter().enumerate() {
            let m = lsh_query(&index, q)?;
            let t = time_median(cfg.warmup, cfg.repetitions, || lsh_query(&index, q));
            rows.push(QueryRow { matcher: Matcher::Lsh, query: i, latency_s: t, latency_kind: "measured".into(), energy_j: None, matches: m.len() });
            found.push(m);
        }
        sets.push((Matcher::Lsh, found));
    }

    let summaries = sets
        .iter()
        .map(|(m, _)| {
            let lat: Vec<f64> = rows.iter().filter(|r| r.matcher == *m).map(|r| r.latency_s).collect();
            let energy: Option<f64> = if *m == Matcher::Nand { nand.as_ref().map(|n| n.total_energy_j) } else { None };
            MatcherSummary {
                matcher: *m,
                latency_kind: if *m == Matcher::Nand { "modeled" } else { "measured" }.into(),
                total_latency_s: lat.iter().sum(),
                median_query_latency_s: median(&lat),
                total_energy_j: energy,
            }
        })
        .collect::<Vec<_>>();

    let mut agreement = Vec::new();
    for (a, sa) in &sets {
        for (b, sb) in &sets {
            let equal = sa.iter().zip(sb).filter(|(x, y)| x == y).count();
            agreement.push(Agreement { a: *a, b: *b, equal, total: nq });
        }
    }

    let get = |m: Matcher| sets.iter().find(|(x, _)| *x == m).map(|(_, s)| s);
    let lsh_recall = match (get(Matcher::Lsh), get(Matcher::Brute)) {
        (Some(lsh), Some(brute)) => Some(recall(lsh, brute)),
        _ => None,
    };
    let disagreements: Vec<usize> = match (get(Matcher::Nand), get(Matcher::Brute)) {
        (Some(n), Some(b)) => n.iter().zip(b).enumerate().filter(|(_, (x, y))| x != y).map(|(i, _)| i).collect(),
        _ => Vec::new(),
    };
    let nand_equals_brute = (get(Matcher::Nand).is_some() && get(Matcher::Brute).is_some()).then_some(disagreements.is_empty());
    let brute_over_nand_latency = match (summaries.iter().find(|s| s.matcher == Matcher::Brute), &nand) {
        (Some(b), Some(n)) if n.total_latency_s > 0.0 => Some(b.total_latency_s / n.total_latency_s),
        _ => None,
    };

    let report = BenchReport {
        patterns: w.refs.len(),
        queries: nq,
        seed: cfg.dataset.seed,
        matchers: sets.iter().map(|(m, _)| *m).collect(),
        environment: Environment::capture(pool.current_num_threads()),
        rows,
        summaries,
        nand,
        agreement,
        match_counts: sets.iter().map(|(m, s)| (*m, s.iter().map(BTreeSet::len).collect())).collect(),
        lsh_recall,
        brute_over_nand_latency,
        nand_equals_brute,
    };

    if let Some(dir) = &cfg.output_dir {
        write_bench_outputs(dir, &report)?;
    }
    if !disagreements.is_empty() {
        return Err(BenchError::Disagreement(disagreements));
    }
    Ok(report)
}

/// `sum |found n truth| / sum |truth|`; 1.0 when nothing should be found.
pub fn recall(found: &[BTreeSet<usize>], truth: &[BTreeSet<usize>]) -> f64 {
    let hit: usize = found.iter().zip(truth).map(|(f, t)| f.intersection(t).count()).sum();
    let all: usize = truth.iter().map(BTreeSet::len).sum();
    if all == 0 {
        1.0
    } else {
        hit as f64 / all as f64
    }
}

fn write_bench_outputs(dir: &Path, report: &BenchReport) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join("bench_queries.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["matcher", "query", "latency_s", "latency_kind", "energy_j", "matches"])?;
    for r in &report.rows {
        w.write_record([
            r.matcher.name().to_string(),
            r.query.to_string(),
            format!("{:e}", r.latency_s),
            r.latency_kind.clone(),
            r.energy_j.map(|e| format!("{e:e}")).unwrap_or_default(),
            r.matches.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    let json_path = dir.join("bench_summary.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    fs::write(&json_path, text).map_err(io_err(&json_path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub count: usize,
    pub rounds: usize,
    pub nand_latency_s: f64,
    pub nand_energy_j: f64,
    /// Measured seconds for the whole query batch.
    pub brute_wall_s: f64,
    pub lsh_wall_s: Option<f64>,
    pub brute_over_nand_latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepChecks {
    /// Modeled latency bitwise equal for every count sharing a round count.
    pub latency_constant_within_regime: bool,
    /// Modeled latency bitwise equal across the whole sweep.
    pub latency_constant: bool,
    /// Largest two-point-fit residual of energy within any round regime.
    pub energy_affine_residual: f64,
    pub energy_affine: bool,
    /// Brute-force wall clock never drops below `slack` of the previous count
    /// and the largest count is slower than the smallest.
    pub brute_monotone: bool,
    pub brute_monotone_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub counts: Vec<usize>,
    pub queries: usize,
    pub environment: Environment,
    pub rows: Vec<SweepRow>,
    pub checks: SweepChecks,
}

pub const MONOTONE_SLACK: f64 = 0.8;

pub fn run_sweep(cfg: &BenchConfig, counts: &[usize]) -> Result<SweepReport, BenchError> {
    if counts.is_empty() {
        return Err(BenchError::Config("no sweep counts".into()));
    }
    let max = *counts.iter().max().unwrap();
    if counts.contains(&0) {
        return Err(BenchError::Config("sweep counts must be positive".into()));
    }
    let mut big = cfg.clone();
    big.dataset.n = max;
    big.validate()?;
    let pp = big.perf()?;
    let pool = big.pool()?;
    let w = workload(&big.dataset)?;
    let steps = w.refs[0].dims().steps;
    let pixels = w.refs[0].dims().pixels();
    if pixels > cfg.geometry.blocks {
        return Err(ArrayError::Capacity { dimension: "blocks", needed: pixels, available: cfg.geometry.blocks }.into());
    }
    let sw = SweepWorkload { active_blocks: pixels, steps, sense: cfg.sense };

    let mut rows = Vec::with_capacity(counts.len());
    for &count in counts {
        let model = estimate_for_count(&cfg.geometry, count, &sw, &pp)?;
        let refs = &w.refs[..count];
        let brute_wall_s = pool.install(|| {
            time_median(cfg.warmup, cfg.repetitions, || {
                w.queries.iter().map(|q| brute_force_match(q, refs).map(|m| m.len())).collect::<Result<Vec<_>, _>>()
            })
        });
        let lsh_wall_s = if cfg.has(Matcher::Lsh) {
            let index = LshIndex::build(refs, cfg.lsh)?;
            Some(time_median(cfg.warmup, cfg.repetitions, || {
                w.queries.iter().map(|q| lsh_query(&index, q).map(|m| m.len())).collect::<Result<Vec<_>, _>>()
            }))
        } else {
            None
        };
        let nand_batch = model.latency_s * w.queries.len() as f64;
        rows.push(SweepRow {
            count,
            rounds: model.rounds,
            nand_latency_s: model.latency_s,
            nand_energy_j: model.energy_j,
            brute_wall_s,
            lsh_wall_s,
            brute_over_nand_latency: if nand_batch > 0.0 { brute_wall_s / nand_batch } else { f64::INFINITY },
        });
    }

    let checks = sweep_checks(&rows, MONOTONE_SLACK);
    let report = SweepReport {
        counts: counts.to_vec(),
        queries: w.queries.len(),
        environment: Environment::capture(pool.current_num_threads()),
        rows,
        checks,
    };
    if let Some(dir) = &cfg.output_dir {
        write_sweep_outputs(dir, &report)?;
    }
    Ok(report)
}

pub fn sweep_checks(rows: &[SweepRow], slack: f64) -> SweepChecks {
    let mut regimes = std::collections::BTreeMap::<usize, Vec<&SweepRow>>::new();
    for r in rows {
        regimes.entry(r.rounds).or_default().push(r);
    }
    let latency_constant_within_regime = regimes
        .values()
        .all(|rs| rs.iter().all(|r| r.nand_latency_s.to_bits() == rs[0].nand_latency_s.to_bits()));
    let latency_constant = rows.iter().all(|r| r.nand_latency_s.to_bits() == rows[0].nand_latency_s.to_bits());
    let energy_affine_residual = regimes
        .values()
        .map(|rs| {
            let mut pts: Vec<(f64, f64)> = rs.iter().map(|r| (r.count as f64, r.nand_energy_j)).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts.dedup_by(|a, b| a.0 == b.0);
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            two_point_residual(&xs, &ys)
        })
        .fold(0.0, f64::max);
    let mut by_count: Vec<&SweepRow> = rows.iter().collect();
    by_count.sort_by_key(|r| r.count);
    let brute_monotone = by_count.windows(2).all(|w| w[1].brute_wall_s >= slack * w[0].brute_wall_s)
        && (by_count.len() < 2 || by_count.last().unwrap().brute_wall_s > by_count[0].brute_wall_s);
    SweepChecks {
        latency_constant_within_regime,
        latency_constant,
        energy_affine_residual,
        energy_affine: energy_affine_residual == 0.0,
        brute_monotone,
        brute_monotone_slack: slack,
    }
}

fn write_sweep_outputs(dir: &Path, report: &SweepReport) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["count", "rounds", "nand_latency_s", "nand_energy_j", "brute_wall_s", "lsh_wall_s", "brute_over_nand_latency"])?;
    for r in &report.rows {
        w.write_record([
            r.count.to_string(),
            r.rounds.to_string(),
            format!("{:e}", r.nand_latency_s),
            format!("{:e}", r.nand_energy_j),
            format!("{:e}", r.brute_wall_s),
            r.lsh_wall_s.map(|t| format!("{t:e}")).unwrap_or_default(),
            format!("{:e}", r.brute_over_nand_latency),
        ])?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    let json_path = dir.join("sweep_summary.json");
    let text = serde_json::to_string_pretty(report).expect("sweep serializes") + "\n";
    fs::write(&json_path, text).map_err(io_err(&json_path))
}
