//! `stpm`: dataset generation, array programming, single queries, benchmarks
//! and pattern-count sweeps.
//!
//! Exit codes: 0 ok, 1 usage/config, 2 capacity, 3 NAND/brute-force disagreement.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vnand_stpm::array::{program_array, query, ArrayDump, ArrayGeometry, PatternFile, QueryOptions, SenseMode};
use vnand_stpm::baselines::LshConfig;
use vnand_stpm::bench::{run_benchmark, run_sweep, BenchConfig, BenchError, Matcher};
use vnand_stpm::datagen::{generate_dataset, DatasetConfig};
use vnand_stpm::device::DeviceParams;

#[derive(Parser, Debug)]
#[command(name = "stpm", version, about = "Spatiotemporal pattern matching on vertical NAND: simulator and benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate reference and query pattern files.
    Gen {
        #[command(flatten)]
        data: DataArgs,
        /// Directory receiving references.json and queries.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Program references into an array and dump it.
    Program {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long, default_value = "64,3,32,13824", value_parser = parse_geometry)]
        geometry: ArrayGeometry,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run queries against a dumped array.
    Query {
        #[arg(long)]
        array: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Only run this query (0-based); default runs all.
        #[arg(long)]
        index: Option<usize>,
        #[arg(long)]
        device: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SenseArg::Compact)]
        sense: SenseArg,
        /// Fraction of blocks that must hit for a match.
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
    },
    /// Full benchmark: NAND model vs brute force vs LSH.
    Bench {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Pattern-count sweep of latency and energy.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,500")]
        counts: Vec<usize>,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Number of reference patterns.
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    queries: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Square grid side length.
    #[arg(long, default_value_t = 8)]
    grid: usize,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = 0.1)]
    jitter: f64,
    /// Polarity flip probability.
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 0.5)]
    cross_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    perturbed_fraction: f64,
    #[arg(long, default_value_t = 0.05)]
    background: f64,
}

impl DataArgs {
    fn config(&self) -> DatasetConfig {
        DatasetConfig {
            n: self.n,
            queries: self.queries,
            seed: self.seed,
            grid: self.grid,
            steps: self.steps,
            jitter: self.jitter,
            flip: self.noise,
            cross_fraction: self.cross_fraction,
            perturbed_fraction: self.perturbed_fraction,
            background: self.background,
            ..DatasetConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value = "64,3,32,13824", value_parser = parse_geometry)]
    geometry: ArrayGeometry,
    #[arg(long)]
    device: Option<PathBuf>,
    #[arg(long)]
    perf: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "nand,brute,lsh")]
    matchers: Vec<Matcher>,
    #[arg(long, default_value = "bench_out")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = SenseArg::Compact)]
    sense: SenseArg,
    #[arg(long, default_value_t = 128)]
    lsh_k: usize,
    #[arg(long, default_value_t = 32)]
    lsh_bands: usize,
    #[arg(long, default_value_t = 4)]
    lsh_rows: usize,
}

impl RunArgs {
    fn config(&self, data: &DataArgs) -> BenchConfig {
        BenchConfig {
            dataset: data.config(),
            geometry: self.geometry,
            device_params: self.device.clone(),
            perf_params: self.perf.clone(),
            matchers: self.matchers.clone(),
            output_dir: Some(self.out_dir.clone()),
            warmup: self.warmup,
            repetitions: self.reps,
            lsh: LshConfig { k: self.lsh_k, bands: self.lsh_bands, rows: self.lsh_rows, seed: data.seed },
            sense: self.sense.into(),
            threads: self.threads,
            ..BenchConfig::default()
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum SenseArg {
    Compact,
    Full,
}

impl From<SenseArg> for SenseMode {
    fn from(s: SenseArg) -> Self {
        match s {
            SenseArg::Compact => SenseMode::Compact,
            SenseArg::Full => SenseMode::Full,
        }
    }
}

fn parse_geometry(s: &str) -> Result<ArrayGeometry, String> {
    let parts: Vec<usize> = s
        .split([',', 'x'])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [b, d, w, l] => ArrayGeometry::new(b, d, w, l).map_err(|e| e.to_string()),
        _ => Err("expected blocks,dsl,wl,bl".into()),
    }
}

fn run(cmd: Command) -> Result<(), BenchError> {
    match cmd {
        Command::Gen { data, out_dir } => {
            let d = generate_dataset(&data.config())?;
            std::fs::create_dir_all(&out_dir).map_err(|source| BenchError::Io { path: out_dir.display().to_string(), source })?;
            d.reference_file().save(out_dir.join("references.json"))?;
            d.query_file().save(out_dir.join("queries.json"))?;
            println!("wrote {} references and {} queries to {}", d.references.len(), d.queries.len(), out_dir.display());
        }
        Command::Program { refs, geometry, out } => {
            let file = PatternFile::load(&refs)?;
            let state = program_array(&file.references()?, geometry)?;
            ArrayDump::new(geometry, file).save(&out)?;
            println!(
                "programmed {} patterns of {} into {} blocks ({} DSL in use)",
                state.stored_count(),
                state.dims(),
                state.active_blocks(),
                state.occupied_dsls()
            );
        }
        Command::Query { array, queries, index, device, sense, threshold } => {
            let state = ArrayDump::load(&array)?.program()?;
            let qs = PatternFile::load(&queries)?.queries()?;
            let p = match device {
                Some(path) => DeviceParams::load(path)?,
                None => DeviceParams::default(),
            };
            let opts = QueryOptions { sense: sense.into(), threshold, ..QueryOptions::default() };
            let selected: Vec<usize> = match index {
                Some(i) if i < qs.len() => vec![i],
                Some(i) => return Err(BenchError::Config(format!("query index {i} out of range ({} queries)", qs.len()))),
                None => (0..qs.len()).collect(),
            };
            let mut out = std::io::stdout().lock();
            for i in selected {
                let r = query(&state, &qs[i], &p, &opts)?;
                let line = serde_json::json!({ "query": i, "matches": r.matches, "sense_rounds": r.sense_rounds });
                if writeln!(out, "{line}").is_err() {
                    // reader went away (e.g. piped into `head`)
                    break;
                }
            }
        }
        Command::Bench { data, run } => {
            let cfg = run.config(&data);
            let outcome = run_benchmark(&cfg);
            if let Ok(r) = &outcome {
                for s in &r.summaries {
                    println!(
                        "{:<6} {:<8} total {:.3e} s  median/query {:.3e} s{}",
                        s.matcher.name(),
                        s.latency_kind,
                        s.total_latency_s,
                        s.median_query_latency_s,
                        s.total_energy_j.map(|e| format!("  energy {e:.3e} J")).unwrap_or_default()
                    );
                }
                if let Some(recall) = r.lsh_recall {
                    println!("lsh recall vs brute force: {recall:.4}");
                }
                if let Some(ratio) = r.brute_over_nand_latency {
                    println!("brute-force / NAND latency ratio (placeholder calibration): {ratio:.3e}");
                }
                println!("outputs in {}", cfg.output_dir.as_ref().unwrap().display());
            }
            outcome?;
        }
        Command::Sweep { data, run, counts } => {
            let cfg = run.config(&data);
            let r = run_sweep(&cfg, &counts)?;
            println!("count  rounds  nand_latency_s  nand_energy_j  brute_wall_s  ratio");
            for row in &r.rows {
                println!(
                    "{:>5}  {:>6}  {:>14.6e}  {:>13.6e}  {:>12.6e}  {:.3e}",
                    row.count, row.rounds, row.nand_latency_s, row.nand_energy_j, row.brute_wall_s, row.brute_over_nand_latency
                );
            }
            let c = &r.checks;
            println!("latency_constant_within_regime: {}", pass(c.latency_constant_within_regime));
            println!("energy_affine: {} (residual {:e})", pass(c.energy_affine), c.energy_affine_residual);
            println!("brute_monotone: {}", pass(c.brute_monotone));
        }
    }
    Ok(())
}

fn pass(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
