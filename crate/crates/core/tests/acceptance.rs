//! Acceptance criteria. Runs every criterion, prints one PASS/FAIL line per
//! criterion with its wall time, and exits non-zero if any fails or overruns
//! its time budget.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnand_stpm::array::{program_array, query, ArrayGeometry, Dims, QueryOptions, QueryPattern, ReferencePattern, SenseMode};
use vnand_stpm::baselines::{brute_force_match, lsh_query, LshConfig, LshIndex};
use vnand_stpm::bench::{run_benchmark, run_sweep, BenchConfig, Matcher};
use vnand_stpm::datagen::{generate_dataset, DatasetConfig, LifNeuron, LifParams};
use vnand_stpm::device::{cell_conducts, cell_current, DeviceParams, InputSymbol, StoredSymbol};
use vnand_stpm::perf::{sweep_patterns, two_point_residual, PerfParams, SweepWorkload};
use vnand_stpm::string::{build_pulse_schedule, program_string, simulate_string, string_match_oracle};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Symbolic match rule written out independently of the device model.
fn symbolic(s: StoredSymbol, x: InputSymbol) -> bool {
    matches!(
        (s, x),
        (StoredSymbol::DontCare, _)
            | (StoredSymbol::Plus, InputSymbol::Plus)
            | (StoredSymbol::Minus, InputSymbol::Minus)
            | (StoredSymbol::Zero, InputSymbol::Zero)
    )
}

fn ac1_truth_table() -> Result<String, String> {
    let p = DeviceParams::default();
    let mut high = 0;
    for s in StoredSymbol::ALL {
        for x in InputSymbol::ALL {
            let on = cell_conducts(s, x, &p);
            ensure(on == symbolic(s, x), format!("cell ({s},{x}) conducts={on}"))?;
            let i = cell_current(s, x, &p);
            ensure((i > p.current.sense_threshold) == on, format!("cell ({s},{x}) current {i:e}"))?;
            high += on as usize;
        }
    }
    ensure(high == 6, format!("{high} high-current cases, expected 6"))?;
    Ok("12 cases, 6 high (3 matches + 3 with X)".into())
}

fn ac2_string_scenarios() -> Result<String, String> {
    use InputSymbol as I;
    let p = DeviceParams::default();
    let prog = program_string(&[StoredSymbol::Plus, StoredSymbol::Plus], 5).map_err(|e| e.to_string())?;
    ensure(prog.pass_cells == 1, "expected one pass FeFET")?;
    let run = |input: &[I]| simulate_string(&prog, &build_pulse_schedule(input, 1e-6).unwrap(), &p).unwrap();
    let hit = run(&[I::Plus, I::Plus]);
    let miss = run(&[I::Plus, I::Minus]);
    ensure(hit.conducts && hit.bl_current > p.current.sense_threshold, "(+1,+1) should conduct")?;
    ensure(!miss.conducts && miss.bl_current < p.current.sense_threshold, "(+1,-1) should block")?;
    Ok(format!("match {:.1e} A, mismatch {:.1e} A", hit.bl_current, miss.bl_current))
}

fn ac3_timing_equals_logic() -> Result<String, String> {
    let p = DeviceParams::default();
    let check = |stored: &[StoredSymbol], input: &[InputSymbol]| -> Result<(), String> {
        let prog = program_string(stored, 2 * stored.len() + 1).unwrap();
        let sched = build_pulse_schedule(input, 1.0).unwrap();
        let sim = simulate_string(&prog, &sched, &p).unwrap().conducts;
        let oracle = string_match_oracle(stored, input).unwrap();
        ensure(sim == oracle, format!("{stored:?} vs {input:?}: sim {sim}, oracle {oracle}"))
    };
    let mut exhaustive = 0usize;
    for n in 1..=3u32 {
        for si in 0..4usize.pow(n) {
            let stored: Vec<StoredSymbol> = (0..n).map(|k| StoredSymbol::ALL[si / 4usize.pow(k) % 4]).collect();
            for xi in 0..3usize.pow(n) {
                let input: Vec<InputSymbol> = (0..n).map(|k| InputSymbol::ALL[xi / 3usize.pow(k) % 3]).collect();
                check(&stored, &input)?;
                exhaustive += 1;
            }
        }
    }
    ensure(exhaustive == 12 + 144 + 1728, format!("{exhaustive} exhaustive cases"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=16);
        // bias towards matches so both outcomes are well represented
        let input: Vec<InputSymbol> = (0..n).map(|_| InputSymbol::ALL[rng.gen_range(0..3)]).collect();
        let stored: Vec<StoredSymbol> = input
            .iter()
            .map(|&x| match rng.gen_range(0..10) {
                0..=5 => StoredSymbol::from(x),
                6..=7 => StoredSymbol::DontCare,
                _ => StoredSymbol::ALL[rng.gen_range(0..4)],
            })
            .collect();
        hits += string_match_oracle(&stored, &input).unwrap() as usize;
        check(&stored, &input)?;
    }
    ensure(hits > 100 && hits < 9_900, format!("degenerate random mix: {hits} matches"))?;
    Ok(format!("{exhaustive} exhaustive + 10000 random ({hits} matching)"))
}

fn ac4_end_to_end() -> Result<String, String> {
    let cfg = DatasetConfig { n: 500, queries: 100, seed: 42, ..DatasetConfig::default() };
    let d = generate_dataset(&cfg).map_err(|e| e.to_string())?;
    ensure(d.dims == Dims { height: 8, width: 8, steps: 10 }, "default workload is 8x8x10")?;
    let state = program_array(&d.references, ArrayGeometry::reference()).map_err(|e| e.to_string())?;
    let p = DeviceParams::default();
    let mut nonempty = 0;
    for (i, q) in d.queries.iter().enumerate() {
        let nand = query(&state, q, &p, &QueryOptions::default()).map_err(|e| e.to_string())?.matches;
        let brute = brute_force_match(q, &d.references).map_err(|e| e.to_string())?;
        ensure(nand == brute, format!("query {i}: nand {nand:?} vs brute {brute:?}"))?;
        nonempty += !brute.is_empty() as usize;
    }
    ensure(nonempty > 0 && nonempty < 100, format!("{nonempty} of 100 queries matched; workload is degenerate"))?;
    Ok(format!("100/100 queries identical ({nonempty} with matches)"))
}

fn sweep_workload() -> SweepWorkload {
    SweepWorkload { active_blocks: 64, steps: 10, sense: SenseMode::Compact }
}

const SWEEP: [usize; 4] = [50, 100, 200, 500];

fn ac5_constant_latency() -> Result<String, String> {
    let pts = sweep_patterns(&ArrayGeometry::reference(), &SWEEP, &sweep_workload(), &PerfParams::default()).map_err(|e| e.to_string())?;
    let first = pts[0].report.latency_s;
    for pt in &pts {
        ensure(pt.report.rounds == 1, format!("count {} spans {} DSL rounds", pt.count, pt.report.rounds))?;
        ensure(pt.report.latency_s.to_bits() == first.to_bits(), format!("count {}: {:e} != {first:e}", pt.count, pt.report.latency_s))?;
    }
    Ok(format!("latency {first:e} s for counts {SWEEP:?}"))
}

fn ac6_linear_energy() -> Result<String, String> {
    let pts = sweep_patterns(&ArrayGeometry::reference(), &SWEEP, &sweep_workload(), &PerfParams::default()).map_err(|e| e.to_string())?;
    let xs: Vec<f64> = pts.iter().map(|p| p.count as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.report.energy_j).collect();
    let residual = two_point_residual(&xs, &ys);
    ensure(residual == 0.0, format!("affine residual {residual:e}"))?;
    ensure(ys.windows(2).all(|w| w[1] > w[0]), "energy must grow with count")?;
    Ok(format!("residual 0, energy {:.3e}..{:.3e} J", ys[0], ys[3]))
}

fn ac7_lif_first_spike() -> Result<String, String> {
    let p = LifParams { tau_m: 5e-3, v_threshold: 0.85, ..LifParams::default() };
    let mut worst: f64 = 0.0;
    for drive in [1.0, 1.5, 3.0] {
        let mut n = LifNeuron::new(p).map_err(|e| e.to_string())?;
        let t = n.spike_times(std::iter::repeat_n(drive, 1000));
        let first = *t.first().ok_or("no spike")?;
        let expected = -p.tau_m * (1.0 - p.v_threshold / drive).ln();
        let err = (first - expected).abs();
        ensure(err <= p.dt, format!("drive {drive}: {first:e} vs {expected:e}"))?;
        worst = worst.max(err);
    }
    Ok(format!("worst error {:.3} dt", worst / p.dt))
}

fn ac8_lsh_soundness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dims = Dims { height: 3, width: 3, steps: 4 };
    let mut candidates = 0;
    for trial in 0..1000u64 {
        let n = rng.gen_range(1..40);
        let p_x = rng.gen_range(0.0..0.6);
        let refs: Vec<ReferencePattern> = (0..n)
            .map(|_| {
                let s = (0..dims.len())
                    .map(|_| if rng.gen_bool(p_x) { StoredSymbol::DontCare } else { StoredSymbol::ALL[rng.gen_range(0..3)] })
                    .collect();
                ReferencePattern::new(dims, s).unwrap()
            })
            .collect();
        let index = LshIndex::build(&refs, LshConfig { k: 32, bands: 8, rows: 4, seed: trial }).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let q = if rng.gen_bool(0.5) {
                let src = &refs[rng.gen_range(0..n)];
                QueryPattern::new(dims, src.symbols().iter().map(|&s| match s {
                    StoredSymbol::Plus => InputSymbol::Plus,
                    StoredSymbol::Minus => InputSymbol::Minus,
                    StoredSymbol::Zero => InputSymbol::Zero,
                    StoredSymbol::DontCare => InputSymbol::ALL[rng.gen_range(0..3)],
                }).collect())
                .unwrap()
            } else {
                QueryPattern::new(dims, (0..dims.len()).map(|_| InputSymbol::ALL[rng.gen_range(0..3)]).collect()).unwrap()
            };
            let lsh = lsh_query(&index, &q).map_err(|e| e.to_string())?;
            let brute = brute_force_match(&q, &refs).map_err(|e| e.to_string())?;
            ensure(lsh.is_subset(&brute), format!("trial {trial}: lsh {lsh:?} not within brute {brute:?}"))?;
            candidates += lsh.len();
        }
    }
    ensure(candidates > 0, "LSH never returned anything")?;
    let cfg = BenchConfig { matchers: vec![Matcher::Brute, Matcher::Lsh], ..BenchConfig::default() };
    let report = run_benchmark(&cfg).map_err(|e| e.to_string())?;
    let recall = report.lsh_recall.ok_or("benchmark summary lacks LSH recall")?;
    Ok(format!("1000 datasets sound; default-workload recall {recall:.4}"))
}

fn ac9_latency_vs_cpu() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let geometry = ArrayGeometry::reference();
    for _ in 0..20 {
        let pp = PerfParams {
            wl_pulse_energy: rng.gen_range(1e-15..1e-9),
            bl_sense_energy: rng.gen_range(1e-16..1e-10),
            wl_sequence_latency: rng.gen_range(1e-9..1e-4),
            bl_sense_latency: rng.gen_range(1e-9..1e-4),
            block_overhead_energy: rng.gen_range(1e-14..1e-9),
        };
        let pts = sweep_patterns(&geometry, &SWEEP, &sweep_workload(), &pp).map_err(|e| e.to_string())?;
        ensure(pts.iter().all(|p| p.report.latency_s.to_bits() == pts[0].report.latency_s.to_bits()), "latency depends on count")?;
    }
    let cfg = BenchConfig { repetitions: 9, matchers: vec![Matcher::Nand, Matcher::Brute], ..BenchConfig::default() };
    let sweep = run_sweep(&cfg, &SWEEP).map_err(|e| e.to_string())?;
    ensure(sweep.checks.latency_constant, "modeled NAND latency not constant")?;
    ensure(sweep.checks.brute_monotone, format!("brute-force wall clock not monotone: {:?}", sweep.rows.iter().map(|r| r.brute_wall_s).collect::<Vec<_>>()))?;
    let ratios: Vec<String> = sweep.rows.iter().map(|r| format!("{}:{:.2e}", r.count, r.brute_over_nand_latency)).collect();
    Ok(format!("brute/NAND latency ratio (placeholder params) {}", ratios.join(" ")))
}

fn ac10_gen_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_stpm"))
            .args(["gen", "--n", "500", "--queries", "20", "--seed", "42", "--out-dir"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), format!("gen failed: {}", String::from_utf8_lossy(&status.stderr)))?;
        let refs = std::fs::read(out.join("references.json")).map_err(|e| e.to_string())?;
        let queries = std::fs::read(out.join("queries.json")).map_err(|e| e.to_string())?;
        outputs.push((refs, queries));
    }
    ensure(outputs[0] == outputs[1], "dataset files differ between runs")?;
    Ok(format!("{} + {} bytes identical", outputs[0].0.len(), outputs[0].1.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, Check, Duration); 10] = [
        ("AC1", "cell truth table", ac1_truth_table, Duration::from_secs(1)),
        ("AC2", "string match/mismatch", ac2_string_scenarios, Duration::from_secs(1)),
        ("AC3", "timing vs logic equivalence", ac3_timing_equals_logic, Duration::from_secs(30)),
        ("AC4", "end-to-end NAND vs brute force", ac4_end_to_end, Duration::from_secs(120)),
        ("AC5", "constant modeled latency", ac5_constant_latency, Duration::from_secs(1)),
        ("AC6", "affine modeled energy", ac6_linear_energy, Duration::from_secs(1)),
        ("AC7", "LIF first-spike time", ac7_lif_first_spike, Duration::from_secs(1)),
        ("AC8", "LSH soundness and recall", ac8_lsh_soundness, Duration::from_secs(60)),
        ("AC9", "latency independence vs CPU scaling", ac9_latency_vs_cpu, Duration::from_secs(60)),
        ("AC10", "gen determinism", ac10_gen_determinism, Duration::from_secs(10)),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = BTreeSet::new();
    for (id, name, check, budget) in criteria {
        if filter.as_deref().is_some_and(|f| !id.eq_ignore_ascii_case(f) && !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(_) if elapsed > budget => ("FAIL", format!("took {elapsed:.2?}, budget {budget:?}")),
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed.insert(id);
        }
        println!("{status} {id:<4} {name:<38} {elapsed:>10.2?}  {detail}");
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}
