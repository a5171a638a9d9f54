//! Analytic latency/energy model of one array query.
//!
//! Per sensing round every active block drives its full word-line stack (two
//! pulses per time step plus one per pass word line), senses each occupied
//! bit line and pays a fixed block overhead:
//!
//! ```text
//! latency = rounds * (wl_sequence_latency + bl_sense_latency)
//! energy  = rounds * active_blocks * (wl_pulses * wl_pulse_energy
//!                                     + active_bls * bl_sense_energy
//!                                     + block_overhead_energy)
//! wl_pulses = 2 * steps + (wl - 2 * steps)
//! ```
//!
//! Latency has no dependence on how many bit lines are active. The shipped
//! parameter values are placeholders; absolute numbers must be calibrated.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{ArrayGeometry, SenseMode};

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("{name} = {value} must be finite and non-negative")]
    Negative { name: &'static str, value: f64 },
    #[error("{what} = {value} exceeds the geometry bound {bound}")]
    Bound { what: &'static str, value: usize, bound: usize },
    #[error("failed to read perf config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse perf config: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Per-operation costs. Energies in joules, latencies in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfParams {
    pub wl_pulse_energy: f64,
    pub bl_sense_energy: f64,
    pub wl_sequence_latency: f64,
    pub bl_sense_latency: f64,
    pub block_overhead_energy: f64,
}

impl Default for PerfParams {
    /// Uncalibrated placeholders. Powers of two keep sweep arithmetic exact.
    fn default() -> Self {
        Self {
            wl_pulse_energy: 2f64.powi(-40),       // ~0.91 pJ
            bl_sense_energy: 2f64.powi(-44),       // ~57 fJ
            wl_sequence_latency: 2f64.powi(-20),   // ~0.95 us
            bl_sense_latency: 2f64.powi(-22),      // ~0.24 us
            block_overhead_energy: 2f64.powi(-36), // ~15 pJ
        }
    }
}

impl PerfParams {
    pub fn validate(&self) -> Result<(), PerfError> {
        for (name, value) in [
            ("wl_pulse_energy", self.wl_pulse_energy),
            ("bl_sense_energy", self.bl_sense_energy),
            ("wl_sequence_latency", self.wl_sequence_latency),
            ("bl_sense_latency", self.bl_sense_latency),
            ("block_overhead_energy", self.block_overhead_energy),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(PerfError::Negative { name, value });
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, PerfError> {
        let p: PerfParams = toml::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PerfError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| PerfError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub wl: f64,
    pub bl_sense: f64,
    pub block_overhead: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.wl + self.bl_sense + self.block_overhead
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub latency_s: f64,
    pub energy_j: f64,
    pub breakdown: EnergyBreakdown,
    pub active_blocks: usize,
    /// Bit lines sensed per block, summed over rounds.
    pub active_bls: usize,
    pub rounds: usize,
    /// Word-line pulses per block per round.
    pub wl_pulses: usize,
}

impl PerfReport {
    fn accumulate(&mut self, other: &PerfReport) {
        self.latency_s += other.latency_s;
        self.breakdown.wl += other.breakdown.wl;
        self.breakdown.bl_sense += other.breakdown.bl_sense;
        self.breakdown.block_overhead += other.breakdown.block_overhead;
        self.energy_j = self.breakdown.total();
        self.active_bls += other.active_bls;
        self.rounds += other.rounds;
    }
}

fn bound(what: &'static str, value: usize, bound: usize) -> Result<(), PerfError> {
    if value > bound {
        return Err(PerfError::Bound { what, value, bound });
    }
    Ok(())
}

pub fn estimate_query(
    g: &ArrayGeometry,
    active_blocks: usize,
    active_bls_per_block: usize,
    rounds: usize,
    steps: usize,
    pp: &PerfParams,
) -> Result<PerfReport, PerfError> {
    pp.validate()?;
    bound("active_blocks", active_blocks, g.blocks)?;
    bound("active_bls_per_block", active_bls_per_block, g.bl)?;
    bound("rounds", rounds, g.dsl)?;
    bound("steps", steps, g.max_steps())?;
    let wl_pulses = 2 * steps + (g.wl - 2 * steps);
    let block_rounds = (rounds * active_blocks) as f64;
    let breakdown = EnergyBreakdown {
        wl: block_rounds * wl_pulses as f64 * pp.wl_pulse_energy,
        bl_sense: block_rounds * active_bls_per_block as f64 * pp.bl_sense_energy,
        block_overhead: block_rounds * pp.block_overhead_energy,
    };
    Ok(PerfReport {
        latency_s: rounds as f64 * (pp.wl_sequence_latency + pp.bl_sense_latency),
        energy_j: breakdown.total(),
        breakdown,
        active_blocks,
        active_bls: rounds * active_bls_per_block,
        rounds,
        wl_pulses,
    })
}

/// Fixed part of a pattern-count sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepWorkload {
    pub active_blocks: usize,
    pub steps: usize,
    pub sense: SenseMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub count: usize,
    pub report: PerfReport,
}

/// Models a query against `count` stored patterns laid out one DSL at a time.
pub fn estimate_for_count(g: &ArrayGeometry, count: usize, w: &SweepWorkload, pp: &PerfParams) -> Result<PerfReport, PerfError> {
    bound("patterns", count, g.max_patterns())?;
    let occupied = count.div_ceil(g.bl);
    let rounds = match w.sense {
        SenseMode::Compact => occupied,
        SenseMode::Full => g.dsl,
    };
    let mut total = estimate_query(g, w.active_blocks, 0, 0, w.steps, pp)?;
    for round in 0..rounds {
        let on_this_dsl = count.saturating_sub(round * g.bl).min(g.bl);
        total.accumulate(&estimate_query(g, w.active_blocks, on_this_dsl, 1, w.steps, pp)?);
    }
    Ok(total)
}

pub fn sweep_patterns(g: &ArrayGeometry, counts: &[usize], w: &SweepWorkload, pp: &PerfParams) -> Result<Vec<SweepPoint>, PerfError> {
    counts
        .iter()
        .map(|&count| Ok(SweepPoint { count, report: estimate_for_count(g, count, w, pp)? }))
        .collect()
}

/// Largest absolute deviation of `ys` from the line through the first and last points.
pub fn two_point_residual(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 3 {
        return 0.0;
    }
    let (x0, y0) = (xs[0], ys[0]);
    let (x1, y1) = (xs[xs.len() - 1], ys[ys.len() - 1]);
    let slope = (y1 - y0) / (x1 - x0);
    xs.iter().zip(ys).map(|(&x, &y)| (y - (y0 + slope * (x - x0))).abs()).fold(0.0, f64::max)
}
