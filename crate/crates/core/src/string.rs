//! One NAND string evaluated under a pulse-width schedule.
//!
//! Cell `i` (1-based, counted from the input side) is pulsed for `(N+1-i)`
//! ticks of width Δt. Pulses are triggered by consecutive spikes, so pulse `i`
//! starts at tick `i-1` and every pulse ends at tick `N`. The string carries
//! current only during ticks where every FeFET, including pass cells, is on.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::device::{encode_input, encode_stored, pair_conducts, CellPair, DeviceParams, InputSymbol, ReadVoltage, StoredSymbol};

#[derive(Debug, Error)]
pub enum StringError {
    #[error("reference of {steps} steps needs {needed} word lines, string has {wl_count}")]
    Capacity { steps: usize, needed: usize, wl_count: usize },
    #[error("input sequence is empty")]
    EmptySequence,
    #[error("schedule has {pulses} pulses but program has {cells} cells")]
    LengthMismatch { pulses: usize, cells: usize },
    #[error("trace output failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Programmed contents of one string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringProgram {
    /// Index 0 is the input (source) side.
    pub cells: Vec<CellPair>,
    /// Trailing word lines left at VTH0L and held at VR0H.
    pub pass_cells: usize,
}

impl StringProgram {
    pub fn steps(&self) -> usize {
        self.cells.len()
    }

    pub fn word_lines(&self) -> usize {
        2 * self.cells.len() + self.pass_cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GatePulse {
    /// Start tick, in units of Δt.
    pub start: u32,
    /// Width in ticks; always >= 1.
    pub width: u32,
    pub voltage_pair: (ReadVoltage, ReadVoltage),
}

impl GatePulse {
    pub fn end(&self) -> u32 {
        self.start + self.width
    }

    pub fn active_at(&self, tick: u32) -> bool {
        tick >= self.start && tick < self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSchedule {
    pub pulses: Vec<GatePulse>,
    /// Unit pulse width in seconds.
    pub delta_t: f64,
}

impl PulseSchedule {
    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Number of Δt ticks covered by the schedule.
    pub fn horizon(&self) -> u32 {
        self.pulses.iter().map(GatePulse::end).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StringDecision {
    pub conducts: bool,
    /// Ticks `[start, end)` where the whole string is on.
    pub conduction_window: Option<(u32, u32)>,
    pub bl_current: f64,
}

pub fn program_string(ref_seq: &[StoredSymbol], wl_count: usize) -> Result<StringProgram, StringError> {
    let needed = 2 * ref_seq.len();
    if needed > wl_count {
        return Err(StringError::Capacity { steps: ref_seq.len(), needed, wl_count });
    }
    Ok(StringProgram {
        cells: ref_seq.iter().map(|&s| encode_stored(s)).collect(),
        pass_cells: wl_count - needed,
    })
}

pub fn build_pulse_schedule(input_seq: &[InputSymbol], delta_t: f64) -> Result<PulseSchedule, StringError> {
    let n = input_seq.len() as u32;
    if n == 0 {
        return Err(StringError::EmptySequence);
    }
    let pulses = input_seq
        .iter()
        .zip(1u32..)
        .map(|(&x, i)| GatePulse { start: i - 1, width: n + 1 - i, voltage_pair: encode_input(x) })
        .collect();
    Ok(PulseSchedule { pulses, delta_t })
}

/// Gate voltages `(a, b)` seen by a programmed cell at `tick`.
fn gate_pair(pulse: &GatePulse, tick: u32, p: &DeviceParams) -> (f64, f64) {
    if pulse.active_at(tick) {
        (p.read_voltage(pulse.voltage_pair.0), p.read_voltage(pulse.voltage_pair.1))
    } else {
        (p.gate.idle, p.gate.idle)
    }
}

fn pass_conducts(p: &DeviceParams) -> bool {
    let vr0h = p.read_voltage(ReadVoltage::Vr0H);
    pair_conducts(CellPair::PASS, vr0h, vr0h, p)
}

fn tick_all_on(prog: &StringProgram, sched: &PulseSchedule, p: &DeviceParams, tick: u32, pass_on: bool) -> bool {
    if prog.pass_cells > 0 && !pass_on {
        return false;
    }
    prog.cells.iter().zip(&sched.pulses).all(|(&cell, pulse)| {
        let (ga, gb) = gate_pair(pulse, tick, p);
        pair_conducts(cell, ga, gb, p)
    })
}

fn check_lengths(prog: &StringProgram, sched: &PulseSchedule) -> Result<(), StringError> {
    if prog.cells.len() != sched.pulses.len() {
        return Err(StringError::LengthMismatch { pulses: sched.pulses.len(), cells: prog.cells.len() });
    }
    Ok(())
}

/// Tick-by-tick evaluation over `[0, N)`.
pub fn simulate_string(prog: &StringProgram, sched: &PulseSchedule, p: &DeviceParams) -> Result<StringDecision, StringError> {
    check_lengths(prog, sched)?;
    let pass_on = pass_conducts(p);
    let mut window: Option<(u32, u32)> = None;
    for tick in 0..sched.horizon() {
        if tick_all_on(prog, sched, p, tick, pass_on) {
            window = Some(match window {
                Some((start, _)) => (start, tick + 1),
                None => (tick, tick + 1),
            });
        }
    }
    let conducts = window.is_some();
    Ok(StringDecision {
        conducts,
        conduction_window: window,
        bl_current: if conducts { p.current.on } else { p.current.off },
    })
}

/// Logical reference: every position either stores `X` or equals the input.
pub fn string_match_oracle(ref_seq: &[StoredSymbol], input_seq: &[InputSymbol]) -> Result<bool, StringError> {
    if ref_seq.len() != input_seq.len() {
        return Err(StringError::LengthMismatch { pulses: input_seq.len(), cells: ref_seq.len() });
    }
    Ok(ref_seq.iter().zip(input_seq).all(|(&s, &x)| s.accepts(x)))
}

/// One row of a debugging trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: u32,
    /// Conduction of FeFETs in string order: a1, b1, a2, b2, ..., then pass cells.
    pub fefet_on: Vec<bool>,
    pub string_current: f64,
}

pub fn trace_string(prog: &StringProgram, sched: &PulseSchedule, p: &DeviceParams) -> Result<Vec<TraceRow>, StringError> {
    check_lengths(prog, sched)?;
    let pass_on = pass_conducts(p);
    let rows = (0..sched.horizon())
        .map(|tick| {
            let mut bits = Vec::with_capacity(prog.word_lines());
            for (&cell, pulse) in prog.cells.iter().zip(&sched.pulses) {
                let (ga, gb) = gate_pair(pulse, tick, p);
                bits.push(crate::device::fefet_conducts(cell.vth_a, ga, p));
                bits.push(crate::device::fefet_conducts(cell.vth_b, gb, p));
            }
            bits.extend(std::iter::repeat_n(pass_on, prog.pass_cells));
            let on = bits.iter().all(|&b| b);
            TraceRow { tick, fefet_on: bits, string_current: if on { p.current.on } else { p.current.off } }
        })
        .collect();
    Ok(rows)
}

/// Writes a trace as CSV: `tick,wl0,wl1,...,current`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<(), StringError> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = rows.first() {
        let mut header = vec!["tick".to_string()];
        header.extend((0..first.fefet_on.len()).map(|i| format!("wl{i}")));
        header.push("current".into());
        w.write_record(&header)?;
    }
    for r in rows {
        let mut rec = vec![r.tick.to_string()];
        rec.extend(r.fefet_on.iter().map(|&b| if b { "1".to_string() } else { "0".to_string() }));
        rec.push(format!("{:e}", r.string_current));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
