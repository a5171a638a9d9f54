//! Synthetic event-camera workload.
//!
//! A flashing `x` or `+` stimulus drives one LIF neuron per pixel. Threshold
//! crossings become ON (+1) events, drops in drive intensity become OFF (-1)
//! events, and both are binned into uniform time steps. Reference patterns
//! keep the shape's pixels (`+`, `-` or `0` per step) and mask every other
//! pixel as don't-care. Per-pattern variation comes from seeded timing jitter
//! and polarity flips; queries are copies of references with controlled
//! perturbations.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{Dims, PatternFile, QueryPattern, ReferencePattern};
use crate::device::{InputSymbol, StoredSymbol};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid LIF parameters: {0}")]
    LifParams(String),
    #[error("integration step {dt} s exceeds tau_m/10 = {limit} s")]
    AccuracyGuard { dt: f64, limit: f64 },
    #[error("unsupported shape {0:?} (expected `cross` or `plus`)")]
    Shape(String),
    #[error("grid must be square and non-empty, got {0}x{1}")]
    Grid(usize, usize),
    #[error("invalid knob {name} = {value}")]
    Knob { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane time constant (s).
    pub tau_m: f64,
    pub v_threshold: f64,
    pub v_rest: f64,
    pub v_reset: f64,
    /// Integration step (s).
    pub dt: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self { tau_m: 5e-3, v_threshold: 0.85, v_rest: 0.0, v_reset: 0.0, dt: 1e-4 }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if !(self.tau_m > 0.0) {
            return Err(DatagenError::LifParams(format!("tau_m = {} must be positive", self.tau_m)));
        }
        if !(self.dt > 0.0) {
            return Err(DatagenError::LifParams(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.v_threshold > self.v_rest) {
            return Err(DatagenError::LifParams(format!(
                "v_threshold = {} must exceed v_rest = {}",
                self.v_threshold, self.v_rest
            )));
        }
        let limit = self.tau_m / 10.0;
        if self.dt > limit {
            return Err(DatagenError::AccuracyGuard { dt: self.dt, limit });
        }
        Ok(())
    }
}

/// Single LIF membrane: `tau dv/dt = (v_rest - v) + drive`.
///
/// The drive is held constant across each step, so the exponential update
/// below solves the step exactly.
#[derive(Debug, Clone)]
pub struct LifNeuron {
    p: LifParams,
    decay: f64,
    v: f64,
}

impl LifNeuron {
    pub fn new(p: LifParams) -> Result<Self, DatagenError> {
        p.validate()?;
        Ok(Self { p, decay: (-p.dt / p.tau_m).exp(), v: p.v_rest })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Advances one `dt`; returns true if the neuron fired (and was reset).
    pub fn step(&mut self, drive: f64) -> bool {
        let target = self.p.v_rest + drive;
        self.v = target + (self.v - target) * self.decay;
        if self.v >= self.p.v_threshold {
            self.v = self.p.v_reset;
            true
        } else {
            false
        }
    }

    /// Spike times (end of the firing step) for a drive sampled at each step.
    pub fn spike_times(&mut self, drive: impl IntoIterator<Item = f64>) -> Vec<f64> {
        let dt = self.p.dt;
        drive
            .into_iter()
            .enumerate()
            .filter_map(|(k, i)| self.step(i).then_some((k + 1) as f64 * dt))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Cross,
    Plus,
}

impl FromStr for Shape {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cross" | "x" => Ok(Shape::Cross),
            "plus" | "+" => Ok(Shape::Plus),
            other => Err(DatagenError::Shape(other.to_string())),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Cross => "cross",
            Shape::Plus => "plus",
        })
    }
}

/// Active pixels of a shape on an `n x n` grid, row-major.
///
/// `cross` covers both diagonals. `plus` covers the centre row and column,
/// or the two centre rows and columns when `n` is even.
pub fn shape_mask(shape: Shape, n: usize) -> Vec<bool> {
    let centre = |i: usize| if n.is_multiple_of(2) { i + 1 == n / 2 || i == n / 2 } else { i == n / 2 };
    (0..n * n)
        .map(|k| {
            let (r, c) = (k / n, k % n);
            match shape {
                Shape::Cross => r == c || r + c == n - 1,
                Shape::Plus => centre(r) || centre(c),
            }
        })
        .collect()
}

/// Time base and envelope of a shape stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusTiming {
    pub steps: usize,
    /// Width of one time step (s).
    pub bin_width: f64,
    /// On/off flashing envelope, one entry per step; repeats if shorter.
    pub envelope: Vec<bool>,
    /// Drive grows by this fraction from the grid centre to its corners.
    pub radial_gain: f64,
}

impl Default for StimulusTiming {
    fn default() -> Self {
        Self {
            steps: 10,
            bin_width: 10e-3,
            envelope: vec![true, true, true, false, false],
            radial_gain: 0.25,
        }
    }
}

/// Per-pixel drive, piecewise constant over time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub shape: Shape,
    pub height: usize,
    pub width: usize,
    pub steps: usize,
    pub bin_width: f64,
    /// `drive[pixel * steps + step]`; zero on masked pixels.
    pub drive: Vec<f64>,
}

impl Stimulus {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn pixel_drive(&self, pixel: usize) -> &[f64] {
        &self.drive[pixel * self.steps..(pixel + 1) * self.steps]
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.pixels()).map(|p| self.pixel_drive(p).iter().any(|&d| d != 0.0)).collect()
    }

    /// Constant drive on every pixel; mostly useful for tests.
    pub fn constant(height: usize, width: usize, steps: usize, bin_width: f64, amplitude: f64) -> Self {
        Self { shape: Shape::Cross, height, width, steps, bin_width, drive: vec![amplitude; height * width * steps] }
    }
}

pub fn make_shape_stimulus(shape: &str, grid: (usize, usize), amplitude: f64) -> Result<Stimulus, DatagenError> {
    make_shape_stimulus_with(shape.parse()?, grid, amplitude, &StimulusTiming::default())
}

pub fn make_shape_stimulus_with(shape: Shape, grid: (usize, usize), amplitude: f64, timing: &StimulusTiming) -> Result<Stimulus, DatagenError> {
    let (h, w) = grid;
    if h != w || h == 0 {
        return Err(DatagenError::Grid(h, w));
    }
    if timing.envelope.is_empty() {
        return Err(DatagenError::Knob { name: "envelope length", value: 0.0 });
    }
    let n = h;
    let mask = shape_mask(shape, n);
    let mid = (n as f64 - 1.0) / 2.0;
    let max_r = (2.0 * mid * mid).sqrt().max(f64::EPSILON);
    let mut drive = vec![0.0; n * n * timing.steps];
    for (pixel, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (r, c) = ((pixel / n) as f64, (pixel % n) as f64);
        let radius = ((r - mid).powi(2) + (c - mid).powi(2)).sqrt();
        let gain = 1.0 + timing.radial_gain * radius / max_r;
        for step in 0..timing.steps {
            if timing.envelope[step % timing.envelope.len()] {
                drive[pixel * timing.steps + step] = amplitude * gain;
            }
        }
    }
    Ok(Stimulus { shape, height: h, width: w, steps: timing.steps, bin_width: timing.bin_width, drive })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    pub fn flipped(self) -> Self {
        match self {
            Polarity::On => Polarity::Off,
            Polarity::Off => Polarity::On,
        }
    }

    pub fn symbol(self) -> InputSymbol {
        match self {
            Polarity::On => InputSymbol::Plus,
            Polarity::Off => InputSymbol::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub pixel: usize,
    pub step: usize,
    pub polarity: Polarity,
}

/// Binned events, at most one per `(pixel, step)`, sorted by pixel then step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    pub height: usize,
    pub width: usize,
    pub steps: usize,
    pub events: Vec<SpikeEvent>,
}

impl SpikeTrain {
    /// Dense `pixel * steps + step` view.
    pub fn grid(&self) -> Vec<Option<Polarity>> {
        let mut g = vec![None; self.height * self.width * self.steps];
        for e in &self.events {
            g[e.pixel * self.steps + e.step] = Some(e.polarity);
        }
        g
    }

    fn from_grid(height: usize, width: usize, steps: usize, grid: &[Option<Polarity>]) -> Self {
        let events = grid
            .iter()
            .enumerate()
            .filter_map(|(k, e)| e.map(|polarity| SpikeEvent { pixel: k / steps, step: k % steps, polarity }))
            .collect();
        Self { height, width, steps, events }
    }
}

pub fn lif_simulate(stim: &Stimulus, p: &LifParams) -> Result<SpikeTrain, DatagenError> {
    p.validate()?;
    let ticks_per_bin = ((stim.bin_width / p.dt).round() as usize).max(1);
    let mut grid = vec![None; stim.pixels() * stim.steps];
    for pixel in 0..stim.pixels() {
        let drive = stim.pixel_drive(pixel);
        let mut neuron = LifNeuron::new(*p)?;
        for step in 0..stim.steps {
            let fired = (0..ticks_per_bin).fold(false, |acc, _| neuron.step(drive[step]) | acc);
            let offset = step > 0 && drive[step] < drive[step - 1];
            // OFF takes the bin when both occur
            grid[pixel * stim.steps + step] = if offset {
                Some(Polarity::Off)
            } else if fired {
                Some(Polarity::On)
            } else {
                None
            };
        }
    }
    Ok(SpikeTrain::from_grid(stim.height, stim.width, stim.steps, &grid))
}

/// Masked reference: shape pixels carry `+`/`-`/`0`, all others `X`.
pub fn reference_from_train(train: &SpikeTrain, mask: &[bool]) -> ReferencePattern {
    let dims = Dims { height: train.height, width: train.width, steps: train.steps };
    let grid = train.grid();
    let symbols = grid
        .iter()
        .enumerate()
        .map(|(k, e)| {
            if !mask[k / train.steps] {
                StoredSymbol::DontCare
            } else {
                e.map_or(StoredSymbol::Zero, |pol| pol.symbol().into())
            }
        })
        .collect();
    ReferencePattern::new(dims, symbols).expect("grid matches dims")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n: usize,
    pub queries: usize,
    pub grid: usize,
    pub steps: usize,
    pub seed: u64,
    /// Probability that a reference uses the `x` shape rather than `+`.
    pub cross_fraction: f64,
    /// Per-event probability of a one-step timing shift.
    pub jitter: f64,
    /// Per-event probability of a polarity flip.
    pub flip: f64,
    pub amplitude: f64,
    pub bin_width: f64,
    pub lif: LifParams,
    /// Fraction of queries that receive `query_mutations` symbol changes on the shape.
    pub perturbed_fraction: f64,
    pub query_mutations: usize,
    /// Per-(pixel, step) probability of a spurious event on masked pixels.
    pub background: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n: 500,
            queries: 20,
            grid: 8,
            steps: 10,
            seed: 42,
            cross_fraction: 0.5,
            jitter: 0.1,
            flip: 0.02,
            amplitude: 1.0,
            bin_width: 10e-3,
            lif: LifParams::default(),
            perturbed_fraction: 0.5,
            query_mutations: 1,
            background: 0.05,
        }
    }
}

impl DatasetConfig {
    pub fn dims(&self) -> Dims {
        Dims { height: self.grid, width: self.grid, steps: self.steps }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.n == 0 {
            return Err(DatagenError::Knob { name: "n", value: 0.0 });
        }
        if self.grid == 0 {
            return Err(DatagenError::Grid(0, 0));
        }
        if self.steps == 0 {
            return Err(DatagenError::Knob { name: "steps", value: 0.0 });
        }
        for (name, value) in [
            ("cross_fraction", self.cross_fraction),
            ("jitter", self.jitter),
            ("flip", self.flip),
            ("perturbed_fraction", self.perturbed_fraction),
            ("background", self.background),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(DatagenError::Knob { name, value });
            }
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(DatagenError::Knob { name: "amplitude", value: self.amplitude });
        }
        if !(self.bin_width > 0.0) {
            return Err(DatagenError::Knob { name: "bin_width", value: self.bin_width });
        }
        self.lif.validate()
    }

    fn timing(&self) -> StimulusTiming {
        StimulusTiming { steps: self.steps, bin_width: self.bin_width, ..StimulusTiming::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dims: Dims,
    pub references: Vec<ReferencePattern>,
    pub shapes: Vec<Shape>,
    pub queries: Vec<QueryPattern>,
    /// Reference each query was derived from.
    pub query_sources: Vec<usize>,
    pub query_perturbed: Vec<bool>,
}

impl Dataset {
    pub fn reference_file(&self) -> PatternFile {
        let mut f = PatternFile::from_references(self.dims, &self.references);
        for (j, rec) in f.patterns.iter_mut().enumerate() {
            rec.id = format!("r{j:04}-{}", self.shapes[j]);
        }
        f
    }

    pub fn query_file(&self) -> PatternFile {
        let mut f = PatternFile::from_queries(self.dims, &self.queries);
        for (q, rec) in f.patterns.iter_mut().enumerate() {
            let tag = if self.query_perturbed[q] { "perturbed" } else { "clean" };
            rec.id = format!("q{q:04}-r{:04}-{tag}", self.query_sources[q]);
        }
        f
    }
}

/// Independent generator for substream `stream` of `seed`.
fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Clean (unperturbed) LIF event train of a shape under the dataset timing.
pub fn clean_train(shape: Shape, cfg: &DatasetConfig) -> Result<SpikeTrain, DatagenError> {
    let stim = make_shape_stimulus_with(shape, (cfg.grid, cfg.grid), cfg.amplitude, &cfg.timing())?;
    lif_simulate(&stim, &cfg.lif)
}

/// Applies per-event jitter and polarity noise. Shifts that leave the time
/// range or land on an occupied bin are dropped (the event stays put).
fn perturb_train(train: &SpikeTrain, jitter: f64, flip: f64, rng: &mut impl Rng) -> SpikeTrain {
    let steps = train.steps;
    let mut grid = train.grid();
    for e in &train.events {
        let mut at = e.pixel * steps + e.step;
        if rng.gen_bool(jitter) {
            let forward = rng.gen_bool(0.5);
            let target = if forward { e.step + 1 } else { e.step.wrapping_sub(1) };
            if target < steps && grid[e.pixel * steps + target].is_none() {
                let t = e.pixel * steps + target;
                grid[t] = grid[at].take();
                at = t;
            }
        }
        if rng.gen_bool(flip) {
            grid[at] = grid[at].map(Polarity::flipped);
        }
    }
    SpikeTrain::from_grid(train.height, train.width, steps, &grid)
}

fn random_other(current: InputSymbol, rng: &mut impl Rng) -> InputSymbol {
    let others: Vec<InputSymbol> = InputSymbol::ALL.into_iter().filter(|&x| x != current).collect();
    others[rng.gen_range(0..others.len())]
}

pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Dataset, DatagenError> {
    cfg.validate()?;
    let dims = cfg.dims();
    let cross = clean_train(Shape::Cross, cfg)?;
    let plus = clean_train(Shape::Plus, cfg)?;
    let cross_mask = shape_mask(Shape::Cross, cfg.grid);
    let plus_mask = shape_mask(Shape::Plus, cfg.grid);

    let (references, shapes): (Vec<_>, Vec<_>) = (0..cfg.n)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(cfg.seed, j as u64);
            let shape = if rng.gen_bool(cfg.cross_fraction) { Shape::Cross } else { Shape::Plus };
            let (train, mask) = match shape {
                Shape::Cross => (&cross, &cross_mask),
                Shape::Plus => (&plus, &plus_mask),
            };
            let varied = perturb_train(train, cfg.jitter, cfg.flip, &mut rng);
            (reference_from_train(&varied, mask), shape)
        })
        .unzip();

    let queries: Vec<(QueryPattern, usize, bool)> = (0..cfg.queries)
        .into_par_iter()
        .map(|q| {
            let mut rng = substream(cfg.seed, (cfg.n + q) as u64);
            let source = rng.gen_range(0..cfg.n);
            let r = &references[source];
            let mut symbols: Vec<InputSymbol> = Vec::with_capacity(dims.len());
            let mut shape_cells = Vec::new();
            for (k, &s) in r.symbols().iter().enumerate() {
                let x = match s {
                    StoredSymbol::DontCare => {
                        if rng.gen_bool(cfg.background) {
                            if rng.gen_bool(0.5) {
                                InputSymbol::Plus
                            } else {
                                InputSymbol::Minus
                            }
                        } else {
                            InputSymbol::Zero
                        }
                    }
                    StoredSymbol::Plus => InputSymbol::Plus,
                    StoredSymbol::Minus => InputSymbol::Minus,
                    StoredSymbol::Zero => InputSymbol::Zero,
                };
                if s != StoredSymbol::DontCare {
                    shape_cells.push(k);
                }
                symbols.push(x);
            }
            let perturbed = rng.gen_bool(cfg.perturbed_fraction) && cfg.query_mutations > 0 && !shape_cells.is_empty();
            if perturbed {
                for _ in 0..cfg.query_mutations {
                    let k = shape_cells[rng.gen_range(0..shape_cells.len())];
                    symbols[k] = random_other(symbols[k], &mut rng);
                }
            }
            (QueryPattern::new(dims, symbols).expect("dims"), source, perturbed)
        })
        .collect();

    let mut query_list = Vec::with_capacity(queries.len());
    let mut query_sources = Vec::with_capacity(queries.len());
    let mut query_perturbed = Vec::with_capacity(queries.len());
    for (q, s, p) in queries {
        query_list.push(q);
        query_sources.push(s);
        query_perturbed.push(p);
    }
    Ok(Dataset { dims, references, shapes, queries: query_list, query_sources, query_perturbed })
}
