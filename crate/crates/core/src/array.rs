//! Block / DSL / WL / BL organization and parallel queries.
//!
//! Every pixel owns one block (row-major order). Reference pattern `j` lives
//! in the same string slot of every block: DSL `j / bl`, bit line `j % bl`.
//! A query broadcasts one pulse schedule per block and reads back which slots
//! carry a high bit-line current. A pattern matches when its slot is high in
//! enough blocks (all of them by default).

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceError, DeviceParams, InputSymbol, StoredSymbol};
use crate::string::{build_pulse_schedule, program_string, simulate_string, StringError, StringProgram};

#[derive(Debug, Error)]
pub enum ArrayError {
    #[error("geometry dimension `{0}` must be at least 1")]
    ZeroDimension(&'static str),
    #[error("capacity exceeded on {dimension}: need {needed}, have {available}")]
    Capacity { dimension: &'static str, needed: usize, available: usize },
    #[error("pattern dimensions {got} do not match {expected}")]
    DimensionMismatch { expected: Dims, got: Dims },
    #[error("pattern has {got} symbols, expected {expected}")]
    SymbolCount { expected: usize, got: usize },
    #[error("no references to program")]
    NoReferences,
    #[error("no blocks to aggregate")]
    NoBlocks,
    #[error("hits for block {0} are missing")]
    MissingBlock(usize),
    #[error("match threshold {0} must lie in (0, 1]")]
    Threshold(f64),
    #[error(transparent)]
    String(#[from] StringError),
    #[error(transparent)]
    Symbol(#[from] DeviceError),
    #[error("pixel {pixel}: expected {expected} symbols, got {got}")]
    PixelLength { pixel: usize, expected: usize, got: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed pattern document: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub blocks: usize,
    pub dsl: usize,
    pub wl: usize,
    pub bl: usize,
}

impl ArrayGeometry {
    pub fn new(blocks: usize, dsl: usize, wl: usize, bl: usize) -> Result<Self, ArrayError> {
        let g = Self { blocks, dsl, wl, bl };
        g.validate()?;
        Ok(g)
    }

    /// 64 blocks x 3 DSL x 32 WL x 13824 BL.
    pub fn reference() -> Self {
        Self { blocks: 64, dsl: 3, wl: 32, bl: 13824 }
    }

    pub fn validate(&self) -> Result<(), ArrayError> {
        for (name, v) in [("blocks", self.blocks), ("dsl", self.dsl), ("wl", self.wl), ("bl", self.bl)] {
            if v == 0 {
                return Err(ArrayError::ZeroDimension(name));
            }
        }
        Ok(())
    }

    pub fn max_steps(&self) -> usize {
        self.wl / 2
    }

    pub fn max_patterns(&self) -> usize {
        self.dsl * self.bl
    }

    pub fn slot_of(&self, pattern: usize) -> Slot {
        Slot { dsl: pattern / self.bl, bl: pattern % self.bl }
    }

    pub fn pattern_of(&self, slot: Slot) -> usize {
        slot.dsl * self.bl + slot.bl
    }
}

/// `(max_steps, max_patterns_per_pixel_block)`.
pub fn capacity(g: &ArrayGeometry) -> (usize, usize) {
    (g.max_steps(), g.max_patterns())
}

/// String position within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    pub dsl: usize,
    pub bl: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
    pub steps: usize,
}

impl Dims {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.pixels() * self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.steps)
    }
}

/// Pixels x time steps grid of symbols, stored pixel-major (row-major pixels).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpatiotemporalPattern<S> {
    dims: Dims,
    symbols: Vec<S>,
}

pub type ReferencePattern = SpatiotemporalPattern<StoredSymbol>;
pub type QueryPattern = SpatiotemporalPattern<InputSymbol>;

impl<S: Copy> SpatiotemporalPattern<S> {
    pub fn new(dims: Dims, symbols: Vec<S>) -> Result<Self, ArrayError> {
        if symbols.len() != dims.len() {
            return Err(ArrayError::SymbolCount { expected: dims.len(), got: symbols.len() });
        }
        Ok(Self { dims, symbols })
    }

    pub fn filled(dims: Dims, s: S) -> Self {
        Self { dims, symbols: vec![s; dims.len()] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn symbols(&self) -> &[S] {
        &self.symbols
    }

    /// Time sequence of one pixel.
    pub fn pixel(&self, pixel: usize) -> &[S] {
        let n = self.dims.steps;
        &self.symbols[pixel * n..(pixel + 1) * n]
    }

    pub fn get(&self, pixel: usize, step: usize) -> S {
        self.symbols[pixel * self.dims.steps + step]
    }

    pub fn set(&mut self, pixel: usize, step: usize, s: S) {
        self.symbols[pixel * self.dims.steps + step] = s;
    }
}

/// Programmed array. Immutable once built.
#[derive(Debug, Clone)]
pub struct ArrayState {
    geometry: ArrayGeometry,
    dims: Dims,
    /// `pixel_of_block[b]` is the pixel hosted by block `b`, if any.
    pixel_of_block: Vec<Option<usize>>,
    /// `programs[pixel][pattern]`; the slot follows from the pattern index.
    programs: Vec<Vec<StringProgram>>,
    stored_count: usize,
}

impl ArrayState {
    pub fn geometry(&self) -> ArrayGeometry {
        self.geometry
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn stored_count(&self) -> usize {
        self.stored_count
    }

    pub fn pixel_of_block(&self, block: usize) -> Option<usize> {
        self.pixel_of_block.get(block).copied().flatten()
    }

    pub fn active_blocks(&self) -> usize {
        self.dims.pixels()
    }

    /// Number of DSLs holding at least one pattern.
    pub fn occupied_dsls(&self) -> usize {
        self.stored_count.div_ceil(self.geometry.bl)
    }

    pub fn program_at(&self, block: usize, slot: Slot) -> Option<&StringProgram> {
        let pixel = self.pixel_of_block(block)?;
        if slot.dsl >= self.geometry.dsl || slot.bl >= self.geometry.bl {
            return None;
        }
        self.programs[pixel].get(self.geometry.pattern_of(slot))
    }
}

pub fn program_array(refs: &[ReferencePattern], g: ArrayGeometry) -> Result<ArrayState, ArrayError> {
    g.validate()?;
    let first = refs.first().ok_or(ArrayError::NoReferences)?;
    let dims = first.dims();
    if let Some(bad) = refs.iter().find(|r| r.dims() != dims) {
        return Err(ArrayError::DimensionMismatch { expected: dims, got: bad.dims() });
    }
    if dims.pixels() > g.blocks {
        return Err(ArrayError::Capacity { dimension: "blocks", needed: dims.pixels(), available: g.blocks });
    }
    if dims.steps > g.max_steps() {
        return Err(ArrayError::Capacity { dimension: "steps", needed: dims.steps, available: g.max_steps() });
    }
    if refs.len() > g.max_patterns() {
        return Err(ArrayError::Capacity { dimension: "patterns", needed: refs.len(), available: g.max_patterns() });
    }
    let programs = (0..dims.pixels())
        .map(|pixel| refs.iter().map(|r| program_string(r.pixel(pixel), g.wl)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let pixel_of_block = (0..g.blocks).map(|b| (b < dims.pixels()).then_some(b)).collect();
    Ok(ArrayState { geometry: g, dims, pixel_of_block, programs, stored_count: refs.len() })
}

/// How many DSL sensing rounds a query performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenseMode {
    /// Only DSLs that hold patterns are sensed.
    #[default]
    Compact,
    /// Every DSL is sensed.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOptions {
    pub delta_t: f64,
    pub sense: SenseMode,
    /// Fraction of blocks that must report a hit for a pattern to match.
    pub threshold: f64,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self { delta_t: 1e-7, sense: SenseMode::Compact, threshold: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryResult {
    /// Indexed by block; only blocks hosting a pixel are present.
    pub per_block_hits: Vec<BTreeSet<Slot>>,
    pub matches: BTreeSet<usize>,
    pub sense_rounds: usize,
}

pub fn query(state: &ArrayState, q: &QueryPattern, p: &DeviceParams, opts: &QueryOptions) -> Result<QueryResult, ArrayError> {
    if q.dims() != state.dims {
        return Err(ArrayError::DimensionMismatch { expected: state.dims, got: q.dims() });
    }
    let g = state.geometry;
    let per_block_hits = (0..state.active_blocks())
        .into_par_iter()
        .map(|block| {
            let pixel = state.pixel_of_block(block).expect("active blocks host pixels");
            let sched = build_pulse_schedule(q.pixel(pixel), opts.delta_t)?;
            let mut hits = BTreeSet::new();
            for (j, prog) in state.programs[pixel].iter().enumerate() {
                if simulate_string(prog, &sched, p)?.conducts {
                    hits.insert(g.slot_of(j));
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>, ArrayError>>()?;
    let wrapped: Vec<Option<BTreeSet<Slot>>> = per_block_hits.iter().cloned().map(Some).collect();
    let matches = aggregate(&wrapped, &g, opts.threshold)?;
    let sense_rounds = match opts.sense {
        SenseMode::Full => g.dsl,
        SenseMode::Compact => state.occupied_dsls(),
    };
    Ok(QueryResult { per_block_hits, matches, sense_rounds })
}

/// Cross-block vote: a slot matches when it is high in at least
/// `threshold` of the blocks (every block when `threshold == 1`).
pub fn aggregate(per_block_hits: &[Option<BTreeSet<Slot>>], g: &ArrayGeometry, threshold: f64) -> Result<BTreeSet<usize>, ArrayError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(ArrayError::Threshold(threshold));
    }
    if per_block_hits.is_empty() {
        return Err(ArrayError::NoBlocks);
    }
    let blocks: Vec<&BTreeSet<Slot>> = per_block_hits
        .iter()
        .enumerate()
        .map(|(i, h)| h.as_ref().ok_or(ArrayError::MissingBlock(i)))
        .collect::<Result<_, _>>()?;
    let total = blocks.len();
    if threshold == 1.0 {
        let mut iter = blocks.iter();
        let mut acc: BTreeSet<Slot> = (*iter.next().unwrap()).clone();
        for h in iter {
            acc.retain(|s| h.contains(s));
        }
        return Ok(acc.into_iter().map(|s| g.pattern_of(s)).collect());
    }
    let mut counts = std::collections::BTreeMap::<Slot, usize>::new();
    for h in &blocks {
        for &s in h.iter() {
            *counts.entry(s).or_default() += 1;
        }
    }
    Ok(counts
        .into_iter()
        .filter(|&(_, c)| c as f64 >= threshold * total as f64)
        .map(|(s, _)| g.pattern_of(s))
        .collect())
}

// ---------------------------------------------------------------------------
// Pattern files

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub id: String,
    /// One string per pixel, one character per step.
    pub symbols: Vec<String>,
}

/// JSON pattern document. References use `+-0X`, queries `+-0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternFile {
    pub height: usize,
    pub width: usize,
    pub steps: usize,
    pub patterns: Vec<PatternRecord>,
}

/// Pattern document plus the geometry it was programmed into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayDump {
    pub geometry: ArrayGeometry,
    pub height: usize,
    pub width: usize,
    pub steps: usize,
    pub patterns: Vec<PatternRecord>,
}

fn encode_record<S: Copy>(id: String, p: &SpatiotemporalPattern<S>, to_char: impl Fn(S) -> char) -> PatternRecord {
    let symbols = (0..p.dims().pixels()).map(|px| p.pixel(px).iter().map(|&s| to_char(s)).collect()).collect();
    PatternRecord { id, symbols }
}

fn decode_record<S: Copy>(
    rec: &PatternRecord,
    dims: Dims,
    from_char: impl Fn(char) -> Result<S, DeviceError>,
) -> Result<SpatiotemporalPattern<S>, ArrayError> {
    if rec.symbols.len() != dims.pixels() {
        return Err(ArrayError::SymbolCount { expected: dims.pixels(), got: rec.symbols.len() });
    }
    let mut out = Vec::with_capacity(dims.len());
    for (pixel, s) in rec.symbols.iter().enumerate() {
        let before = out.len();
        for c in s.chars() {
            out.push(from_char(c)?);
        }
        if out.len() - before != dims.steps {
            return Err(ArrayError::PixelLength { pixel, expected: dims.steps, got: out.len() - before });
        }
    }
    SpatiotemporalPattern::new(dims, out)
}

impl PatternFile {
    pub fn dims(&self) -> Dims {
        Dims { height: self.height, width: self.width, steps: self.steps }
    }

    fn from_patterns<S: Copy>(dims: Dims, pats: &[SpatiotemporalPattern<S>], to_char: impl Fn(S) -> char + Copy) -> Self {
        Self {
            height: dims.height,
            width: dims.width,
            steps: dims.steps,
            patterns: pats.iter().enumerate().map(|(i, p)| encode_record(i.to_string(), p, to_char)).collect(),
        }
    }

    pub fn from_references(dims: Dims, refs: &[ReferencePattern]) -> Self {
        Self::from_patterns(dims, refs, StoredSymbol::as_char)
    }

    pub fn from_queries(dims: Dims, queries: &[QueryPattern]) -> Self {
        Self::from_patterns(dims, queries, InputSymbol::as_char)
    }

    pub fn references(&self) -> Result<Vec<ReferencePattern>, ArrayError> {
        self.patterns.iter().map(|r| decode_record(r, self.dims(), StoredSymbol::from_char)).collect()
    }

    pub fn queries(&self) -> Result<Vec<QueryPattern>, ArrayError> {
        self.patterns.iter().map(|r| decode_record(r, self.dims(), InputSymbol::from_char)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pattern file serializes") + "\n"
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArrayError> {
        let text = read(path.as_ref())?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ArrayError> {
        write(path.as_ref(), &self.to_json())
    }
}

impl ArrayDump {
    pub fn new(geometry: ArrayGeometry, file: PatternFile) -> Self {
        Self { geometry, height: file.height, width: file.width, steps: file.steps, patterns: file.patterns }
    }

    pub fn pattern_file(&self) -> PatternFile {
        PatternFile { height: self.height, width: self.width, steps: self.steps, patterns: self.patterns.clone() }
    }

    /// Rebuilds the programmed array.
    pub fn program(&self) -> Result<ArrayState, ArrayError> {
        program_array(&self.pattern_file().references()?, self.geometry)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("array dump serializes") + "\n"
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArrayError> {
        let text = read(path.as_ref())?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ArrayError> {
        write(path.as_ref(), &self.to_json())
    }
}

fn read(path: &Path) -> Result<String, ArrayError> {
    std::fs::read_to_string(path).map_err(|source| ArrayError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> Result<(), ArrayError> {
    std::fs::write(path, text).map_err(|source| ArrayError::Io { path: path.display().to_string(), source })
}
