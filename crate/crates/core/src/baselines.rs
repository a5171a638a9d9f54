//! Software matchers: exhaustive brute force and MinHash/LSH pre-filtering.
//!
//! Brute force is the reference semantics for every other matcher. The LSH
//! index hashes each pattern's event set, collects candidates whose band
//! keys collide with the query, and then verifies every candidate exactly, so
//! it can miss matches but never report a false one.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{ArrayError, Dims, PatternFile, QueryPattern, ReferencePattern};
use crate::device::{InputSymbol, StoredSymbol};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("pattern dimensions {got} do not match {expected}")]
    DimensionMismatch { expected: Dims, got: Dims },
    #[error("signature length must be at least 1")]
    EmptySignature,
    #[error("bands x rows = {bands} x {rows} does not equal k = {k}")]
    Banding { k: usize, bands: usize, rows: usize },
    #[error("signature has {got} values, index expects {expected}")]
    SignatureLength { expected: usize, got: usize },
    #[error("unsupported snapshot {format:?} version {version}")]
    Snapshot { format: String, version: u32 },
    #[error("snapshot I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed snapshot: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Pattern(#[from] ArrayError),
}

pub fn brute_force_match(query: &QueryPattern, refs: &[ReferencePattern]) -> Result<BTreeSet<usize>, BaselineError> {
    let mut out = BTreeSet::new();
    for (j, r) in refs.iter().enumerate() {
        if r.dims() != query.dims() {
            return Err(BaselineError::DimensionMismatch { expected: query.dims(), got: r.dims() });
        }
        if matches_exactly(query, r) {
            out.insert(j);
        }
    }
    Ok(out)
}

fn matches_exactly(query: &QueryPattern, r: &ReferencePattern) -> bool {
    r.symbols().iter().zip(query.symbols()).all(|(&s, &x)| s.accepts(x))
}

/// Packed `(pixel, step, polarity)` triples of a pattern's `+`/`-` entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventSet(BTreeSet<u64>);

fn pack(pixel: usize, step: usize, positive: bool) -> u64 {
    ((pixel as u64) << 32) | ((step as u64) << 1) | u64::from(positive)
}

impl EventSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pixel: usize, step: usize, positive: bool) -> bool {
        self.0.insert(pack(pixel, step, positive))
    }

    pub fn from_packed(items: impl IntoIterator<Item = u64>) -> Self {
        Self(items.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().copied()
    }

    pub fn from_reference(r: &ReferencePattern) -> Self {
        Self::from_signed(r.dims(), r.symbols().iter().map(|&s| match s {
            StoredSymbol::Plus => Some(true),
            StoredSymbol::Minus => Some(false),
            _ => None,
        }))
    }

    pub fn from_query(q: &QueryPattern) -> Self {
        Self::from_signed(q.dims(), q.symbols().iter().map(|&x| match x {
            InputSymbol::Plus => Some(true),
            InputSymbol::Minus => Some(false),
            InputSymbol::Zero => None,
        }))
    }

    fn from_signed(d: Dims, signs: impl Iterator<Item = Option<bool>>) -> Self {
        let mut set = Self::new();
        for (k, sign) in signs.enumerate() {
            if let Some(pos) = sign {
                set.insert(k / d.steps, k % d.steps, pos);
            }
        }
        set
    }
}

/// `|a n b| / |a u b|`, with two empty sets counted as identical.
pub fn jaccard(a: &EventSet, b: &EventSet) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.0.intersection(&b.0).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Value of every position of an empty set's signature. Real hashes never take it.
pub const EMPTY_SENTINEL: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    pub seed: u64,
}

impl MinHashSignature {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// Fraction of positions where two signatures agree.
    pub fn agreement(&self, other: &MinHashSignature) -> f64 {
        let same = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        same as f64 / self.values.len().max(1) as f64
    }
}

/// `k` seeded 64-bit mixers over packed event triples.
#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    keys: Vec<u64>,
}

impl MinHasher {
    pub fn new(k: usize, seed: u64) -> Result<Self, BaselineError> {
        if k == 0 {
            return Err(BaselineError::EmptySignature);
        }
        let keys = (0..k as u64).map(|i| splitmix64(seed ^ splitmix64(i))).collect();
        Ok(Self { seed, keys })
    }

    pub fn k(&self) -> usize {
        self.keys.len()
    }

    fn hash(&self, i: usize, element: u64) -> u64 {
        splitmix64(element ^ self.keys[i]).min(EMPTY_SENTINEL - 1)
    }

    pub fn signature(&self, s: &EventSet) -> MinHashSignature {
        let values = (0..self.k())
            .map(|i| s.iter().map(|e| self.hash(i, e)).min().unwrap_or(EMPTY_SENTINEL))
            .collect();
        MinHashSignature { values, seed: self.seed }
    }
}

pub fn minhash_signature(s: &EventSet, k: usize, seed: u64) -> Result<MinHashSignature, BaselineError> {
    Ok(MinHasher::new(k, seed)?.signature(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshConfig {
    pub k: usize,
    pub bands: usize,
    pub rows: usize,
    pub seed: u64,
}

impl Default for LshConfig {
    fn default() -> Self {
        Self { k: 128, bands: 32, rows: 4, seed: 0x5EED }
    }
}

impl LshConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.k == 0 {
            return Err(BaselineError::EmptySignature);
        }
        if self.bands * self.rows != self.k {
            return Err(BaselineError::Banding { k: self.k, bands: self.bands, rows: self.rows });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LshIndex {
    config: LshConfig,
    hasher: MinHasher,
    tables: Vec<HashMap<u64, Vec<usize>>>,
    signatures: Vec<MinHashSignature>,
    patterns: Vec<ReferencePattern>,
}

impl LshIndex {
    pub fn build(refs: &[ReferencePattern], config: LshConfig) -> Result<Self, BaselineError> {
        config.validate()?;
        let hasher = MinHasher::new(config.k, config.seed)?;
        let signatures = refs.iter().map(|r| hasher.signature(&EventSet::from_reference(r))).collect();
        Ok(Self::assemble(config, hasher, signatures, refs.to_vec()))
    }

    fn assemble(config: LshConfig, hasher: MinHasher, signatures: Vec<MinHashSignature>, patterns: Vec<ReferencePattern>) -> Self {
        let mut tables = vec![HashMap::<u64, Vec<usize>>::new(); config.bands];
        for (id, sig) in signatures.iter().enumerate() {
            for (band, table) in tables.iter_mut().enumerate() {
                table.entry(band_key(config.rows, band, &sig.values)).or_default().push(id);
            }
        }
        Self { config, hasher, tables, signatures, patterns }
    }

    pub fn config(&self) -> LshConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn tables(&self) -> &[HashMap<u64, Vec<usize>>] {
        &self.tables
    }

    pub fn signature(&self, id: usize) -> Option<&MinHashSignature> {
        self.signatures.get(id)
    }

    pub fn query_signature(&self, q: &QueryPattern) -> MinHashSignature {
        self.hasher.signature(&EventSet::from_query(q))
    }

    /// Ids whose band keys collide with the signature in at least one band.
    pub fn candidates(&self, sig: &MinHashSignature) -> Result<BTreeSet<usize>, BaselineError> {
        if sig.values.len() != self.config.k {
            return Err(BaselineError::SignatureLength { expected: self.config.k, got: sig.values.len() });
        }
        let mut seen = vec![false; self.patterns.len()];
        for (band, table) in self.tables.iter().enumerate() {
            if let Some(ids) = table.get(&band_key(self.config.rows, band, &sig.values)) {
                for &id in ids {
                    seen[id] = true;
                }
            }
        }
        Ok(seen.iter().enumerate().filter_map(|(id, &s)| s.then_some(id)).collect())
    }

    /// Candidates verified exactly against the query.
    pub fn query_with_signature(&self, q: &QueryPattern, sig: &MinHashSignature) -> Result<BTreeSet<usize>, BaselineError> {
        let candidates = self.candidates(sig)?;
        let mut out = BTreeSet::new();
        for id in candidates {
            let r = &self.patterns[id];
            if r.dims() != q.dims() {
                return Err(BaselineError::DimensionMismatch { expected: q.dims(), got: r.dims() });
            }
            if matches_exactly(q, r) {
                out.insert(id);
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BaselineError> {
        let path = path.as_ref();
        std::fs::write(path, self.snapshot_json())
            .map_err(|source| BaselineError::Io { path: path.display().to_string(), source })
    }

    pub fn snapshot_json(&self) -> String {
        let dims = self.patterns.first().map(|p| p.dims()).unwrap_or(Dims { height: 0, width: 0, steps: 0 });
        let snap = Snapshot {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            k: self.config.k,
            bands: self.config.bands,
            rows: self.config.rows,
            seed: self.config.seed,
            signatures: self.signatures.iter().map(|s| s.values.clone()).collect(),
            patterns: PatternFile::from_references(dims, &self.patterns),
        };
        serde_json::to_string(&snap).expect("snapshot serializes") + "\n"
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BaselineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| BaselineError::Io { path: path.display().to_string(), source })?;
        Self::from_snapshot_json(&text)
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self, BaselineError> {
        let snap: Snapshot = serde_json::from_str(text)?;
        if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
            return Err(BaselineError::Snapshot { format: snap.format, version: snap.version });
        }
        let config = LshConfig { k: snap.k, bands: snap.bands, rows: snap.rows, seed: snap.seed };
        config.validate()?;
        let hasher = MinHasher::new(config.k, config.seed)?;
        let patterns = if snap.patterns.patterns.is_empty() { Vec::new() } else { snap.patterns.references()? };
        let mut signatures = Vec::with_capacity(snap.signatures.len());
        for values in snap.signatures {
            if values.len() != config.k {
                return Err(BaselineError::SignatureLength { expected: config.k, got: values.len() });
            }
            signatures.push(MinHashSignature { values, seed: config.seed });
        }
        Ok(Self::assemble(config, hasher, signatures, patterns))
    }
}

pub fn lsh_query(index: &LshIndex, query: &QueryPattern) -> Result<BTreeSet<usize>, BaselineError> {
    index.query_with_signature(query, &index.query_signature(query))
}

fn band_key(rows: usize, band: usize, values: &[u64]) -> u64 {
    values[band * rows..(band + 1) * rows].iter().fold(splitmix64(band as u64), |acc, &v| splitmix64(acc ^ v))
}

const SNAPSHOT_FORMAT: &str = "vnand-stpm-lsh";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    k: usize,
    bands: usize,
    rows: usize,
    seed: u64,
    signatures: Vec<Vec<u64>>,
    patterns: PatternFile,
}
