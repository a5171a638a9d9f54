//! Two-FeFET multi-level cell model.
//!
//! Each stored symbol occupies a pair of 4-level FeFETs (cell `a` sits nearer
//! the string input, cell `b` above it). An input symbol is applied as a pair
//! of read voltages, one per FeFET. A FeFET is modelled as an ideal switch: it
//! conducts iff its gate voltage exceeds its threshold voltage, so the pair
//! conducts iff both FeFETs do.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("threshold voltages must be strictly increasing (VTH0L < LVT < HVT < VTH0H), got {0:?}")]
    ThresholdOrder([f64; 4]),
    #[error("threshold span {span} V exceeds the memory window of {window} V")]
    MemoryWindow { span: f64, window: f64 },
    #[error("read voltages must interleave the threshold voltages: {0}")]
    ReadInterleave(String),
    #[error("currents must satisfy off < sense_threshold < on, got off={off} sense={sense} on={on}")]
    CurrentOrder { off: f64, sense: f64, on: f64 },
    #[error("idle gate bias {idle} V must stay below the LVT threshold {lvt} V")]
    IdleBias { idle: f64, lvt: f64 },
    #[error("invalid symbol {0:?}")]
    Symbol(char),
    #[error("failed to read device config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse device config: {0}")]
    Parse(#[from] toml::de::Error),
}

/// The four programmable threshold states, lowest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VthLevel {
    Vth0L,
    Lvt,
    Hvt,
    Vth0H,
}

impl VthLevel {
    pub const ALL: [VthLevel; 4] = [VthLevel::Vth0L, VthLevel::Lvt, VthLevel::Hvt, VthLevel::Vth0H];
}

/// The four read (gate) voltages, lowest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReadVoltage {
    Vr0L,
    VrL,
    VrH,
    Vr0H,
}

impl ReadVoltage {
    pub const ALL: [ReadVoltage; 4] = [ReadVoltage::Vr0L, ReadVoltage::VrL, ReadVoltage::VrH, ReadVoltage::Vr0H];
}

/// Symbol held by a cell of a reference pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StoredSymbol {
    Plus,
    Minus,
    Zero,
    DontCare,
}

impl StoredSymbol {
    pub const ALL: [StoredSymbol; 4] = [StoredSymbol::Plus, StoredSymbol::Minus, StoredSymbol::Zero, StoredSymbol::DontCare];

    /// Symbolic match rule: `X` accepts anything, otherwise the symbols must agree.
    pub fn accepts(self, input: InputSymbol) -> bool {
        match self {
            StoredSymbol::DontCare => true,
            StoredSymbol::Plus => input == InputSymbol::Plus,
            StoredSymbol::Minus => input == InputSymbol::Minus,
            StoredSymbol::Zero => input == InputSymbol::Zero,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            StoredSymbol::Plus => '+',
            StoredSymbol::Minus => '-',
            StoredSymbol::Zero => '0',
            StoredSymbol::DontCare => 'X',
        }
    }

    pub fn from_char(c: char) -> Result<Self, DeviceError> {
        match c {
            '+' => Ok(StoredSymbol::Plus),
            '-' => Ok(StoredSymbol::Minus),
            '0' => Ok(StoredSymbol::Zero),
            'X' | 'x' => Ok(StoredSymbol::DontCare),
            other => Err(DeviceError::Symbol(other)),
        }
    }
}

impl From<InputSymbol> for StoredSymbol {
    fn from(x: InputSymbol) -> Self {
        match x {
            InputSymbol::Plus => StoredSymbol::Plus,
            InputSymbol::Minus => StoredSymbol::Minus,
            InputSymbol::Zero => StoredSymbol::Zero,
        }
    }
}

impl fmt::Display for StoredSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Symbol carried by an incoming pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputSymbol {
    Plus,
    Minus,
    Zero,
}

impl InputSymbol {
    pub const ALL: [InputSymbol; 3] = [InputSymbol::Plus, InputSymbol::Minus, InputSymbol::Zero];

    pub fn as_char(self) -> char {
        StoredSymbol::from(self).as_char()
    }

    pub fn from_char(c: char) -> Result<Self, DeviceError> {
        match c {
            '+' => Ok(InputSymbol::Plus),
            '-' => Ok(InputSymbol::Minus),
            '0' => Ok(InputSymbol::Zero),
            other => Err(DeviceError::Symbol(other)),
        }
    }
}

impl fmt::Display for InputSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Threshold states of the two FeFETs of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellPair {
    pub vth_a: VthLevel,
    pub vth_b: VthLevel,
}

impl CellPair {
    pub const fn new(vth_a: VthLevel, vth_b: VthLevel) -> Self {
        Self { vth_a, vth_b }
    }

    /// Erased/pass state: both FeFETs at the lowest threshold.
    pub const PASS: CellPair = CellPair::new(VthLevel::Vth0L, VthLevel::Vth0L);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVoltages {
    pub vth0l: f64,
    pub lvt: f64,
    pub hvt: f64,
    pub vth0h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadVoltages {
    pub vr0l: f64,
    pub vrl: f64,
    pub vrh: f64,
    pub vr0h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Currents {
    pub on: f64,
    pub off: f64,
    pub sense_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateBias {
    /// Gate voltage of a word line outside its pulse.
    pub idle: f64,
}

impl Default for GateBias {
    fn default() -> Self {
        Self { idle: 0.0 }
    }
}

fn default_memory_window() -> f64 {
    4.0
}

/// Voltage and current parameters of the behavioral FeFET model.
///
/// Loaded from TOML with dotted keys, e.g. `vth.lvt = 0.5`, `read.vrh = 2.5`,
/// `current.on = 1e-6`. `gate.idle` and `memory_window` are optional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub vth: ThresholdVoltages,
    pub read: ReadVoltages,
    pub current: Currents,
    #[serde(default)]
    pub gate: GateBias,
    #[serde(default = "default_memory_window")]
    pub memory_window: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            vth: ThresholdVoltages { vth0l: -1.0, lvt: 0.5, hvt: 2.0, vth0h: 3.0 },
            read: ReadVoltages { vr0l: -0.25, vrl: 1.25, vrh: 2.5, vr0h: 3.5 },
            current: Currents { on: 1e-6, off: 1e-12, sense_threshold: 1e-8 },
            gate: GateBias::default(),
            memory_window: default_memory_window(),
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let t = &self.vth;
        let r = &self.read;
        let vths = [t.vth0l, t.lvt, t.hvt, t.vth0h];
        if !vths.windows(2).all(|w| w[0] < w[1]) {
            return Err(DeviceError::ThresholdOrder(vths));
        }
        let span = t.vth0h - t.vth0l;
        if span > self.memory_window {
            return Err(DeviceError::MemoryWindow { span, window: self.memory_window });
        }
        let chain = [
            ("VTH0L", t.vth0l),
            ("VR0L", r.vr0l),
            ("LVT", t.lvt),
            ("VRL", r.vrl),
            ("HVT", t.hvt),
            ("VRH", r.vrh),
            ("VTH0H", t.vth0h),
            ("VR0H", r.vr0h),
        ];
        for w in chain.windows(2) {
            if !(w[0].1 < w[1].1) {
                return Err(DeviceError::ReadInterleave(format!(
                    "{}={} must be below {}={}",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        let c = &self.current;
        if !(c.off < c.sense_threshold && c.sense_threshold < c.on) {
            return Err(DeviceError::CurrentOrder { off: c.off, sense: c.sense_threshold, on: c.on });
        }
        if !(self.gate.idle < t.lvt) {
            return Err(DeviceError::IdleBias { idle: self.gate.idle, lvt: t.lvt });
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, DeviceError> {
        let p: DeviceParams = toml::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DeviceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| DeviceError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn vth(&self, level: VthLevel) -> f64 {
        match level {
            VthLevel::Vth0L => self.vth.vth0l,
            VthLevel::Lvt => self.vth.lvt,
            VthLevel::Hvt => self.vth.hvt,
            VthLevel::Vth0H => self.vth.vth0h,
        }
    }

    pub fn read_voltage(&self, level: ReadVoltage) -> f64 {
        match level {
            ReadVoltage::Vr0L => self.read.vr0l,
            ReadVoltage::VrL => self.read.vrl,
            ReadVoltage::VrH => self.read.vrh,
            ReadVoltage::Vr0H => self.read.vr0h,
        }
    }
}

/// Program state for a stored symbol.
///
/// `0` uses the two outer levels: cell `a` at VTH0H only opens under VR0H, and
/// cell `b` at VTH0L opens under anything but rejects nothing on its own. The
/// `+`/`-` encodings place HVT on the side that an opposite-symbol input
/// drives with only VRL or VR0L.
pub fn encode_stored(s: StoredSymbol) -> CellPair {
    use VthLevel::*;
    match s {
        StoredSymbol::Plus => CellPair::new(Hvt, Lvt),
        StoredSymbol::Minus => CellPair::new(Lvt, Hvt),
        StoredSymbol::Zero => CellPair::new(Vth0H, Vth0L),
        StoredSymbol::DontCare => CellPair::new(Vth0L, Vth0L),
    }
}

/// Gate voltage pair `(a, b)` for an input symbol.
pub fn encode_input(x: InputSymbol) -> (ReadVoltage, ReadVoltage) {
    use ReadVoltage::*;
    match x {
        InputSymbol::Plus => (VrH, VrL),
        InputSymbol::Minus => (VrL, VrH),
        InputSymbol::Zero => (Vr0H, Vr0L),
    }
}

pub fn fefet_conducts(vth: VthLevel, gate: f64, p: &DeviceParams) -> bool {
    gate > p.vth(vth)
}

pub fn fefet_current(vth: VthLevel, gate: f64, p: &DeviceParams) -> f64 {
    if fefet_conducts(vth, gate, p) {
        p.current.on
    } else {
        p.current.off
    }
}

/// Whether a cell passes current when its two FeFETs are driven at `(gate_a, gate_b)`.
pub fn pair_conducts(cell: CellPair, gate_a: f64, gate_b: f64, p: &DeviceParams) -> bool {
    fefet_conducts(cell.vth_a, gate_a, p) && fefet_conducts(cell.vth_b, gate_b, p)
}

pub fn cell_conducts(stored: StoredSymbol, input: InputSymbol, p: &DeviceParams) -> bool {
    let (ra, rb) = encode_input(input);
    pair_conducts(encode_stored(stored), p.read_voltage(ra), p.read_voltage(rb), p)
}

/// Bit-line current of a single cell evaluated in isolation.
pub fn cell_current(stored: StoredSymbol, input: InputSymbol, p: &DeviceParams) -> f64 {
    if cell_conducts(stored, input, p) {
        p.current.on
    } else {
        p.current.off
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_params_are_valid() {
        DeviceParams::default().validate().unwrap();
    }

    #[test]
    fn stored_encodings() {
        assert_eq!(encode_stored(StoredSymbol::Plus), CellPair::new(VthLevel::Hvt, VthLevel::Lvt));
        assert_eq!(encode_stored(StoredSymbol::Minus), CellPair::new(VthLevel::Lvt, VthLevel::Hvt));
        assert_eq!(encode_stored(StoredSymbol::DontCare), CellPair::PASS);
        assert_eq!(encode_stored(StoredSymbol::Zero), CellPair::new(VthLevel::Vth0H, VthLevel::Vth0L));
    }

    #[test]
    fn input_encodings() {
        assert_eq!(encode_input(InputSymbol::Plus), (ReadVoltage::VrH, ReadVoltage::VrL));
        assert_eq!(encode_input(InputSymbol::Minus), (ReadVoltage::VrL, ReadVoltage::VrH));
        assert_eq!(encode_input(InputSymbol::Zero), (ReadVoltage::Vr0H, ReadVoltage::Vr0L));
    }

    /// Search every placement of the outer levels for the `0` symbol and keep
    /// those that reproduce the full 12-case match table. Only the a/b mirror
    /// pair may survive, and the shipped encoding must be one of them.
    #[test]
    fn zero_encoding_is_unique_up_to_mirror() {
        let p = DeviceParams::default();
        let outer_vth = [VthLevel::Vth0L, VthLevel::Vth0H];
        let outer_read = [ReadVoltage::Vr0L, ReadVoltage::Vr0H];
        let mut solutions = Vec::new();
        for &sa in &outer_vth {
            for &sb in &outer_vth {
                for &ra in &outer_read {
                    for &rb in &outer_read {
                        let stored_of = |s: StoredSymbol| match s {
                            StoredSymbol::Zero => (sa, sb),
                            StoredSymbol::Plus => (VthLevel::Hvt, VthLevel::Lvt),
                            StoredSymbol::Minus => (VthLevel::Lvt, VthLevel::Hvt),
                            StoredSymbol::DontCare => (VthLevel::Vth0L, VthLevel::Vth0L),
                        };
                        let input_of = |x: InputSymbol| match x {
                            InputSymbol::Zero => (ra, rb),
                            InputSymbol::Plus => (ReadVoltage::VrH, ReadVoltage::VrL),
                            InputSymbol::Minus => (ReadVoltage::VrL, ReadVoltage::VrH),
                        };
                        let ok = StoredSymbol::ALL.iter().all(|&s| {
                            InputSymbol::ALL.iter().all(|&x| {
                                let (va, vb) = stored_of(s);
                                let (ga, gb) = input_of(x);
                                let on = p.read_voltage(ga) > p.vth(va) && p.read_voltage(gb) > p.vth(vb);
                                let want = s == StoredSymbol::DontCare || StoredSymbol::from(x) == s;
                                on == want
                            })
                        });
                        if ok {
                            solutions.push(((sa, sb), (ra, rb)));
                        }
                    }
                }
            }
        }
        assert_eq!(
            solutions,
            vec![
                ((VthLevel::Vth0L, VthLevel::Vth0H), (ReadVoltage::Vr0L, ReadVoltage::Vr0H)),
                ((VthLevel::Vth0H, VthLevel::Vth0L), (ReadVoltage::Vr0H, ReadVoltage::Vr0L)),
            ]
        );
        let z = encode_stored(StoredSymbol::Zero);
        assert!(solutions.contains(&((z.vth_a, z.vth_b), encode_input(InputSymbol::Zero))));
    }

    #[test]
    fn fefet_examples() {
        let p = DeviceParams::default();
        assert!(fefet_conducts(VthLevel::Lvt, p.read.vrl, &p));
        assert!(!fefet_conducts(VthLevel::Hvt, p.read.vrl, &p));
        assert!(fefet_conducts(VthLevel::Vth0L, p.read.vr0l, &p));
        assert_eq!(fefet_current(VthLevel::Hvt, p.read.vrl, &p), p.current.off);
    }

    #[test]
    fn cell_examples() {
        let p = DeviceParams::default();
        assert!(cell_conducts(StoredSymbol::Plus, InputSymbol::Plus, &p));
        assert!(!cell_conducts(StoredSymbol::Plus, InputSymbol::Minus, &p));
        assert!(cell_conducts(StoredSymbol::DontCare, InputSymbol::Zero, &p));
    }

    #[test]
    fn encode_stored_is_injective() {
        let mut seen = std::collections::HashSet::new();
        for s in StoredSymbol::ALL {
            assert!(seen.insert(encode_stored(s)));
        }
    }

    #[test]
    fn symbol_chars_roundtrip() {
        for s in StoredSymbol::ALL {
            assert_eq!(StoredSymbol::from_char(s.as_char()).unwrap(), s);
        }
        for x in InputSymbol::ALL {
            assert_eq!(InputSymbol::from_char(x.as_char()).unwrap(), x);
        }
        assert!(InputSymbol::from_char('X').is_err());
        assert!(StoredSymbol::from_char('?').is_err());
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut p = DeviceParams::default();
        p.vth.lvt = 2.5;
        assert!(matches!(p.validate(), Err(DeviceError::ThresholdOrder(_))));

        let mut p = DeviceParams::default();
        p.vth.vth0h = 3.2;
        p.read.vr0h = 3.6;
        assert!(matches!(p.validate(), Err(DeviceError::MemoryWindow { .. })));

        let mut p = DeviceParams::default();
        p.read.vrl = 0.4;
        assert!(matches!(p.validate(), Err(DeviceError::ReadInterleave(_))));

        let mut p = DeviceParams::default();
        p.current.sense_threshold = 1e-5;
        assert!(matches!(p.validate(), Err(DeviceError::CurrentOrder { .. })));

        let mut p = DeviceParams::default();
        p.gate.idle = 0.6;
        assert!(matches!(p.validate(), Err(DeviceError::IdleBias { .. })));
    }

    #[test]
    fn toml_config_loads() {
        let text = r#"
            vth.vth0l = -1.5
            vth.lvt = 0.0
            vth.hvt = 1.0
            vth.vth0h = 2.0
            read.vr0l = -0.5
            read.vrl = 0.5
            read.vrh = 1.5
            read.vr0h = 2.5
            current.on = 2e-6
            current.off = 1e-11
            current.sense_threshold = 1e-7
            gate.idle = -0.2
        "#;
        let p = DeviceParams::from_toml_str(text).unwrap();
        assert_eq!(p.vth.lvt, 0.0);
        assert_eq!(p.memory_window, 4.0);
        assert!(DeviceParams::from_toml_str("vth.lvt = 1.0").is_err());
    }

    fn arb_params() -> impl Strategy<Value = DeviceParams> {
        // eight strictly increasing voltages inside a 4 V window
        (-5.0f64..5.0, proptest::collection::vec(0.01f64..0.5, 7), 0.01f64..1.0).prop_map(|(base, gaps, idle_gap)| {
            let mut v = vec![base];
            for g in gaps {
                let last = *v.last().unwrap();
                v.push(last + g);
            }
            DeviceParams {
                vth: ThresholdVoltages { vth0l: v[0], lvt: v[2], hvt: v[4], vth0h: v[6] },
                read: ReadVoltages { vr0l: v[1], vrl: v[3], vrh: v[5], vr0h: v[7] },
                current: Currents { on: 1e-6, off: 1e-12, sense_threshold: 1e-8 },
                gate: GateBias { idle: v[2] - idle_gap },
                memory_window: 4.0,
            }
        })
    }

    proptest! {
        #[test]
        fn truth_table_holds_for_any_valid_params(p in arb_params()) {
            p.validate().unwrap();
            for s in StoredSymbol::ALL {
                for x in InputSymbol::ALL {
                    prop_assert_eq!(cell_conducts(s, x, &p), s.accepts(x));
                }
            }
        }

        #[test]
        fn fefet_monotone_in_gate(g1 in -6.0f64..6.0, g2 in -6.0f64..6.0) {
            let p = DeviceParams::default();
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            for v in VthLevel::ALL {
                prop_assert!(!fefet_conducts(v, lo, &p) || fefet_conducts(v, hi, &p));
            }
        }
    }
}
