//! Behavioral model of spatiotemporal pattern matching inside vertical NAND
//! arrays built from two-FeFET multi-level cells, plus the software baselines
//! and benchmark harness used to evaluate it.
//!
//! Layering, bottom-up:
//!
//! * [`device`]: FeFET threshold/read levels and the symbol encodings.
//! * [`string`]: one NAND string under the pulse-width schedule.
//! * [`array`]: blocks x DSL x WL x BL organization and parallel queries.
//! * [`perf`]: analytic latency/energy model of a query.
//! * [`datagen`]: LIF-encoded `x`/`+` event-camera workload.
//! * [`baselines`]: brute-force and MinHash-LSH software matchers.
//! * [`bench`]: benchmark and sweep runners behind the `stpm` CLI.

pub mod array;
pub mod baselines;
pub mod bench;
pub mod datagen;
pub mod device;
pub mod perf;
pub mod string;
