//! Criterion benchmarks for `toricost-core`; see `benches/`.
//!
//! Run with `cargo bench -p toricost-bench`.
