//! Criterion benchmarks for the planner; see `benches/planner.rs`.
//!
//! Run with `cargo bench -p reflow-bench`.

/// Seeds of the random grid problems the benchmarks plan on.
pub const SEEDS: [u64; 4] = [3, 11, 42, 97];
