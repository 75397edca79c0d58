//! Benchmark-only crate; see `benches/rollouts.rs`.
