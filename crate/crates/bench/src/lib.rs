//! Benchmarks live in `benches/`; this crate exists so `cargo bench -p herdlens-bench` has a home.

pub use herdlens_core;
