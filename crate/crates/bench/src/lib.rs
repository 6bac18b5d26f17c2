//! Benchmark crate; see `benches/hot_paths.rs`.
