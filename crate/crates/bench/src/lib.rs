//! Benchmarks for the modelling pipeline live in `benches/`.
