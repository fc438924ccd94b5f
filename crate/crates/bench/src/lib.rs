//! Criterion benchmarks for the ttrals solvers live in `benches/`.
