//! Criterion benchmarks for `semiflow-core`; see `benches/`.
