//! Criterion benchmarks for `ntfcast-core`; see `benches/`.
