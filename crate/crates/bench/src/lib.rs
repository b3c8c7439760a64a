//! Benchmarks for stefan-core live in `benches/`.
