//! Criterion benchmarks for the `ota-core` kernels live in `benches/`.
