//! Criterion benchmarks for the numeric kernels and the training and evaluation pipeline live under `benches/`.
