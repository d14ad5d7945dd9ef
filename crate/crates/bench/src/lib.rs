//! Criterion benchmarks for the hypersat kernels: operator construction,
//! the forward and backward passes, short training runs and local search.
//! Run with `cargo bench -p hypersat-bench`.
