//! Criterion benchmarks for the cognitive loop and the event runner.
//! Run with `cargo bench -p dyadsim-bench`.
