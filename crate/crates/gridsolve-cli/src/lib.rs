//! Library half of the command-line driver: problem-spec parsing, the
//! distributed solve runner, and the benchmark harness. The binary in
//! `main.rs` is a thin argument layer over these.

pub mod bench;
pub mod run;
pub mod spec;

pub use bench::{parse_csv, render_csv, run_bench, BenchConfig, BenchRecord, CSV_HEADER};
pub use run::{exit_code, run_solve, Method, SolveConfig, SolveOutcome};
pub use spec::{MatrixSpec, RhsSpec};
