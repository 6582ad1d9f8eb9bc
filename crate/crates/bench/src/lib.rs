//! Benchmark harness for the improved Laplace approximation: single runs on
//! registered models, sweeps over the skew-t and Gompertz experiments, and a
//! small-dimension cubature oracle.

pub mod bruteforce;
pub mod commands;
pub mod error;
pub mod record;

pub use bruteforce::{brute_force_integral, MAX_BRUTE_FORCE_DIM};
pub use commands::{
    cmd_approx, cmd_bench_gompertz, cmd_bench_skewt, rerun, run_method, sample_sizes,
    GompertzBench, GompertzReport, GompertzRow, SkewtGrid, SkewtRow, SlopeRow,
};
pub use error::{BenchError, BenchResult};
pub use record::{Method, RunRecord};
