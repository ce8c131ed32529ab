//! Benchmark harness for federated private k-means: budget sweeps over the
//! six initialization strategies, Pareto fronts in (eps_total, cost),
//! elbow-method k selection, and deterministic results files.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod elbow;
pub mod error;
pub mod experiment;
pub mod export;
pub mod pareto;
pub mod record;
pub mod strategy;

pub use config::{ExperimentConfig, Method, Unit};
pub use dataset::{build_dataset, write_dataset, GenDataSpec};
pub use elbow::{elbow_from_config, elbow_locator};
pub use error::{BenchError, Result};
pub use experiment::{run_experiment, run_experiment_with};
pub use pareto::{pareto_front, ParetoFront};
pub use record::RunRecord;
pub use strategy::{InitStrategy, StrategyRegistry};

/// Environment variable that sets the worker-thread count.
pub const THREADS_ENV: &str = "BENCH_THREADS";
