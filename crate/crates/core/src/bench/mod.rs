//! Cross-validation harness: loading data, choosing the uncertainty scale,
//! corrupting inputs, and scoring methods by RMSE.

pub mod cv;
pub mod data;
pub mod noise;
pub mod synthetic;

pub use cv::{
    cell_seed, kfold_indices, rmse, run_benchmark, run_benchmark_on, AccessProbe, BenchConfig,
    CVReport, Method, MethodResult, Purpose, RowSource,
};
pub use data::{
    load_abalone_uci, load_csv, parse_index_list, read_csv, read_features, Dataset, LoadReport,
    TargetColumn,
};
pub use noise::{empirical_std, inject_noise, sigma_from_policy, NoiseSpec, SigmaPolicy};
