//! Datasets, exact ground truth, the cost model and benchmark runs.

mod config;
mod dataset;
mod knn;
mod metrics;
pub mod pipeline;
mod run;

pub use config::BenchConfig;
pub use dataset::{euclidean, load_ivecs, write_ivecs, Dataset, MixtureSpec, SourceFormat};
pub use knn::brute_force_knn;
pub use metrics::{accuracy_ratio, qpt, AccuracyRatio, CostModel, DATA_READ_FACTOR, SEEK_MS};
pub use run::{
    run_bench, strip_wall_clock, BenchReport, MetricRow, QueryRecord, CSV_COLUMNS, CSV_SCHEMA,
    WALL_CLOCK_COLUMNS,
};
