//! Multi-model training protocol, model selection and sweep reports.

pub mod config;
pub mod dataset;
pub mod report;
pub mod select;
pub mod sweep;

pub use config::{BitsSpec, DatasetSpec, ExperimentConfig, Mode};
pub use dataset::{load_dataset, ExperimentData};
pub use report::{ReportRow, RowKind, SweepReport};
pub use select::{select_model, Candidate};
pub use sweep::{run, run_bit_sweep, run_size_sweep, run_weight_comparison};
