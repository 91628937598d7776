//! End-to-end experiments: pipeline assembly, metrics, sweeps, operating-point
//! calibration, result files and charts.

pub mod artifact;
pub mod calibrate;
pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod results;
pub mod sweep;

pub use artifact::ModelArtifact;
pub use calibrate::{calibrate, Calibration, CalibrationGrid, CalibrationSettings, GridScore};
pub use config::{apply_override, derive_seeds, ExperimentConfig};
pub use metrics::{accuracy, nrmse};
pub use pipeline::{
    linear_baseline, prepare, run_experiment, run_prepared, run_seed, train_readout_streaming, Evaluation,
    ExperimentRecord, ExperimentRun, PreparedData, Projected, ReservoirEncoder, SeedResult, TrainedReadout,
};
pub use results::{export_results, import_results_csv, import_results_json, ResultFormat, ResultRow};
pub use sweep::sweep;
