//! Experiment plumbing: TOML configs, replicated runs with paired tests,
//! report tables, box-plot data and the 2-D sine demo.
//!
//! A config names one dataset group. [`run_experiment`] trains every method
//! on every replicate and writes `report.json` (canonical), `report.csv` and
//! `timings.json`.

mod config;
mod experiment;
mod plot;
mod report;

pub use config::{
    default_workers, DatasetSource, EnsembleConfig, ExperimentConfig, IdxSource, ModelConfig, Regularization,
    TrainOverride, WORKERS_ENV,
};
pub use experiment::{
    compare, load_replicates, replicate_model_seed, run_experiment, Comparison, EvalReport, MethodResult,
    REPORT_FORMAT, REPORT_VERSION,
};
pub use plot::{sine_demo, Panel, PlotPoint, Series, SineDemo, CURVE_POINTS};
pub use report::{box_plot_csv, box_plot_data, quantile, report_tables, BoxStats, Table, BEST_MARKER, FAILED};
