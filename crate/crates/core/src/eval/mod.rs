//! Metrics, trajectory reconstruction from regressed increments, and
//! experiment reports.

mod experiment;
mod metrics;
mod reconstruct;
mod solution;
mod tables;

pub use metrics::{
    compute_metrics, position_errors, rmse, trajectory_metrics, ErrorStats, EvalReport, ReportRow,
};
pub use reconstruct::{reconstruct, Reconstruction};
pub use solution::{SolutionMeta, SolutionPoint, SolutionSource, TrajectorySolution};
pub use experiment::{
    baseline_table, epoch_headings, evaluate_models, ins_baseline, qdr_baseline, quadnet_trajectory, run_experiment, train_models,
    AraModels, ExperimentConfig, ExperimentOutput, ModeTables, QuadnetTrajectory, Regressors, TrainedModels,
};
pub use tables::{
    mean_row, read_combination_table, read_scenario_table, write_combination_table, write_epoch_trace, write_metrics_table, write_scenario_table, write_track,
    COMBINATION_HEADER, EPOCH_HEADER, SCENARIO_HEADER, TRACK_HEADER,
};
