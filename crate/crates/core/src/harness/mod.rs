//! Datasets, evaluation metrics, run persistence.

mod dataset;
mod metrics;
mod runner;

pub use dataset::{load_dataset, parse_dataset, DatasetError};
pub use metrics::{best_of_n, correctness, execution_accuracy, pass_at_n, path_mean, tree_entropy, visit_entropy, MARGIN, ZERO_TOL};
pub use runner::{
    aggregate, build_backend, file_stem, read_run, read_runs, render_table, render_tree, run_dataset, run_problem, score_run, score_runs, write_problem_run,
    Metric, ProblemRun, RunConfig, RunRecord, ScoreRow, Timings,
};
