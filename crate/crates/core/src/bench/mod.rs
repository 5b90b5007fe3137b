//! Experiment harness: planner baselines, the viewpoint/push pipeline,
//! statistics and reports.

pub mod pipeline;
pub mod planner;
pub mod report;
pub mod stats;

pub use pipeline::{run_pipeline, run_pipeline_on, run_scene, PipelineParams, PipelineResult, PushRecord, PushSelection, SceneRow};
pub use planner::{coverage_sequence, greedy_choice, predicted_unknown_cells, Planner, PlannerConfig, PlannerKind};
pub use report::{aggregates_csv, method_label, rows_csv, sweep, Aggregate, BenchReport, Comparison};
pub use stats::{paired_t_test, PairedTTest, TTestFlag};
