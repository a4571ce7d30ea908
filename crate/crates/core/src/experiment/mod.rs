//! Experiment matrix: plans, the run executor and table reports.

mod plan;
mod report;
mod run;

pub use plan::{ExperimentPlan, FreezeMode, RunSpec, TrainData, ENDOSCOPY_TRAIN_SETS};
pub use report::{collect_reports, cross_tables, regime, regime_table, write_report, ReportFiles, Table};
pub use run::{
    build_model, execute_run, load_run_model, run_plan, version_string, PlanSummary, RunConfig, RunManifest,
    RunOptions, CHECKPOINT_DIR, CONFIG_FILE, EVAL_DIR, FIGS_DIR, MANIFEST_FILE, REPORTS_FILE, RUNS_DIR,
};
