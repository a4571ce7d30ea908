//! Dice metrics, prediction helpers, evaluation reports and charts.

mod cross;
mod metrics;
mod plot;
mod predict;
mod report;

pub use cross::{cross_dataset_eval, CrossCell, CrossDatasetMatrix};
pub use metrics::{dice_score, mean_std};
pub use plot::grouped_bar_chart;
pub use predict::{
    logits_to_mask, predict_logits, predict_masks, preprocess_all, stack_images, stack_targets, target_at,
    unstack_logits,
};
pub use report::{
    evaluate, evaluate_with_prompts, read_reports_json, score_masks, write_reports_json, write_samples_csv, write_summary_csv,
    EvalReport, SampleScore,
};
