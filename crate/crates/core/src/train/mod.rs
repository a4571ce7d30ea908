//! Loss, optimisers, learning-rate schedules and the finetuning loop.

mod config;
mod fit;
mod loss;
mod optim;
mod schedule;

pub use config::{HyperGrid, TrainConfig, TrainFile};
pub use fit::{
    fit, read_history_csv, write_history_csv, EpochDecision, EpochRecord, FitOptions, FitOutcome, TrainState,
    BEST_CHECKPOINT, HISTORY_FILE, LAST_CHECKPOINT, OPTIMIZER_STATE, STATE_FILE,
};
pub use loss::{bce_with_logits, combined_loss, dice_loss, LossConfig, LossTerms, PROB_EPS};
pub use optim::{AdamParams, Optimizer, OptimizerKind};
pub use schedule::{EarlyStopping, LrScheduler, SchedulerKind};
