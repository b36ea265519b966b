//! Momentum SGD, early stopping, input standardization, binary-task
//! construction and evaluation metrics.

mod metrics;
mod normalize;
mod sgd;
mod task;
mod trainer;

pub use metrics::{f1_score, Confusion, Metrics};
pub use normalize::{normalize_dataset, NormStats, STD_FLOOR};
pub use sgd::{sgd_momentum_step, Sgd};
pub use task::{make_binary_task, split_counts, stratified_split};
pub use trainer::{
    confusion, evaluate, evaluate_sharded, mean_loss, train, train_with, DatasetSplit, EarlyStopping,
    EpochRecord, Example, StopDecision, TrainConfig, TrainOutcome,
};
