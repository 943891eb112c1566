//! Pair sampling, dataset split, loss and the optimization loop.

mod config;
mod engine;
mod pools;
mod split;

pub use config::TrainConfig;
pub use engine::{
    bce_loss, evaluate, fixed_pairs, train, EpochStats, EvalResult, History, LabeledPair, TrainOptions, TrainOutcome,
    BEST_CHECKPOINT, HISTORY_CSV, LAST_CHECKPOINT, LOSS_EPS,
};
pub use pools::{sample_pair, DatasetPools, PairSample};
pub use split::{split_dataset, Split, DEFAULT_RATIOS};
