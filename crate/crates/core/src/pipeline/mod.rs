//! Joint training, checkpoints, evaluation and experiment drivers.

mod checkpoint;
mod config;
mod evaluate;
mod experiments;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointManifest, ParamEntry, CHECKPOINT_VERSION,
};
pub use config::{parse_ablation, DatasetSpec, HiddenLayers, IdxPart, Term, TrainConfig, Variant};
pub use evaluate::{embed, evaluate_model, score_embedding, Embedding, EVAL_RESTARTS};
pub use experiments::{export_embeddings, noise_sweep, write_sweep_csv, SweepRow};
pub use train::{
    breakdown, fit, loss_and_gradients, total_loss, total_loss_vars, total_loss_vars_with, train,
    write_report, EpochLog, LossBreakdown, LossVars, StepNoise, TrainOutcome,
};
