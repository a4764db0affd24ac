//! Optimizers, schedules, losses and the training loops.

mod adam;
mod adapt;
mod hyper;
mod loss;
mod pinn;
mod schedule;

pub use adam::{Adam, AdamConfig};
pub use adapt::adapt_lora;
pub use hyper::{assemble_for, train_hyper, validation_score, HyperTask, Regime};
pub use loss::{
    pinn_loss, record_data_loss, record_pinn_loss, taped_fields, AnalyticModel, FieldModel,
    LossReport, LossWeights,
};
pub use pinn::{
    finetune, run_point_sets, train_pinn, EpochRecord, TrainConfig, TrainedArtifact,
    DIVERGENCE_THRESHOLD,
};
pub use schedule::{Scale, Schedule};
