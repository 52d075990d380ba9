//! Losses, optimization, gradient checks, and automatic objective selection.

pub mod adam;
pub mod aosa;
pub mod gradcheck;
pub mod loss;
pub mod trainer;

pub use adam::Adam;
pub use aosa::{aosa_update, run_aosa, AosaConfig, AosaLogRow, AosaReport, AosaState, Resolution};
pub use gradcheck::{grad_check, rel_error, GradCheckOptions, GradCheckReport, REL_ERROR_FLOOR};
pub use loss::{auto_time_is_regular, conversion_gain, loss, loss_auto, loss_with_grad, norm_term, AutoLoss, LossConfig, Norm};
pub use trainer::{conditions, draw_batch, split_heads, train, Objective, StepReport, TrainBatch, TrainConfig, TrainLogRow, Trainer};
