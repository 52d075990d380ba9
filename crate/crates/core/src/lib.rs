//! Residual denoising diffusion with decoupled residual and noise schedules.
//!
//! The forward process mixes three terms,
//! `I_t = I_0 + abar_t * I_res + bbar_t * eps`, where `I_res = I_in - I_0`
//! is the residual between a conditional input and the target. Generation is
//! the special case `I_in = 0`. The crate covers schedule construction and
//! conversion to and from DDIM, forward synthesis, the reverse samplers
//! (residual, noise, or both predicted), a small MLP trained with manual
//! backprop and Adam, automatic objective selection, synthetic tasks and
//! distribution metrics.

pub mod config;
pub mod error;
pub mod forward;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod predictors;
pub mod reverse;
pub mod schedules;
pub mod tasks;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::{RandomStream, Tensor};
