//! Conversions between residual and noise estimates.
//!
//! Both follow from `I_t = I_in + (abar_t - 1) * I_res + bbar_t * eps`. Solving
//! for the residual divides by `abar_t - 1`, solving for the noise divides by
//! `bbar_t`; either denominator below [`SINGULAR_GUARD`] is an error.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::schedules::CoefficientSchedule;

pub const SINGULAR_GUARD: f64 = 1e-8;

/// `res = (I_t - I_in - bbar * eps) / (abar - 1)` at explicit coordinates.
pub fn noise_to_residual(
    eps_hat: &Tensor,
    i_t: &Tensor,
    i_in: &Tensor,
    alpha_bar: f64,
    beta_bar: f64,
    t: usize,
) -> Result<Tensor> {
    let denom = alpha_bar - 1.0;
    if denom.abs() < SINGULAR_GUARD {
        return Err(Error::SingularConversion {
            conversion: "noise-to-residual",
            t,
            detail: format!("|abar - 1| = {:e}", denom.abs()),
            remedy: "use SM-Res-N or a plan that avoids this t",
        });
    }
    let y = i_t.sub(i_in)?;
    y.lincomb(1.0 / denom, eps_hat, -beta_bar / denom)
}

/// `eps = (I_t - I_in - (abar - 1) * res) / bbar` at explicit coordinates.
pub fn residual_to_noise(
    res_hat: &Tensor,
    i_t: &Tensor,
    i_in: &Tensor,
    alpha_bar: f64,
    beta_bar: f64,
    t: usize,
) -> Result<Tensor> {
    if beta_bar < SINGULAR_GUARD {
        return Err(Error::SingularConversion {
            conversion: "residual-to-noise",
            t,
            detail: format!("bbar = {beta_bar:e}"),
            remedy: "use SM-Res-N or a plan that avoids this t",
        });
    }
    let y = i_t.sub(i_in)?;
    y.lincomb(1.0 / beta_bar, res_hat, -(alpha_bar - 1.0) / beta_bar)
}

pub fn convert_noise_to_residual(
    eps_hat: &Tensor,
    i_t: &Tensor,
    i_in: &Tensor,
    t: usize,
    schedule: &CoefficientSchedule,
) -> Result<Tensor> {
    noise_to_residual(eps_hat, i_t, i_in, schedule.alpha_bar(t)?, schedule.beta_bar(t)?, t)
}

pub fn convert_residual_to_noise(
    res_hat: &Tensor,
    i_t: &Tensor,
    i_in: &Tensor,
    t: usize,
    schedule: &CoefficientSchedule,
) -> Result<Tensor> {
    residual_to_noise(res_hat, i_t, i_in, schedule.alpha_bar(t)?, schedule.beta_bar(t)?, t)
}
