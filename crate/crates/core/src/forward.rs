//! Three-term forward diffusion.
//!
//! One step adds a residual shift and fresh noise,
//! `I_t = I_{t-1} + alpha_t * I_res + beta_t * eps`, and the steps telescope
//! into the closed form `I_t = I_0 + abar_t * I_res + bbar_t * eps`.

use crate::error::{Error, Result};
use crate::numerics::{RandomStream, Tensor};
use crate::schedules::CoefficientSchedule;

#[derive(Clone, Debug)]
pub struct DiffusionState<'s> {
    pub x: Tensor,
    pub t: usize,
    pub schedule: &'s CoefficientSchedule,
}

impl<'s> DiffusionState<'s> {
    pub fn new(x: Tensor, t: usize, schedule: &'s CoefficientSchedule) -> Result<Self> {
        if t > schedule.total_steps() {
            return Err(Error::TimeOutOfRange { t, lo: 0, hi: schedule.total_steps() });
        }
        Ok(Self { x, t, schedule })
    }
}

/// Targets, conditional inputs, residuals and (optionally) the noise used.
#[derive(Clone, Debug, PartialEq)]
pub struct TripletBatch {
    pub i0: Tensor,
    pub i_in: Tensor,
    pub i_res: Tensor,
    pub eps: Option<Tensor>,
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch { left: a.shape().to_vec(), right: b.shape().to_vec() });
    }
    Ok(())
}

impl TripletBatch {
    pub fn new(i0: Tensor, i_in: Tensor) -> Result<Self> {
        same_shape(&i0, &i_in)?;
        let i_res = i_in.sub(&i0)?;
        Ok(Self { i0, i_in, i_res, eps: None })
    }

    /// Generation pairs every target with an all-zero input.
    pub fn generation(i0: Tensor) -> Result<Self> {
        let i_in = Tensor::zeros(i0.shape())?;
        Self::new(i0, i_in)
    }

    pub fn len(&self) -> usize {
        self.i0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        same_shape(&self.i0, &self.i_in)?;
        same_shape(&self.i0, &self.i_res)?;
        if let Some(eps) = &self.eps {
            same_shape(&self.i0, eps)?;
        }
        let expected = self.i_in.sub(&self.i0)?;
        if expected.max_abs_diff(&self.i_res)? > 1e-12 {
            return Err(Error::InvalidArgument("i_res differs from i_in - i0".into()));
        }
        Ok(())
    }
}

/// Advances `state` from `t - 1` to `t` with fresh noise.
pub fn forward_step<'s>(
    state: &DiffusionState<'s>,
    i_res: &Tensor,
    stream: &mut RandomStream,
) -> Result<DiffusionState<'s>> {
    let s = state.schedule;
    if state.t >= s.total_steps() {
        return Err(Error::TimeOutOfRange { t: state.t + 1, lo: 1, hi: s.total_steps() });
    }
    let t = state.t + 1;
    let eps = stream.gaussian(state.x.shape())?;
    let beta = s.beta_sq(t)?.sqrt();
    let x = state.x.lincomb(1.0, i_res, s.alpha(t)?)?.lincomb(1.0, &eps, beta)?;
    Ok(DiffusionState { x, t, schedule: s })
}

fn check_synthesis_time(t: usize, schedule: &CoefficientSchedule) -> Result<()> {
    if t == 0 || t > schedule.total_steps() {
        return Err(Error::TimeOutOfRange { t, lo: 1, hi: schedule.total_steps() });
    }
    Ok(())
}

/// Closed-form `I_t` for a given noise tensor.
pub fn synthesize_with_noise<'s>(
    triplet: &TripletBatch,
    t: usize,
    schedule: &'s CoefficientSchedule,
    eps: &Tensor,
) -> Result<DiffusionState<'s>> {
    check_synthesis_time(t, schedule)?;
    same_shape(&triplet.i0, eps)?;
    let x = triplet
        .i0
        .lincomb(1.0, &triplet.i_res, schedule.alpha_bar(t)?)?
        .lincomb(1.0, eps, schedule.beta_bar(t)?)?;
    Ok(DiffusionState { x, t, schedule })
}

/// Samples `I_t ~ q(I_t | I_0, I_res)` and returns the noise drawn.
pub fn synthesize<'s>(
    triplet: &TripletBatch,
    t: usize,
    schedule: &'s CoefficientSchedule,
    stream: &mut RandomStream,
) -> Result<(DiffusionState<'s>, Tensor)> {
    check_synthesis_time(t, schedule)?;
    let eps = stream.gaussian(triplet.i0.shape())?;
    let state = synthesize_with_noise(triplet, t, schedule, &eps)?;
    Ok((state, eps))
}

/// `I_t = I_in + (abar_t - 1) * I_res + bbar_t * eps`.
pub fn synthesize_from_input(
    i_in: &Tensor,
    i_res: &Tensor,
    t: usize,
    schedule: &CoefficientSchedule,
    eps: &Tensor,
) -> Result<Tensor> {
    check_synthesis_time(t, schedule)?;
    same_shape(i_in, i_res)?;
    same_shape(i_in, eps)?;
    i_in.lincomb(1.0, i_res, schedule.alpha_bar(t)? - 1.0)?
        .lincomb(1.0, eps, schedule.beta_bar(t)?)
}

/// Coefficients of `q(I_t | I_0, I_res) = N(c0 * I_0 + c_res * I_res, std^2 I)`
/// as `(c0, c_res, std)`.
pub fn marginal_params(t: usize, schedule: &CoefficientSchedule) -> Result<(f64, f64, f64)> {
    check_synthesis_time(t, schedule)?;
    Ok((1.0, schedule.alpha_bar(t)?, schedule.beta_bar(t)?))
}
