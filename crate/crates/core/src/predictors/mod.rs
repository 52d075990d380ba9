//! Residual and noise estimators.
//!
//! Every estimator answers a [`Query`] describing the current state. The
//! query carries the state's own `(abar, bbar)` coordinates rather than only
//! `t`, because decomposed sampling paths leave the schedule curve.

pub mod convert;
pub mod mlp;
pub mod oracle;

pub use convert::{
    convert_noise_to_residual, convert_residual_to_noise, noise_to_residual, residual_to_noise, SINGULAR_GUARD,
};
pub use mlp::{Heads, Mlp, MlpConfig, MlpPredictor, TimeCondition, PARAM_NAMES};
pub use oracle::{GaussianOracle, GaussianTaskParams, InputMode};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outputs {
    Residual,
    Noise,
    Both,
}

impl FromStr for Outputs {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual" => Ok(Self::Residual),
            "noise" => Ok(Self::Noise),
            "both" => Ok(Self::Both),
            other => Err(Error::InvalidArgument(format!("unknown outputs `{other}`"))),
        }
    }
}

impl fmt::Display for Outputs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Residual => "residual",
            Self::Noise => "noise",
            Self::Both => "both",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Query<'a> {
    pub i_t: &'a Tensor,
    pub i_in: &'a Tensor,
    pub t: usize,
    pub alpha_bar: f64,
    pub beta_bar: f64,
    pub total_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Prediction {
    pub residual: Option<Tensor>,
    pub noise: Option<Tensor>,
}

pub trait Predictor {
    fn outputs(&self) -> Outputs;
    fn predict(&self, q: &Query<'_>) -> Result<Prediction>;
}

/// Replays the residual and noise recorded during forward synthesis.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub i_res: Tensor,
    pub eps: Tensor,
}

impl GroundTruth {
    pub fn new(i_res: Tensor, eps: Tensor) -> Result<Self> {
        if i_res.shape() != eps.shape() {
            return Err(Error::ShapeMismatch { left: i_res.shape().to_vec(), right: eps.shape().to_vec() });
        }
        Ok(Self { i_res, eps })
    }
}

impl Predictor for GroundTruth {
    fn outputs(&self) -> Outputs {
        Outputs::Both
    }

    fn predict(&self, q: &Query<'_>) -> Result<Prediction> {
        if q.i_t.shape() != self.i_res.shape() {
            return Err(Error::ShapeMismatch { left: q.i_t.shape().to_vec(), right: self.i_res.shape().to_vec() });
        }
        Ok(Prediction { residual: Some(self.i_res.clone()), noise: Some(self.eps.clone()) })
    }
}

/// One predictor for everything, or separate residual and noise networks.
#[derive(Clone, Copy)]
pub enum PredictorSet<'a> {
    Single(&'a dyn Predictor),
    Pair { residual: &'a dyn Predictor, noise: &'a dyn Predictor },
}

impl<'a> PredictorSet<'a> {
    pub fn is_pair(&self) -> bool {
        matches!(self, Self::Pair { .. })
    }

    pub fn residual(&self, q: &Query<'_>) -> Result<Tensor> {
        let p = match self {
            Self::Single(p) => p,
            Self::Pair { residual, .. } => residual,
        };
        p.predict(q)?
            .residual
            .ok_or_else(|| Error::Predictor("predictor does not estimate the residual".into()))
    }

    pub fn noise(&self, q: &Query<'_>) -> Result<Tensor> {
        let p = match self {
            Self::Single(p) => p,
            Self::Pair { noise, .. } => noise,
        };
        p.predict(q)?
            .noise
            .ok_or_else(|| Error::Predictor("predictor does not estimate the noise".into()))
    }

    /// Both estimates, with a single call when one predictor serves both.
    pub fn both(&self, q: &Query<'_>) -> Result<(Tensor, Tensor)> {
        match self {
            Self::Single(p) => {
                let pred = p.predict(q)?;
                match (pred.residual, pred.noise) {
                    (Some(r), Some(e)) => Ok((r, e)),
                    _ => Err(Error::Predictor("SM-Res-N needs both residual and noise estimates".into())),
                }
            }
            Self::Pair { .. } => Ok((self.residual(q)?, self.noise(q)?)),
        }
    }
}
