//! Synthetic generation and restoration tasks.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forward::TripletBatch;
use crate::numerics::{RandomStream, Tensor};
use crate::predictors::{GaussianTaskParams, InputMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskMode {
    Generation,
    Restoration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Gaussian2d,
    Mixture2d,
    ShadeRestore,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Self::Gaussian2d, Self::Mixture2d, Self::ShadeRestore];
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-2d" => Ok(Self::Gaussian2d),
            "mixture-2d" => Ok(Self::Mixture2d),
            "shade-restore" => Ok(Self::ShadeRestore),
            other => Err(Error::InvalidArgument(format!("unknown task preset `{other}`"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian2d => "gaussian-2d",
            Self::Mixture2d => "mixture-2d",
            Self::ShadeRestore => "shade-restore",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetSampler {
    Gaussian { mu: Vec<f64>, s_sq: Vec<f64> },
    /// Equal-weight isotropic mixture.
    Mixture { means: Vec<Vec<f64>>, std: f64 },
    /// `side x side` images `g0 + gx * u + gy * v` on `u, v in [-1, 1]`,
    /// coefficients uniform in `+-amp`.
    Gradient { side: usize, amp: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Degradation {
    /// `I_in = I_0 + field`.
    Additive { field: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub mode: TaskMode,
    pub data_dim: usize,
    pub target: TargetSampler,
    pub degradation: Option<Degradation>,
    pub beta_bar_t_sq: f64,
}

pub const SHADE_SIDE: usize = 8;
pub const SHADE_AMPLITUDE: f64 = 0.6;

/// `-SHADE_AMPLITUDE` on the left half-plane (columns `< side / 2`), zero elsewhere.
pub fn shade_field(side: usize) -> Vec<f64> {
    (0..side * side)
        .map(|k| if k % side < side / 2 { -SHADE_AMPLITUDE } else { 0.0 })
        .collect()
}

impl TaskSpec {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Gaussian2d => Self {
                name: p.to_string(),
                mode: TaskMode::Generation,
                data_dim: 2,
                target: TargetSampler::Gaussian { mu: vec![1.0, -0.5], s_sq: vec![0.5, 1.5] },
                degradation: None,
                beta_bar_t_sq: 1.0,
            },
            Preset::Mixture2d => Self {
                name: p.to_string(),
                mode: TaskMode::Generation,
                data_dim: 2,
                target: TargetSampler::Mixture { means: vec![vec![1.5, 0.0], vec![-1.5, 0.0]], std: 0.35 },
                degradation: None,
                beta_bar_t_sq: 1.0,
            },
            Preset::ShadeRestore => Self {
                name: p.to_string(),
                mode: TaskMode::Restoration,
                data_dim: SHADE_SIDE * SHADE_SIDE,
                target: TargetSampler::Gradient { side: SHADE_SIDE, amp: 0.3 },
                degradation: Some(Degradation::Additive { field: shade_field(SHADE_SIDE) }),
                beta_bar_t_sq: 0.01,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.mode, &self.degradation) {
            (TaskMode::Generation, None) | (TaskMode::Restoration, Some(_)) => {}
            _ => return Err(Error::InvalidArgument(format!("task {}: degradation must match mode", self.name))),
        }
        if let Some(Degradation::Additive { field }) = &self.degradation {
            if field.len() != self.data_dim {
                return Err(Error::ShapeMismatch { left: vec![self.data_dim], right: vec![field.len()] });
            }
        }
        if !(self.beta_bar_t_sq > 0.0) {
            return Err(Error::InvalidArgument("beta_bar_t_sq must be positive".into()));
        }
        Ok(())
    }

    /// Draws targets and, for mixtures, the component of each row.
    pub fn sample_targets_labeled(&self, n: usize, stream: &mut RandomStream) -> Result<(Tensor, Vec<usize>)> {
        if n == 0 {
            return Err(Error::InvalidArgument("dataset size must be at least 1".into()));
        }
        let d = self.data_dim;
        let mut data = vec![0.0; n * d];
        let mut labels = vec![0; n];
        match &self.target {
            TargetSampler::Gaussian { mu, s_sq } => {
                stream.fill_normal(&mut data);
                for (k, v) in data.iter_mut().enumerate() {
                    *v = mu[k % d] + s_sq[k % d].sqrt() * *v;
                }
            }
            TargetSampler::Mixture { means, std } => {
                for (r, label) in labels.iter_mut().enumerate() {
                    *label = stream.below(means.len());
                    let row = &mut data[r * d..(r + 1) * d];
                    stream.fill_normal(row);
                    for (v, m) in row.iter_mut().zip(&means[*label]) {
                        *v = m + std * *v;
                    }
                }
            }
            TargetSampler::Gradient { side, amp } => {
                let span = (*side - 1).max(1) as f64;
                for r in 0..n {
                    let g: Vec<f64> = (0..3).map(|_| amp * (2.0 * stream.uniform() - 1.0)).collect();
                    for i in 0..*side {
                        for j in 0..*side {
                            let u = 2.0 * j as f64 / span - 1.0;
                            let v = 2.0 * i as f64 / span - 1.0;
                            data[r * d + i * side + j] = g[0] + g[1] * u + g[2] * v;
                        }
                    }
                }
            }
        }
        Ok((Tensor::new(vec![n, d], data)?, labels))
    }

    pub fn sample_targets(&self, n: usize, stream: &mut RandomStream) -> Result<Tensor> {
        Ok(self.sample_targets_labeled(n, stream)?.0)
    }

    /// The conditional input for each target: zeros, or the degraded image.
    pub fn input_for(&self, i0: &Tensor) -> Result<Tensor> {
        match &self.degradation {
            None => Tensor::zeros(i0.shape()),
            Some(Degradation::Additive { field }) => {
                let f = Tensor::broadcast_rows(field, i0.rows())?;
                i0.add(&f)
            }
        }
    }

    pub fn make_dataset(&self, n: usize, stream: &mut RandomStream) -> Result<TripletBatch> {
        let i0 = self.sample_targets(n, stream)?;
        let i_in = self.input_for(&i0)?;
        TripletBatch::new(i0, i_in)
    }

    /// Oracle parameters when the target is Gaussian and the task generative.
    pub fn gaussian_params(&self) -> Option<GaussianTaskParams> {
        match (&self.target, self.mode) {
            (TargetSampler::Gaussian { mu, s_sq }, TaskMode::Generation) => {
                GaussianTaskParams::new(mu.clone(), s_sq.clone(), InputMode::Zero).ok()
            }
            _ => None,
        }
    }

    /// Whether samples are `side x side` images.
    pub fn image_side(&self) -> Option<usize> {
        match self.target {
            TargetSampler::Gradient { side, .. } => Some(side),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_has_zero_input() {
        let spec = TaskSpec::preset(Preset::Gaussian2d);
        let tri = spec.make_dataset(5, &mut RandomStream::new(1)).unwrap();
        assert!(tri.i_in.data().iter().all(|v| *v == 0.0));
        assert_eq!(tri.i_res, tri.i0.scale(-1.0).unwrap());
    }

    #[test]
    fn shade_residual_is_the_field() {
        let spec = TaskSpec::preset(Preset::ShadeRestore);
        spec.validate().unwrap();
        let tri = spec.make_dataset(3, &mut RandomStream::new(2)).unwrap();
        let field = shade_field(SHADE_SIDE);
        for r in 0..3 {
            for (a, b) in tri.i_res.row(r).iter().zip(&field) {
                assert!((a - b).abs() < 1e-15);
            }
            assert!(tri.i0.row(r).iter().all(|v| v.abs() <= 1.0));
        }
        let degraded_mse = field.iter().map(|v| v * v).sum::<f64>() / field.len() as f64;
        assert!((degraded_mse - 0.18).abs() < 1e-15);
    }

    #[test]
    fn mixture_occupancy() {
        let spec = TaskSpec::preset(Preset::Mixture2d);
        let (_, labels) = spec.sample_targets_labeled(100_000, &mut RandomStream::new(3)).unwrap();
        let frac = labels.iter().filter(|&&l| l == 0).count() as f64 / 1e5;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn empty_dataset_rejected() {
        let spec = TaskSpec::preset(Preset::Gaussian2d);
        assert!(spec.make_dataset(0, &mut RandomStream::new(1)).is_err());
    }

    #[test]
    fn presets_parse() {
        for p in Preset::ALL {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
            TaskSpec::preset(p).validate().unwrap();
        }
    }
}
