//! Bayes-optimal predictor for a diagonal Gaussian target.
//!
//! With `I_0 ~ N(mu, diag(s^2))` and a fixed input `v`, the diffused state is
//! `I_t = c * I_0 + abar * v + bbar * eps` where `c = 1 - abar`. Writing
//! `y = I_t - abar * v`, the conjugate posterior gives
//! `E[I_0 | I_t] = mu + c s^2 / (c^2 s^2 + bbar^2) * (y - c mu)`.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::predictors::{Outputs, Prediction, Predictor, Query};

#[derive(Clone, Debug, PartialEq)]
pub enum InputMode {
    Zero,
    Fixed(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTaskParams {
    pub mu: Vec<f64>,
    pub s_sq: Vec<f64>,
    pub i_in_mode: InputMode,
}

impl GaussianTaskParams {
    pub fn new(mu: Vec<f64>, s_sq: Vec<f64>, i_in_mode: InputMode) -> Result<Self> {
        if mu.len() != s_sq.len() || mu.is_empty() {
            return Err(Error::ShapeMismatch { left: vec![mu.len()], right: vec![s_sq.len()] });
        }
        if let InputMode::Fixed(v) = &i_in_mode {
            if v.len() != mu.len() {
                return Err(Error::ShapeMismatch { left: vec![mu.len()], right: vec![v.len()] });
            }
        }
        if s_sq.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("target variances must be positive".into()));
        }
        Ok(Self { mu, s_sq, i_in_mode })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn input(&self, j: usize) -> f64 {
        match &self.i_in_mode {
            InputMode::Zero => 0.0,
            InputMode::Fixed(v) => v[j],
        }
    }
}

#[derive(Clone, Debug)]
pub struct GaussianOracle {
    pub params: GaussianTaskParams,
}

impl GaussianOracle {
    pub fn new(params: GaussianTaskParams) -> Self {
        Self { params }
    }

    /// Posterior mean of `I_0` and the matching residual and noise estimates.
    pub fn posterior(&self, i_t: &Tensor, alpha_bar: f64, beta_bar: f64) -> Result<(Tensor, Tensor, Tensor)> {
        let d = self.params.dim();
        if i_t.row_len() != d {
            return Err(Error::ShapeMismatch { left: i_t.shape().to_vec(), right: vec![i_t.rows(), d] });
        }
        let c = 1.0 - alpha_bar;
        let b2 = beta_bar * beta_bar;
        let mut e0 = Vec::with_capacity(i_t.len());
        let mut res = Vec::with_capacity(i_t.len());
        let mut eps = Vec::with_capacity(i_t.len());
        for (k, &x) in i_t.data().iter().enumerate() {
            let j = k % d;
            let (mu, s2, v) = (self.params.mu[j], self.params.s_sq[j], self.params.input(j));
            let denom = c * c * s2 + b2;
            if denom == 0.0 {
                return Err(Error::Predictor("oracle posterior is degenerate (c^2 s^2 + bbar^2 = 0)".into()));
            }
            let innov = x - alpha_bar * v - c * mu;
            let m = mu + c * s2 / denom * innov;
            e0.push(m);
            res.push(v - m);
            eps.push(beta_bar / denom * innov);
        }
        let shape = i_t.shape().to_vec();
        Ok((
            Tensor::new(shape.clone(), e0)?,
            Tensor::new(shape.clone(), res)?,
            Tensor::new(shape, eps)?,
        ))
    }
}

impl Predictor for GaussianOracle {
    fn outputs(&self) -> Outputs {
        Outputs::Both
    }

    fn predict(&self, q: &Query<'_>) -> Result<Prediction> {
        let (_, res, eps) = self.posterior(q.i_t, q.alpha_bar, q.beta_bar)?;
        Ok(Prediction { residual: Some(res), noise: Some(eps) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    fn standard() -> GaussianOracle {
        GaussianOracle::new(GaussianTaskParams::new(vec![0.0], vec![1.0], InputMode::Zero).unwrap())
    }

    #[test]
    fn worked_example() {
        // posterior mean 1.0 cross-checked by numerical quadrature
        let (e0, res, eps) = standard().posterior(&Tensor::from_vec(vec![1.0]).unwrap(), 0.5, 0.5).unwrap();
        assert!((e0.data()[0] - 1.0).abs() < 1e-15);
        assert!((res.data()[0] + 1.0).abs() < 1e-15);
        assert!((eps.data()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_limit_inverts() {
        let (e0, _, _) = standard().posterior(&Tensor::from_vec(vec![0.3]).unwrap(), 0.4, 1e-9).unwrap();
        assert!((e0.data()[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn degenerate_posterior() {
        assert!(standard().posterior(&Tensor::from_vec(vec![0.3]).unwrap(), 1.0, 0.0).is_err());
        assert!(GaussianTaskParams::new(vec![0.0], vec![0.0], InputMode::Zero).is_err());
    }

    #[test]
    fn beats_perturbed_linear_predictors() {
        let p = GaussianTaskParams::new(vec![1.0], vec![0.5], InputMode::Zero).unwrap();
        let oracle = GaussianOracle::new(p);
        let (ab, bb) = (0.6, 0.7);
        let mut rng = RandomStream::new(31);
        let n = 100_000;
        let z = rng.gaussian(&[n, 1]).unwrap();
        let i0 = z.map(|v| 1.0 + 0.5f64.sqrt() * v).unwrap();
        let eps = rng.gaussian(&[n, 1]).unwrap();
        let i_t = i0.lincomb(1.0 - ab, &eps, bb).unwrap();
        let (e0, _, _) = oracle.posterior(&i_t, ab, bb).unwrap();
        let mse = |pred: &Tensor| pred.sub(&i0).unwrap().map(|v| v * v).unwrap().mean();
        let base = mse(&e0);
        // the oracle is affine in I_t: E = g * I_t + h
        let c = 1.0 - ab;
        let g = c * 0.5 / (c * c * 0.5 + bb * bb);
        let h = 1.0 - g * c;
        for _ in 0..20 {
            let theta = std::f64::consts::TAU * rng.uniform();
            let (dg, dh) = (0.05 * theta.cos(), 0.05 * theta.sin());
            let alt = i_t.map(|x| (g + dg) * x + h + dh).unwrap();
            assert!(mse(&alt) - base > 0.0);
        }
    }
}
