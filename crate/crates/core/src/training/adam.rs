//! Adam over a list of flat parameter buffers.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Drops the moment estimates and the step count.
    pub fn reset(&mut self) {
        self.step = 0;
        self.m.clear();
        self.v.clear();
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch { left: vec![params.len()], right: vec![grads.len()] });
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if p.len() != g.len() || self.m[k].len() != g.len() {
                return Err(Error::ShapeMismatch { left: vec![p.len()], right: vec![g.len()] });
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_is_inert() {
        let mut w = vec![1.0, -2.0];
        let mut opt = Adam::new(0.0);
        opt.step(&mut [&mut w[..]], &[vec![3.0, 4.0]]).unwrap();
        assert_eq!(w, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = [0.0];
        let mut opt = Adam::new(0.1);
        opt.step(&mut [&mut w[..]], &[vec![5.0]]).unwrap();
        assert!((w[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut w = [3.0];
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let g = vec![2.0 * (w[0] - 1.0)];
            opt.step(&mut [&mut w[..]], &[g]).unwrap();
        }
        assert!((w[0] - 1.0).abs() < 1e-3);
        opt.reset();
        assert_eq!(opt.steps(), 0);
    }
}
