//! Seeded, counter-addressable random streams.
//!
//! A [`RandomStream`] is a ChaCha12 keystream keyed by `seed` and a stream
//! id. The counter counts 64-bit words drawn, so `(seed, stream, counter)`
//! pins the next output exactly. Normals use the Box–Muller transform, two
//! words per pair of normals; an odd-length request discards the last sine
//! branch so the counter always advances by `2 * ceil(n / 2)`.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream: u64,
    counter: u64,
    rng: ChaCha12Rng,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::at(seed, 0, 0)
    }

    /// Positions a stream at an arbitrary counter without drawing.
    pub fn at(seed: u64, stream: u64, counter: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(counter) * 2);
        Self { seed, stream, counter, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// An independent stream identified by `k`. Deriving does not advance `self`.
    pub fn derive(&self, k: u64) -> Self {
        let id = mix64(self.stream ^ mix64(k.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        Self::at(self.seed, id, 0)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe for `ln`.
    fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_mut(2);
        for pair in &mut chunks {
            let u1 = self.uniform_open0();
            let u2 = self.uniform();
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = std::f64::consts::TAU * u2;
            pair[0] = r * theta.cos();
            if pair.len() == 2 {
                pair[1] = r * theta.sin();
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        let mut v = [0.0];
        self.fill_normal(&mut v);
        v[0]
    }

    /// I.i.d. standard normal tensor of the given shape.
    pub fn gaussian(&mut self, shape: &[usize]) -> Result<Tensor> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidShape(shape.to_vec()));
        }
        let mut data = vec![0.0; shape.iter().product()];
        self.fill_normal(&mut data);
        Tensor::new(shape.to_vec(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let a = RandomStream::new(7).gaussian(&[4]).unwrap();
        let b = RandomStream::new(7).gaussian(&[4]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn counter_addresses_the_sequence() {
        let mut s = RandomStream::new(3);
        let _ = s.gaussian(&[5]).unwrap();
        assert_eq!(s.counter(), 6);
        let tail = s.gaussian(&[4]).unwrap();
        let mut jumped = RandomStream::at(3, 0, 6);
        assert_eq!(jumped.gaussian(&[4]).unwrap(), tail);
    }

    #[test]
    fn derived_streams_differ_and_leave_parent_alone() {
        let s = RandomStream::new(11);
        let a = s.derive(0).gaussian(&[8]).unwrap();
        let b = s.derive(1).gaussian(&[8]).unwrap();
        assert_ne!(a, b);
        assert_eq!(s.counter(), 0);
        assert_eq!(s.derive(1).gaussian(&[8]).unwrap(), b);
    }

    #[test]
    fn empty_shape_is_an_error() {
        assert!(RandomStream::new(1).gaussian(&[0]).is_err());
        assert!(RandomStream::new(1).gaussian(&[3, 0]).is_err());
    }

    #[test]
    fn million_draw_moments() {
        let n = 1_000_000;
        let x = RandomStream::new(2024).gaussian(&[n]).unwrap();
        // standard error of the mean is 1e-3
        assert!(x.mean().abs() < 4e-3, "mean {}", x.mean());
        assert!((x.var() - 1.0).abs() < 0.01, "var {}", x.var());
    }

    #[test]
    fn uniform_range_and_mean() {
        let mut s = RandomStream::new(5);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        assert!((sum / n as f64 - 0.5).abs() < 4.0 * (1.0f64 / 12.0).sqrt() / (n as f64).sqrt());
    }
}
