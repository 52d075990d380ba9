//! Distribution and pointwise quality metrics.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Null 99th percentiles of [`moment_distance`] between two independent
/// gaussian-2d sample sets, by set size, from 1000 replicate pairs.
pub const MOMENT_NULL_P99_N1E4: f64 = 0.106;
pub const MOMENT_NULL_P99_N1E5: f64 = 0.032;

/// Null 99th percentiles of [`energy_distance`] between two independent
/// mixture-2d sample sets, from 300 replicate pairs.
pub const ENERGY_NULL_P99_N1000: f64 = 0.012;
pub const ENERGY_NULL_P99_N2000: f64 = 0.0046;

/// Unbiased covariance of a `[n, d]` tensor, row-major `d x d`.
pub fn covariance(x: &Tensor) -> Result<Vec<f64>> {
    let (n, d) = (x.rows(), x.row_len());
    if n < 2 {
        return Err(Error::InvalidArgument("covariance needs at least 2 samples".into()));
    }
    let m = x.column_means();
    let mut c = vec![0.0; d * d];
    for r in 0..n {
        let row = x.row(r);
        for i in 0..d {
            let di = row[i] - m[i];
            for j in 0..d {
                c[i * d + j] += di * (row[j] - m[j]);
            }
        }
    }
    c.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    Ok(c)
}

/// `|mean_a - mean_b|_2 + |cov_a - cov_b|_F`.
pub fn moment_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.row_len() != b.row_len() {
        return Err(Error::ShapeMismatch { left: a.shape().to_vec(), right: b.shape().to_vec() });
    }
    let (ca, cb) = (covariance(a)?, covariance(b)?);
    let mean_term = a
        .column_means()
        .iter()
        .zip(b.column_means())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let cov_term = ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    Ok(mean_term + cov_term)
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn mean_within(x: &Tensor) -> f64 {
    let n = x.rows();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += dist(x.row(i), x.row(j));
        }
    }
    2.0 * s / (n * (n - 1)) as f64
}

/// Energy distance `2 E|a - b| - E|a - a'| - E|b - b'|`, U-statistic form
/// (within-set terms skip the diagonal, so identical sets give a small
/// negative value of order `1/n`).
pub fn energy_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.row_len() != b.row_len() {
        return Err(Error::ShapeMismatch { left: a.shape().to_vec(), right: b.shape().to_vec() });
    }
    let mut cross = 0.0;
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            cross += dist(a.row(i), b.row(j));
        }
    }
    cross /= (a.rows() * b.rows()) as f64;
    Ok(2.0 * cross - mean_within(a) - mean_within(b))
}

pub const PSNR_PEAK: f64 = 2.0;

/// Mean squared error and PSNR with peak 2 (data range `[-1, 1]`);
/// PSNR is `+inf` when the MSE is zero.
pub fn mse_psnr(pred: &Tensor, target: &Tensor) -> Result<(f64, f64)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch { left: pred.shape().to_vec(), right: target.shape().to_vec() });
    }
    let mse = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / pred.len() as f64;
    let psnr = if mse == 0.0 { f64::INFINITY } else { 10.0 * (PSNR_PEAK * PSNR_PEAK / mse).log10() };
    Ok((mse, psnr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    #[test]
    fn identical_sets() {
        let a = RandomStream::new(1).gaussian(&[200, 2]).unwrap();
        assert_eq!(moment_distance(&a, &a).unwrap(), 0.0);
        let e = energy_distance(&a, &a).unwrap();
        assert!(e.abs() < 0.02, "{e}");
    }

    #[test]
    fn mean_shift_shows_in_mean_term() {
        let a = RandomStream::new(2).gaussian(&[100, 2]).unwrap();
        let shifted = a.add(&Tensor::scalar(0.5)).unwrap();
        let d = moment_distance(&a, &shifted).unwrap();
        assert!((d - 0.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn energy_is_homogeneous() {
        let mut rng = RandomStream::new(3);
        let a = rng.gaussian(&[50, 2]).unwrap();
        let b = rng.gaussian(&[60, 2]).unwrap().add(&Tensor::scalar(1.0)).unwrap();
        let e1 = energy_distance(&a, &b).unwrap();
        let e2 = energy_distance(&a.scale(2.0).unwrap(), &b.scale(2.0).unwrap()).unwrap();
        assert!((e2 - 2.0 * e1).abs() < 1e-12);
    }

    #[test]
    fn psnr_closed_form() {
        let t = Tensor::zeros(&[4, 4]).unwrap();
        let p = Tensor::full(&[4, 4], 0.2).unwrap();
        let (mse, psnr) = mse_psnr(&p, &t).unwrap();
        assert!((mse - 0.04).abs() < 1e-15);
        assert!((psnr - 20.0).abs() < 1e-12);
        assert_eq!(mse_psnr(&t, &t).unwrap().1, f64::INFINITY);
    }

    #[test]
    fn too_few_samples() {
        let a = Tensor::zeros(&[1, 2]).unwrap();
        assert!(moment_distance(&a, &a).is_err());
    }
}
