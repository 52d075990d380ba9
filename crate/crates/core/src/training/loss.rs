//! Training losses and their gradients.
//!
//! All norms are means over batch and dimensions. The automatic objective
//! mixes a single network output `o` into both estimates,
//!
//! `res = l * o + (1 - l) * (y - B o) / A`, `eps = l * (y - A o) / B + (1 - l) * o`,
//!
//! with `y = I_t - I_in`, `A = abar - 1`, `B = bbar`, and minimizes
//! `l * |R - res|^2 + (1 - l) * |E - eps|^2` jointly in `o` and `l`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::predictors::SINGULAR_GUARD;
use crate::schedules::CoefficientSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            other => Err(Error::InvalidArgument(format!("unknown loss norm `{other}`"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L1 => "l1",
            Self::L2 => "l2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub lambda_res: f64,
    pub lambda_eps: f64,
    pub norm: Norm,
}

impl LossConfig {
    pub fn new(lambda_res: f64, lambda_eps: f64, norm: Norm) -> Result<Self> {
        let ok = |v: f64| v == 0.0 || v == 1.0;
        if !ok(lambda_res) || !ok(lambda_eps) || lambda_res + lambda_eps < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "loss weights must be 0 or 1 with at least one set, got ({lambda_res}, {lambda_eps})"
            )));
        }
        Ok(Self { lambda_res, lambda_eps, norm })
    }

    pub fn residual(norm: Norm) -> Self {
        Self { lambda_res: 1.0, lambda_eps: 0.0, norm }
    }

    pub fn noise(norm: Norm) -> Self {
        Self { lambda_res: 0.0, lambda_eps: 1.0, norm }
    }

    pub fn both(norm: Norm) -> Self {
        Self { lambda_res: 1.0, lambda_eps: 1.0, norm }
    }
}

/// Mean norm of `pred - target` and its gradient with respect to `pred`.
/// The L1 subgradient at zero is zero.
pub fn norm_term(pred: &Tensor, target: &Tensor, norm: Norm) -> Result<(f64, Tensor)> {
    let diff = pred.sub(target)?;
    let n = diff.len() as f64;
    match norm {
        Norm::L2 => {
            let v = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
            Ok((v, diff.scale(2.0 / n)?))
        }
        Norm::L1 => {
            let v = diff.data().iter().map(|d| d.abs()).sum::<f64>() / n;
            let g = diff.map(|d| if d > 0.0 { 1.0 / n } else if d < 0.0 { -1.0 / n } else { 0.0 })?;
            Ok((v, g))
        }
    }
}

/// `lambda_res * |I_res - res_hat| + lambda_eps * |eps - eps_hat|`.
pub fn loss(pred_res: &Tensor, true_res: &Tensor, pred_eps: &Tensor, true_eps: &Tensor, config: &LossConfig) -> Result<f64> {
    let (v, _, _) = loss_with_grad(Some(pred_res), true_res, Some(pred_eps), true_eps, config)?;
    Ok(v)
}

/// Loss value and gradients with respect to whichever predictions carry
/// weight. A prediction with weight zero may be omitted.
pub fn loss_with_grad(
    pred_res: Option<&Tensor>,
    true_res: &Tensor,
    pred_eps: Option<&Tensor>,
    true_eps: &Tensor,
    config: &LossConfig,
) -> Result<(f64, Option<Tensor>, Option<Tensor>)> {
    let mut value = 0.0;
    let mut g_res = None;
    let mut g_eps = None;
    if config.lambda_res != 0.0 {
        let p = pred_res.ok_or_else(|| Error::InvalidArgument("residual loss needs a residual prediction".into()))?;
        let (v, g) = norm_term(p, true_res, config.norm)?;
        value += config.lambda_res * v;
        g_res = Some(g.scale(config.lambda_res)?);
    }
    if config.lambda_eps != 0.0 {
        let p = pred_eps.ok_or_else(|| Error::InvalidArgument("noise loss needs a noise prediction".into()))?;
        let (v, g) = norm_term(p, true_eps, config.norm)?;
        value += config.lambda_eps * v;
        g_eps = Some(g.scale(config.lambda_eps)?);
    }
    Ok((value, g_res, g_eps))
}

#[derive(Clone, Debug)]
pub struct AutoLoss {
    pub value: f64,
    pub d_out: Tensor,
    pub d_lambda: f64,
    pub residual_term: f64,
    pub noise_term: f64,
}

/// Error gain of the worse of the two conversions at `t`:
/// `max(bbar / |abar - 1|, |abar - 1| / bbar)`.
pub fn conversion_gain(schedule: &CoefficientSchedule, t: usize) -> Result<f64> {
    let a = (schedule.alpha_bar(t)? - 1.0).abs();
    let b = schedule.beta_bar(t)?;
    Ok((b / a).max(a / b))
}

/// Checks both conversions are usable at `t` and amplify errors by at most
/// `max_gain` (pass `f64::INFINITY` to reject only singular points).
pub fn auto_time_is_regular(schedule: &CoefficientSchedule, t: usize, max_gain: f64) -> Result<bool> {
    let a = schedule.alpha_bar(t)? - 1.0;
    let b = schedule.beta_bar(t)?;
    Ok(a.abs() >= SINGULAR_GUARD && b >= SINGULAR_GUARD && conversion_gain(schedule, t)? <= max_gain)
}

/// The automatic-objective loss for per-row timesteps `t`.
#[allow(clippy::too_many_arguments)]
pub fn loss_auto(
    i_out: &Tensor,
    true_res: &Tensor,
    true_eps: &Tensor,
    i_t: &Tensor,
    i_in: &Tensor,
    t: &[usize],
    schedule: &CoefficientSchedule,
    lambda: f64,
) -> Result<AutoLoss> {
    for x in [true_res, true_eps, i_t, i_in] {
        if x.shape() != i_out.shape() {
            return Err(Error::ShapeMismatch { left: i_out.shape().to_vec(), right: x.shape().to_vec() });
        }
    }
    let rows = i_out.rows();
    if t.len() != rows {
        return Err(Error::ShapeMismatch { left: vec![rows], right: vec![t.len()] });
    }
    let w = i_out.row_len();
    let n = i_out.len() as f64;
    let l = lambda;
    let mut sum_r = 0.0;
    let mut sum_e = 0.0;
    let mut cross = 0.0;
    let mut d_out = vec![0.0; i_out.len()];
    for r in 0..rows {
        let a = schedule.alpha_bar(t[r])? - 1.0;
        let b = schedule.beta_bar(t[r])?;
        if a.abs() < SINGULAR_GUARD || b < SINGULAR_GUARD {
            return Err(Error::SingularConversion {
                conversion: "automatic objective",
                t: t[r],
                detail: format!("abar - 1 = {a:e}, bbar = {b:e}"),
                remedy: "resample t",
            });
        }
        let dr_do = l - (1.0 - l) * b / a;
        let de_do = -l * a / b + (1.0 - l);
        for k in r * w..(r + 1) * w {
            let o = i_out.data()[k];
            let y = i_t.data()[k] - i_in.data()[k];
            let to_res = (y - b * o) / a;
            let to_eps = (y - a * o) / b;
            let res = l * o + (1.0 - l) * to_res;
            let eps = l * to_eps + (1.0 - l) * o;
            let er = res - true_res.data()[k];
            let ee = eps - true_eps.data()[k];
            sum_r += er * er;
            sum_e += ee * ee;
            d_out[k] = (2.0 * l * er * dr_do + 2.0 * (1.0 - l) * ee * de_do) / n;
            cross += 2.0 * l * er * (o - to_res) + 2.0 * (1.0 - l) * ee * (to_eps - o);
        }
    }
    let (lr, le) = (sum_r / n, sum_e / n);
    let value = l * lr + (1.0 - l) * le;
    if !value.is_finite() {
        return Err(Error::NonFinite("loss_auto"));
    }
    Ok(AutoLoss {
        value,
        d_out: Tensor::new(i_out.shape().to_vec(), d_out)?,
        d_lambda: lr - le + cross / n,
        residual_term: lr,
        noise_term: le,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;
    use crate::schedules::VarianceMode;

    #[test]
    fn perfect_predictions() {
        let x = Tensor::full(&[2, 2], 0.3).unwrap();
        assert_eq!(loss(&x, &x, &x, &x, &LossConfig::both(Norm::L2)).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset() {
        let a = Tensor::full(&[3, 2], 2.0).unwrap();
        let z = Tensor::zeros(&[3, 2]).unwrap();
        assert_eq!(loss(&a, &z, &z, &z, &LossConfig::residual(Norm::L2)).unwrap(), 4.0);
        assert_eq!(loss(&a, &z, &z, &z, &LossConfig::residual(Norm::L1)).unwrap(), 2.0);
    }

    #[test]
    fn both_terms_add() {
        let mut rng = RandomStream::new(1);
        let v: Vec<Tensor> = (0..4).map(|_| rng.gaussian(&[5, 2]).unwrap()).collect();
        for norm in [Norm::L1, Norm::L2] {
            let both = loss(&v[0], &v[1], &v[2], &v[3], &LossConfig::both(norm)).unwrap();
            let r = loss(&v[0], &v[1], &v[2], &v[3], &LossConfig::residual(norm)).unwrap();
            let e = loss(&v[0], &v[1], &v[2], &v[3], &LossConfig::noise(norm)).unwrap();
            assert!((both - r - e).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_weights() {
        assert!(LossConfig::new(0.0, 0.0, Norm::L2).is_err());
        assert!(LossConfig::new(0.5, 1.0, Norm::L2).is_err());
    }

    fn setup() -> (CoefficientSchedule, Vec<Tensor>, Vec<usize>) {
        let s = CoefficientSchedule::power(100, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let mut rng = RandomStream::new(2);
        let v = (0..5).map(|_| rng.gaussian(&[3, 2]).unwrap()).collect();
        (s, v, vec![10, 50, 90])
    }

    #[test]
    fn auto_endpoints_match_single_objectives() {
        let (s, v, t) = setup();
        let (o, r, e, it, iin) = (&v[0], &v[1], &v[2], &v[3], &v[4]);
        let at1 = loss_auto(o, r, e, it, iin, &t, &s, 1.0).unwrap();
        let plain = loss(o, r, o, e, &LossConfig::residual(Norm::L2)).unwrap();
        assert!((at1.value - plain).abs() < 1e-12);
        let at0 = loss_auto(o, r, e, it, iin, &t, &s, 0.0).unwrap();
        let plain = loss(o, r, o, e, &LossConfig::noise(Norm::L2)).unwrap();
        assert!((at0.value - plain).abs() < 1e-12);
        assert_eq!(loss_auto(r, r, e, it, iin, &t, &s, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn auto_gradients_match_finite_differences() {
        let (s, v, t) = setup();
        let (o, r, e, it, iin) = (&v[0], &v[1], &v[2], &v[3], &v[4]);
        let lam = 0.37;
        let base = loss_auto(o, r, e, it, iin, &t, &s, lam).unwrap();
        let h = 1e-6;
        let f = |l: f64| loss_auto(o, r, e, it, iin, &t, &s, l).unwrap().value;
        let fd = (f(lam + h) - f(lam - h)) / (2.0 * h);
        assert!((fd - base.d_lambda).abs() < 1e-6 * fd.abs().max(1.0));
        for k in 0..o.len() {
            let mut up = o.clone();
            up.data_mut()[k] += h;
            let mut dn = o.clone();
            dn.data_mut()[k] -= h;
            let g = |x: &Tensor| loss_auto(x, r, e, it, iin, &t, &s, lam).unwrap().value;
            let fd = (g(&up) - g(&dn)) / (2.0 * h);
            assert!((fd - base.d_out.data()[k]).abs() < 1e-6 * fd.abs().max(1.0), "{k}");
        }
    }

    #[test]
    fn auto_rejects_singular_t() {
        let (s, v, _) = setup();
        let err = loss_auto(&v[0], &v[1], &v[2], &v[3], &v[4], &[100, 1, 2], &s, 0.5).unwrap_err();
        assert!(matches!(err, Error::SingularConversion { t: 100, .. }));
    }
}
