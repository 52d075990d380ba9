//! Decoupled residual/noise coefficient schedules.
//!
//! A [`CoefficientSchedule`] carries per-step residual rates `alpha_t` and
//! noise-variance rates `beta_t^2` for `t = 1..=T` together with their
//! cumulatives `abar_t = sum alpha_i` and `bbar_t^2 = sum beta_i^2`, with
//! `abar_0 = bbar_0 = 0` stored explicitly. Schedules are built from the
//! normalized power family, converted from DDIM `alphas_cumprod` schedules,
//! or readjusted at test time.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which posterior variance `sigma_t^2` the reverse process uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceMode {
    /// `eta * (bbar_p^2 / bbar_t^2) * (1 - abar_ddim_t / abar_ddim_p)`, written in
    /// residual-schedule terms through `abar_ddim = (1 - abar)^2`.
    Ddim,
    /// `eta * (bbar_t^2 - bbar_p^2) * bbar_p^2 / bbar_t^2`, sum-constrained.
    Rddm,
}

impl FromStr for VarianceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddim" => Ok(Self::Ddim),
            "rddm" => Ok(Self::Rddm),
            other => Err(Error::InvalidArgument(format!("unknown variance mode `{other}`"))),
        }
    }
}

impl fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ddim => "ddim",
            Self::Rddm => "rddm",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSchedule {
    alpha: Vec<f64>,
    beta_sq: Vec<f64>,
    alpha_bar: Vec<f64>,
    beta_bar_sq: Vec<f64>,
    eta: f64,
    variance_mode: VarianceMode,
}

fn validate_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::Schedule(format!("eta must lie in [0, 1], got {eta}")))
    }
}

fn cumsum_from_zero(rates: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rates.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for r in rates {
        acc += r;
        out.push(acc);
    }
    out
}

fn differences(cum: &[f64]) -> Vec<f64> {
    cum.windows(2).map(|w| w[1] - w[0]).collect()
}

impl CoefficientSchedule {
    fn assemble(
        alpha: Vec<f64>,
        alpha_bar: Vec<f64>,
        beta_sq: Vec<f64>,
        beta_bar_sq: Vec<f64>,
        eta: f64,
        variance_mode: VarianceMode,
    ) -> Result<Self> {
        let t_max = alpha.len();
        if t_max == 0 {
            return Err(Error::Schedule("step count must be at least 1".into()));
        }
        if beta_sq.len() != t_max || alpha_bar.len() != t_max + 1 || beta_bar_sq.len() != t_max + 1 {
            return Err(Error::Schedule("inconsistent schedule lengths".into()));
        }
        validate_eta(eta)?;
        for (name, v) in [("alpha", &alpha), ("beta_sq", &beta_sq)] {
            if let Some(t) = v.iter().position(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Schedule(format!("{name} at t={} is {}", t + 1, v[t])));
            }
        }
        for (name, v) in [("alpha_bar", &alpha_bar), ("beta_bar_sq", &beta_bar_sq)] {
            if v[0] != 0.0 {
                return Err(Error::Schedule(format!("{name} must start at 0")));
            }
            if let Some(t) = v.windows(2).position(|w| w[1] < w[0] || !w[1].is_finite()) {
                return Err(Error::Schedule(format!("{name} decreases at t={}", t + 1)));
            }
        }
        Ok(Self { alpha, beta_sq, alpha_bar, beta_bar_sq, eta, variance_mode })
    }

    /// Builds a schedule from per-step rates; cumulatives are running sums.
    pub fn from_rates(alpha: Vec<f64>, beta_sq: Vec<f64>, eta: f64, mode: VarianceMode) -> Result<Self> {
        let alpha_bar = cumsum_from_zero(&alpha);
        let beta_bar_sq = cumsum_from_zero(&beta_sq);
        Self::assemble(alpha, alpha_bar, beta_sq, beta_bar_sq, eta, mode)
    }

    /// Builds a schedule from stored rates and cumulatives (both with `t = 0`
    /// omitted for rates and included for cumulatives), as read back from a
    /// file. The cumulatives must agree with the running sums of the rates.
    pub fn from_parts(
        alpha: Vec<f64>,
        beta_sq: Vec<f64>,
        alpha_bar: Vec<f64>,
        beta_bar_sq: Vec<f64>,
        eta: f64,
        mode: VarianceMode,
    ) -> Result<Self> {
        let s = Self::assemble(alpha, alpha_bar, beta_sq, beta_bar_sq, eta, mode)?;
        for (name, rates, cum) in [("alpha", &s.alpha, &s.alpha_bar), ("beta_sq", &s.beta_sq, &s.beta_bar_sq)] {
            let sums = cumsum_from_zero(rates);
            if let Some(t) = (1..sums.len()).find(|&t| (sums[t] - cum[t]).abs() > 1e-9 * cum[t].abs().max(1.0)) {
                return Err(Error::Schedule(format!("{name} rates do not sum to the stored cumulative at t={t}")));
            }
        }
        Ok(s)
    }

    /// Builds a schedule from cumulatives at `t = 1..=T`; rates by differencing.
    pub fn from_cumulatives(
        alpha_bar: &[f64],
        beta_bar_sq: &[f64],
        eta: f64,
        mode: VarianceMode,
    ) -> Result<Self> {
        let alpha_bar: Vec<f64> = std::iter::once(0.0).chain(alpha_bar.iter().copied()).collect();
        let beta_bar_sq: Vec<f64> = std::iter::once(0.0).chain(beta_bar_sq.iter().copied()).collect();
        let alpha = differences(&alpha_bar);
        let beta_sq = differences(&beta_bar_sq);
        Self::assemble(alpha, alpha_bar, beta_sq, beta_bar_sq, eta, mode)
    }

    /// The default training schedule: `alpha_t` from `P(1 - x, alpha_exp)` summing
    /// to 1 and `beta_t^2` from `P(x, beta_exp)` summing to `beta_bar_t_sq`.
    pub fn power(
        steps: usize,
        alpha_exp: f64,
        beta_exp: f64,
        beta_bar_t_sq: f64,
        eta: f64,
        mode: VarianceMode,
    ) -> Result<Self> {
        let alpha = power_schedule(steps, alpha_exp, true, 1.0)?;
        let beta_sq = power_schedule(steps, beta_exp, false, beta_bar_t_sq)?;
        Self::from_rates(alpha, beta_sq, eta, mode)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        validate_eta(eta)?;
        self.eta = eta;
        Ok(self)
    }

    pub fn with_variance_mode(mut self, mode: VarianceMode) -> Self {
        self.variance_mode = mode;
        self
    }

    pub fn total_steps(&self) -> usize {
        self.alpha.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn variance_mode(&self) -> VarianceMode {
        self.variance_mode
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.total_steps() {
            return Err(Error::TimeOutOfRange { t, lo: 1, hi: self.total_steps() });
        }
        Ok(())
    }

    fn check_index(&self, t: usize) -> Result<()> {
        if t > self.total_steps() {
            return Err(Error::TimeOutOfRange { t, lo: 0, hi: self.total_steps() });
        }
        Ok(())
    }

    /// Per-step residual rate, `t` in `1..=T`.
    pub fn alpha(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        Ok(self.alpha[t - 1])
    }

    /// Per-step noise variance rate, `t` in `1..=T`.
    pub fn beta_sq(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        Ok(self.beta_sq[t - 1])
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.check_index(t)?;
        Ok(self.alpha_bar[t])
    }

    pub fn beta_bar_sq(&self, t: usize) -> Result<f64> {
        self.check_index(t)?;
        Ok(self.beta_bar_sq[t])
    }

    pub fn beta_bar(&self, t: usize) -> Result<f64> {
        Ok(self.beta_bar_sq(t)?.sqrt())
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn betas_sq(&self) -> &[f64] {
        &self.beta_sq
    }

    /// Cumulative residual coefficients for `t = 0..=T`.
    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// Cumulative noise variances for `t = 0..=T`.
    pub fn beta_bars_sq(&self) -> &[f64] {
        &self.beta_bar_sq
    }

    /// Terminal noise variance `bbar_T^2`.
    pub fn beta_bar_t_sq(&self) -> f64 {
        self.beta_bar_sq[self.total_steps()]
    }

    /// Posterior variance for a jump `t -> t_prev` under this schedule's
    /// variance mode. Gaps aggregate `beta_t^2` into `bbar_t^2 - bbar_p^2`.
    pub fn sigma_sq_between(&self, t: usize, t_prev: usize, eta: f64) -> Result<f64> {
        self.check_step(t)?;
        if t_prev >= t {
            return Err(Error::InvalidArgument(format!("t_prev={t_prev} must be below t={t}")));
        }
        if eta == 0.0 {
            return Ok(0.0);
        }
        sigma_sq_at(
            self.variance_mode,
            eta,
            (self.alpha_bar[t], self.beta_bar_sq[t]),
            (self.alpha_bar[t_prev], self.beta_bar_sq[t_prev]),
        )
        .map_err(|e| match e {
            Error::Schedule(m) => Error::Schedule(format!("{m} (t={t}, t_prev={t_prev})")),
            other => other,
        })
    }

    /// Per-step `sigma_t` at the schedule's own `eta`.
    pub fn sigma(&self, t: usize) -> Result<f64> {
        Ok(self.sigma_sq_between(t, t - 1, self.eta)?.sqrt())
    }

    /// Sum of per-step `sigma_t^2` at the schedule's `eta`.
    pub fn total_variance(&self) -> Result<f64> {
        (1..=self.total_steps()).map(|t| self.sigma_sq_between(t, t - 1, self.eta)).sum()
    }
}

/// Posterior variance between two arbitrary `(abar, bbar^2)` coordinates.
/// Used directly by decomposed sampling paths, where the state leaves the
/// schedule's own curve.
pub fn sigma_sq_at(mode: VarianceMode, eta: f64, from: (f64, f64), to: (f64, f64)) -> Result<f64> {
    let (ab_t, bt) = from;
    let (ab_p, bp) = to;
    if eta == 0.0 || bt == 0.0 {
        return Ok(0.0);
    }
    match mode {
        VarianceMode::Rddm => Ok(eta * (bt - bp) * bp / bt),
        VarianceMode::Ddim => {
            let ct = 1.0 - ab_t;
            let cp = 1.0 - ab_p;
            if cp <= 0.0 {
                return Err(Error::Schedule("DDIM variance undefined where abar reaches 1".into()));
            }
            let ratio = ct / cp;
            Ok(eta * (bp / bt) * (1.0 - ratio * ratio))
        }
    }
}

/// Continuous normalized power density `P(x, a) = (a + 1) x^a`.
pub fn power_density(x: f64, a: f64) -> f64 {
    (a + 1.0) * x.powf(a)
}

/// Discretized power schedule over `t = 1..=steps`, renormalized so the
/// entries sum to `total`.
pub fn power_schedule(steps: usize, a: f64, decreasing: bool, total: f64) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Schedule("power schedule needs at least one step".into()));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Schedule(format!("power exponent must be >= 0, got {a}")));
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Schedule(format!("power schedule total must be > 0, got {total}")));
    }
    let n = steps as f64;
    let raw: Vec<f64> = (1..=steps)
        .map(|t| {
            let x = t as f64 / n;
            let x = if decreasing { 1.0 - x } else { x };
            power_density(x, a) * total / n
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Schedule("power schedule is identically zero".into()));
    }
    Ok(raw.into_iter().map(|v| v * (total / sum)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DdimFamily {
    Linear,
    ScaledLinear,
    SquaredCosine,
}

impl DdimFamily {
    pub const ALL: [DdimFamily; 3] = [Self::Linear, Self::ScaledLinear, Self::SquaredCosine];
}

impl FromStr for DdimFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "scaled-linear" => Ok(Self::ScaledLinear),
            "squared-cosine" => Ok(Self::SquaredCosine),
            other => Err(Error::InvalidArgument(format!("unknown DDIM family `{other}`"))),
        }
    }
}

impl fmt::Display for DdimFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::ScaledLinear => "scaled-linear",
            Self::SquaredCosine => "squared-cosine",
        })
    }
}

/// A DDIM `alphas_cumprod` schedule, indexed `t = 1..=T` (`abar_0 = 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct DdimSchedule {
    pub family: Option<DdimFamily>,
    pub betas: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let step = (end - start) / (n - 1) as f64;
    (0..n).map(|i| start + step * i as f64).collect()
}

const COSINE_OFFSET: f64 = 0.008;
const COSINE_MAX_BETA: f64 = 0.999;

impl DdimSchedule {
    pub fn from_betas(family: Option<DdimFamily>, betas: Vec<f64>) -> Result<Self> {
        let mut acc = 1.0;
        let alpha_bar = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        let s = Self { family, betas, alpha_bar };
        s.validate()?;
        Ok(s)
    }

    pub fn total_steps(&self) -> usize {
        self.alpha_bar.len()
    }

    /// `abar_ddim_t` with the convention `abar_ddim_0 = 1`.
    pub fn alpha_bar_at(&self, t: usize) -> Result<f64> {
        match t {
            0 => Ok(1.0),
            t if t <= self.total_steps() => Ok(self.alpha_bar[t - 1]),
            t => Err(Error::TimeOutOfRange { t, lo: 0, hi: self.total_steps() }),
        }
    }

    /// Checks `0 < abar_t <= 1` and strict decrease.
    pub fn validate(&self) -> Result<()> {
        if self.alpha_bar.is_empty() {
            return Err(Error::Schedule("DDIM schedule is empty".into()));
        }
        let mut prev = 1.0;
        for (i, &a) in self.alpha_bar.iter().enumerate() {
            let t = i + 1;
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Schedule(format!("abar_ddim at t={t} is {a}, outside (0, 1]")));
            }
            if i > 0 && a >= prev {
                return Err(Error::Schedule(format!("abar_ddim is not strictly decreasing at t={t}")));
            }
            prev = a;
        }
        Ok(())
    }

    /// DDPM/DDIM per-step variance `sigma_t^2(DDIM)` at `eta`.
    pub fn sigma_sq(&self, t: usize, t_prev: usize, eta: f64) -> Result<f64> {
        let at = self.alpha_bar_at(t)?;
        let ap = self.alpha_bar_at(t_prev)?;
        Ok(eta * (1.0 - ap) / (1.0 - at) * (1.0 - at / ap))
    }
}

pub fn make_ddim_schedule(steps: usize, family: DdimFamily) -> Result<DdimSchedule> {
    if steps == 0 {
        return Err(Error::Schedule("DDIM schedule needs at least one step".into()));
    }
    let betas = match family {
        DdimFamily::Linear => linspace(1e-4, 0.02, steps),
        DdimFamily::ScaledLinear => linspace(0.00085f64.sqrt(), 0.012f64.sqrt(), steps)
            .into_iter()
            .map(|b| b * b)
            .collect(),
        DdimFamily::SquaredCosine => {
            let f = |t: f64| {
                let x = (t / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET);
                (x * std::f64::consts::FRAC_PI_2).cos().powi(2)
            };
            (1..=steps)
                .map(|t| (1.0 - f(t as f64) / f((t - 1) as f64)).min(COSINE_MAX_BETA))
                .collect()
        }
    };
    DdimSchedule::from_betas(Some(family), betas)
}

/// Maps a DDIM schedule onto residual/noise coefficients:
/// `abar_t = 1 - sqrt(abar_ddim_t)`, `bbar_t = sqrt(1 - abar_ddim_t)`.
pub fn ddim_to_rddm(d: &DdimSchedule, eta: f64, mode: VarianceMode) -> Result<CoefficientSchedule> {
    d.validate()?;
    let alpha_bar: Vec<f64> = d.alpha_bar.iter().map(|a| 1.0 - a.sqrt()).collect();
    let beta_bar_sq: Vec<f64> = d.alpha_bar.iter().map(|a| 1.0 - a).collect();
    CoefficientSchedule::from_cumulatives(&alpha_bar, &beta_bar_sq, eta, mode)
}

/// Tolerance on `(1 - abar)^2 + bbar^2 = 1` for [`rddm_to_ddim`].
pub const MANIFOLD_TOLERANCE: f64 = 1e-9;

/// Inverse of [`ddim_to_rddm`]; only schedules on the DDIM manifold qualify.
pub fn rddm_to_ddim(s: &CoefficientSchedule) -> Result<DdimSchedule> {
    let mut alpha_bar = Vec::with_capacity(s.total_steps());
    for t in 1..=s.total_steps() {
        let c = 1.0 - s.alpha_bar[t];
        let deviation = c * c + s.beta_bar_sq[t] - 1.0;
        if deviation.abs() > MANIFOLD_TOLERANCE {
            return Err(Error::OffManifold { t, deviation });
        }
        alpha_bar.push(c * c);
    }
    let mut prev = 1.0;
    let betas = alpha_bar
        .iter()
        .map(|a| {
            let b = 1.0 - a / prev;
            prev = *a;
            b
        })
        .collect();
    let d = DdimSchedule { family: None, betas, alpha_bar };
    d.validate()?;
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjustMode {
    None,
    Alpha,
    Beta,
    AlphaBeta,
}

impl FromStr for AdjustMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "alpha" => Ok(Self::Alpha),
            "beta" => Ok(Self::Beta),
            "alpha+beta" => Ok(Self::AlphaBeta),
            other => Err(Error::InvalidArgument(format!("unknown adjust mode `{other}`"))),
        }
    }
}

impl fmt::Display for AdjustMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Alpha => "alpha",
            Self::Beta => "beta",
            Self::AlphaBeta => "alpha+beta",
        })
    }
}

/// Replaces the residual and/or noise schedule with a power-family one,
/// keeping the other family's cumulatives bit-for-bit.
pub fn adjust_schedule(s: &CoefficientSchedule, mode: AdjustMode, a: f64) -> Result<CoefficientSchedule> {
    let steps = s.total_steps();
    let (alpha, alpha_bar) = match mode {
        AdjustMode::Alpha | AdjustMode::AlphaBeta => {
            let alpha = power_schedule(steps, a, true, 1.0)?;
            let cum = cumsum_from_zero(&alpha);
            (alpha, cum)
        }
        _ => (s.alpha.clone(), s.alpha_bar.clone()),
    };
    let (beta_sq, beta_bar_sq) = match mode {
        AdjustMode::Beta | AdjustMode::AlphaBeta => {
            let beta_sq = power_schedule(steps, a, false, s.beta_bar_t_sq())?;
            let cum = cumsum_from_zero(&beta_sq);
            (beta_sq, cum)
        }
        _ => (s.beta_sq.clone(), s.beta_bar_sq.clone()),
    };
    CoefficientSchedule::assemble(alpha, alpha_bar, beta_sq, beta_bar_sq, s.eta, s.variance_mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_rddm(eta: f64, mode: VarianceMode) -> CoefficientSchedule {
        ddim_to_rddm(&make_ddim_schedule(1000, DdimFamily::Linear).unwrap(), eta, mode).unwrap()
    }

    #[test]
    fn flat_power_schedule() {
        assert_eq!(power_schedule(4, 0.0, false, 1.0).unwrap(), vec![0.25; 4]);
        assert_eq!(power_density(0.5, 1.0), 1.0);
    }

    #[test]
    fn linear_power_cumulative_at_half() {
        let v = power_schedule(1000, 1.0, false, 1.0).unwrap();
        let cum: f64 = v[..500].iter().sum();
        // closed form 500*501 / (1000*1001)
        assert!((cum - 0.250_249_750_249_750_25).abs() < 1e-12, "{cum}");
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_schedule_errors() {
        assert!(power_schedule(10, -0.5, false, 1.0).is_err());
        assert!(power_schedule(0, 1.0, false, 1.0).is_err());
        assert!(power_schedule(10, 1.0, false, 0.0).is_err());
    }

    #[test]
    fn power_schedule_normalization() {
        let s = CoefficientSchedule::power(1000, 1.0, 1.0, 0.01, 1.0, VarianceMode::Rddm).unwrap();
        assert!((s.alpha_bar(1000).unwrap() - 1.0).abs() < 1e-12);
        assert!((s.beta_bar_t_sq() - 0.01).abs() < 1e-12);
        assert_eq!(s.sigma(1).unwrap(), 0.0);
    }

    #[test]
    fn ddim_linear_endpoints() {
        let d = make_ddim_schedule(1000, DdimFamily::Linear).unwrap();
        assert_eq!(d.betas[0], 1e-4);
        assert!((d.betas[999] - 0.02).abs() < 1e-17);
        assert!((d.alpha_bar[0] - 0.9999).abs() < 1e-16);
        // independent cumulative product: 4.0358297653756833e-5
        assert!((d.alpha_bar[999] - 4.035_829_765_375_683e-5).abs() < 1e-17);
    }

    #[test]
    fn every_family_is_strictly_decreasing() {
        for fam in DdimFamily::ALL {
            let d = make_ddim_schedule(1000, fam).unwrap();
            d.validate().unwrap();
        }
        assert!("cosine".parse::<DdimFamily>().is_err());
    }

    #[test]
    fn eq19_exact_values() {
        let d = DdimSchedule { family: None, betas: vec![0.75], alpha_bar: vec![0.25] };
        let s = ddim_to_rddm(&d, 0.0, VarianceMode::Rddm).unwrap();
        assert_eq!(s.alpha_bar(1).unwrap(), 0.5);
        assert_eq!(s.beta_bar(1).unwrap(), 0.75f64.sqrt());
        assert_eq!(rddm_to_ddim(&s).unwrap().alpha_bar, vec![0.25]);
    }

    #[test]
    fn non_monotone_ddim_rejected() {
        let d = DdimSchedule { family: None, betas: vec![0.1, 0.1], alpha_bar: vec![0.5, 0.6] };
        assert!(ddim_to_rddm(&d, 0.0, VarianceMode::Rddm).is_err());
    }

    #[test]
    fn off_manifold_names_first_t() {
        let s = CoefficientSchedule::from_cumulatives(&[0.5], &[0.25], 0.0, VarianceMode::Rddm).unwrap();
        match rddm_to_ddim(&s) {
            Err(Error::OffManifold { t, .. }) => assert_eq!(t, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn eta_zero_means_no_variance() {
        for mode in [VarianceMode::Ddim, VarianceMode::Rddm] {
            let s = linear_rddm(0.0, mode);
            assert!((1..=1000).all(|t| s.sigma(t).unwrap() == 0.0));
        }
    }

    #[test]
    fn ddim_mode_matches_native_ddim_variance() {
        let d = make_ddim_schedule(1000, DdimFamily::Linear).unwrap();
        let s = ddim_to_rddm(&d, 1.0, VarianceMode::Ddim).unwrap();
        for (t, p) in [(1000, 900), (500, 499), (2, 1), (10, 0)] {
            let a = s.sigma_sq_between(t, p, 1.0).unwrap();
            let b = d.sigma_sq(t, p, 1.0).unwrap();
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn adjust_none_is_identity() {
        let s = linear_rddm(1.0, VarianceMode::Rddm);
        assert_eq!(adjust_schedule(&s, AdjustMode::None, 3.0).unwrap(), s);
    }

    #[test]
    fn adjust_alpha_keeps_beta() {
        let s = linear_rddm(1.0, VarianceMode::Rddm);
        let adj = adjust_schedule(&s, AdjustMode::Alpha, 1.0).unwrap();
        assert!((adj.alpha_bar(1000).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(adj.beta_bars_sq(), s.beta_bars_sq());
    }

    #[test]
    fn adjust_both_reinitializes() {
        let s = CoefficientSchedule::power(1000, 0.0, 0.0, 1.0, 1.0, VarianceMode::Rddm).unwrap();
        let adj = adjust_schedule(&s, AdjustMode::AlphaBeta, 1.0).unwrap();
        let fresh = CoefficientSchedule::power(1000, 1.0, 1.0, 1.0, 1.0, VarianceMode::Rddm).unwrap();
        for t in 0..=1000 {
            assert!((adj.alpha_bar(t).unwrap() - fresh.alpha_bar(t).unwrap()).abs() < 1e-12);
            assert!((adj.beta_bar_sq(t).unwrap() - fresh.beta_bar_sq(t).unwrap()).abs() < 1e-12);
        }
        assert!((adj.betas_sq().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_indices() {
        let s = linear_rddm(0.0, VarianceMode::Rddm);
        assert!(s.alpha(0).is_err());
        assert!(s.alpha_bar(1001).is_err());
        assert!(s.sigma_sq_between(5, 5, 1.0).is_err());
    }
}
