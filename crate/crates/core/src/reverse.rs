//! Reverse generation.
//!
//! A single transfer moves a state from `(abar_t, bbar_t)` to
//! `(abar_p, bbar_p)`:
//!
//! `I_p = I_t - (abar_t - abar_p) * res - (bbar_t - sqrt(bbar_p^2 - sigma^2)) * eps + sigma * z`
//!
//! With `sigma = 0` the step is deterministic. Plans visit a decreasing
//! subsequence of `1..=T` and finish at `t = 0`. Decomposed paths first move
//! along one coordinate and then the other, re-querying the predictors at
//! every step.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{RandomStream, Tensor};
use crate::predictors::{noise_to_residual, residual_to_noise, PredictorSet, Query};
use crate::schedules::{sigma_sq_at, CoefficientSchedule, DdimSchedule, VarianceMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMethod {
    SmRes,
    SmN,
    SmResN,
}

impl SamplingMethod {
    pub const ALL: [SamplingMethod; 3] = [Self::SmRes, Self::SmN, Self::SmResN];
}

impl FromStr for SamplingMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sm-res" => Ok(Self::SmRes),
            "sm-n" => Ok(Self::SmN),
            "sm-res-n" => Ok(Self::SmResN),
            other => Err(Error::InvalidArgument(format!("unknown sampling method `{other}`"))),
        }
    }
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SmRes => "sm-res",
            Self::SmN => "sm-n",
            Self::SmResN => "sm-res-n",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathMode {
    Simultaneous,
    ResidualFirst,
    NoiseFirst,
}

impl PathMode {
    pub const ALL: [PathMode; 3] = [Self::Simultaneous, Self::ResidualFirst, Self::NoiseFirst];
}

impl FromStr for PathMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simultaneous" => Ok(Self::Simultaneous),
            "residual-first" => Ok(Self::ResidualFirst),
            "noise-first" => Ok(Self::NoiseFirst),
            other => Err(Error::InvalidArgument(format!("unknown path mode `{other}`"))),
        }
    }
}

impl fmt::Display for PathMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Simultaneous => "simultaneous",
            Self::ResidualFirst => "residual-first",
            Self::NoiseFirst => "noise-first",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    pub timesteps: Vec<usize>,
    pub eta: f64,
    pub method: SamplingMethod,
    pub path_mode: PathMode,
    #[doc(hidden)]
    pub flip_noise_sign: bool,
}

impl SamplingPlan {
    pub fn new(timesteps: Vec<usize>, eta: f64, method: SamplingMethod, path_mode: PathMode) -> Result<Self> {
        if timesteps.is_empty() {
            return Err(Error::Plan("no timesteps".into()));
        }
        if timesteps.contains(&0) {
            return Err(Error::Plan("timesteps must be >= 1; t = 0 is implicit".into()));
        }
        if timesteps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Plan(format!("timesteps {timesteps:?} are not strictly decreasing")));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Plan(format!("eta must lie in [0, 1], got {eta}")));
        }
        Ok(Self { timesteps, eta, method, path_mode, flip_noise_sign: false })
    }

    /// `steps` evenly spaced timesteps `T - floor(i * T / steps)`.
    pub fn uniform(total: usize, steps: usize, eta: f64, method: SamplingMethod, path_mode: PathMode) -> Result<Self> {
        Self::uniform_from(total, total, steps, eta, method, path_mode)
    }

    /// Like [`SamplingPlan::uniform`] but spanning `1..=start`.
    pub fn uniform_from(
        total: usize,
        start: usize,
        steps: usize,
        eta: f64,
        method: SamplingMethod,
        path_mode: PathMode,
    ) -> Result<Self> {
        if start == 0 || start > total {
            return Err(Error::Plan(format!("start {start} outside 1..={total}")));
        }
        if steps == 0 || steps > start {
            return Err(Error::Plan(format!("step count {steps} outside 1..={start}")));
        }
        let ts = (0..steps).map(|i| start - (i * start) / steps).collect();
        Self::new(ts, eta, method, path_mode)
    }

    pub fn start(&self) -> usize {
        self.timesteps[0]
    }

    /// Transitions `(t, t_prev)` including the final jump to 0.
    pub fn transitions(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.timesteps.windows(2).map(|w| (w[0], w[1])).collect();
        out.push((*self.timesteps.last().unwrap(), 0));
        out
    }

    pub fn check_against(&self, schedule: &CoefficientSchedule) -> Result<()> {
        if self.start() > schedule.total_steps() {
            return Err(Error::Plan(format!(
                "plan starts at {} but the schedule has T = {}",
                self.start(),
                schedule.total_steps()
            )));
        }
        Ok(())
    }
}

/// A point `(abar, bbar^2)` on or off the schedule curve, tagged with the
/// step index reported to predictors.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Coord {
    t: usize,
    alpha_bar: f64,
    beta_bar_sq: f64,
}

impl Coord {
    fn on_curve(s: &CoefficientSchedule, t: usize) -> Result<Self> {
        Ok(Self { t, alpha_bar: s.alpha_bar(t)?, beta_bar_sq: s.beta_bar_sq(t)? })
    }

    fn beta_bar(&self) -> f64 {
        self.beta_bar_sq.sqrt()
    }
}

#[allow(clippy::too_many_arguments)]
fn transfer(
    i_t: &Tensor,
    res: Option<&Tensor>,
    eps: Option<&Tensor>,
    from: Coord,
    to: Coord,
    sigma_sq: f64,
    stream: &mut RandomStream,
    flip: bool,
) -> Result<Tensor> {
    if sigma_sq > to.beta_bar_sq * (1.0 + 1e-12) {
        return Err(Error::VarianceBudget { t: from.t, sigma_sq, beta_bar_prev_sq: to.beta_bar_sq });
    }
    let mut x = i_t.clone();
    if let Some(r) = res {
        x = x.lincomb(1.0, r, -(from.alpha_bar - to.alpha_bar))?;
    }
    if let Some(e) = eps {
        let k = from.beta_bar() - (to.beta_bar_sq - sigma_sq).max(0.0).sqrt();
        x = x.lincomb(1.0, e, if flip { k } else { -k })?;
    }
    if sigma_sq > 0.0 {
        let z = stream.gaussian(i_t.shape())?;
        x = x.lincomb(1.0, &z, sigma_sq.sqrt())?;
    }
    Ok(x)
}

/// Mean and standard deviation of `q(I_{t_prev} | I_t, I_0, I_res)` at the
/// schedule's own `eta`.
pub fn posterior_params(
    i_t: &Tensor,
    i0: &Tensor,
    i_res: &Tensor,
    t: usize,
    t_prev: usize,
    schedule: &CoefficientSchedule,
) -> Result<(Tensor, f64)> {
    let bt = schedule.beta_bar(t)?;
    if bt == 0.0 {
        return Err(Error::Schedule(format!("posterior undefined where bbar_t = 0 (t={t})")));
    }
    let sigma_sq = schedule.sigma_sq_between(t, t_prev, schedule.eta())?;
    let bp_sq = schedule.beta_bar_sq(t_prev)?;
    if bp_sq < sigma_sq {
        return Err(Error::VarianceBudget { t, sigma_sq, beta_bar_prev_sq: bp_sq });
    }
    let k = (bp_sq - sigma_sq).sqrt() / bt;
    let fwd_mean = i0.lincomb(1.0, i_res, schedule.alpha_bar(t)?)?;
    let mean = i0
        .lincomb(1.0, i_res, schedule.alpha_bar(t_prev)?)?
        .lincomb(1.0, &i_t.sub(&fwd_mean)?, k)?;
    Ok((mean, sigma_sq.sqrt()))
}

/// One reverse step from `t` to `t_prev` given both estimates.
#[allow(clippy::too_many_arguments)]
pub fn reverse_step(
    i_t: &Tensor,
    res_hat: &Tensor,
    eps_hat: &Tensor,
    t: usize,
    t_prev: usize,
    schedule: &CoefficientSchedule,
    eta: f64,
    stream: &mut RandomStream,
) -> Result<Tensor> {
    if res_hat.shape() != i_t.shape() || eps_hat.shape() != i_t.shape() {
        return Err(Error::ShapeMismatch { left: i_t.shape().to_vec(), right: res_hat.shape().to_vec() });
    }
    let sigma_sq = schedule.sigma_sq_between(t, t_prev, eta)?;
    let from = Coord::on_curve(schedule, t)?;
    let to = Coord::on_curve(schedule, t_prev)?;
    transfer(i_t, Some(res_hat), Some(eps_hat), from, to, sigma_sq, stream, false)
}

/// The classic DDIM update in `alphas_cumprod` form.
pub fn ddim_equivalent_step(
    i_t: &Tensor,
    eps_hat: &Tensor,
    t: usize,
    t_prev: usize,
    ddim: &DdimSchedule,
    sigma: f64,
    stream: &mut RandomStream,
) -> Result<Tensor> {
    let at = ddim.alpha_bar_at(t)?;
    let ap = ddim.alpha_bar_at(t_prev)?;
    if at == 0.0 {
        return Err(Error::Schedule(format!("abar_ddim is 0 at t={t}")));
    }
    let x0 = i_t.lincomb(1.0 / at.sqrt(), eps_hat, -(1.0 - at).sqrt() / at.sqrt())?;
    let dir = (1.0 - ap - sigma * sigma).max(0.0).sqrt();
    let mut x = x0.lincomb(ap.sqrt(), eps_hat, dir)?;
    if sigma > 0.0 {
        let z = stream.gaussian(i_t.shape())?;
        x = x.lincomb(1.0, &z, sigma)?;
    }
    Ok(x)
}

/// Residual and/or noise estimates for the requested method; the missing
/// quantity is recovered by conversion at the query's coordinates.
fn estimates(
    method: SamplingMethod,
    preds: &PredictorSet<'_>,
    q: &Query<'_>,
    need_res: bool,
    need_eps: bool,
) -> Result<(Option<Tensor>, Option<Tensor>)> {
    let conv_res = |eps: &Tensor| noise_to_residual(eps, q.i_t, q.i_in, q.alpha_bar, q.beta_bar, q.t);
    let conv_eps = |res: &Tensor| residual_to_noise(res, q.i_t, q.i_in, q.alpha_bar, q.beta_bar, q.t);
    match method {
        SamplingMethod::SmRes => {
            let r = preds.residual(q)?;
            let e = if need_eps { Some(conv_eps(&r)?) } else { None };
            Ok((need_res.then_some(r), e))
        }
        SamplingMethod::SmN => {
            let e = preds.noise(q)?;
            let r = if need_res { Some(conv_res(&e)?) } else { None };
            Ok((r, need_eps.then_some(e)))
        }
        SamplingMethod::SmResN => match (need_res, need_eps) {
            (true, true) => {
                let (r, e) = preds.both(q)?;
                Ok((Some(r), Some(e)))
            }
            (true, false) => Ok((Some(preds.residual(q)?), None)),
            (false, true) => Ok((None, Some(preds.noise(q)?))),
            (false, false) => Ok((None, None)),
        },
    }
}

/// Cumulative injected variance `sum sigma^2` over a plan.
pub fn plan_noise_budget(plan: &SamplingPlan, schedule: &CoefficientSchedule) -> Result<f64> {
    plan.check_against(schedule)?;
    match plan.path_mode {
        PathMode::Simultaneous => plan
            .transitions()
            .iter()
            .map(|&(t, p)| schedule.sigma_sq_between(t, p, plan.eta))
            .sum(),
        _ => plan
            .transitions()
            .iter()
            .map(|&(t, p)| {
                let (bt, bp) = (schedule.beta_bar_sq(t)?, schedule.beta_bar_sq(p)?);
                sigma_sq_at(VarianceMode::Rddm, plan.eta, (0.0, bt), (0.0, bp))
            })
            .sum(),
    }
}

/// Samples starting from `I_{t0} = I_in + bbar_{t0} * eps`, `t0 = plan.start()`.
pub fn sample(
    plan: &SamplingPlan,
    preds: PredictorSet<'_>,
    i_in: &Tensor,
    schedule: &CoefficientSchedule,
    stream: &mut RandomStream,
) -> Result<Tensor> {
    plan.check_against(schedule)?;
    let eps = stream.gaussian(i_in.shape())?;
    let init = i_in.lincomb(1.0, &eps, schedule.beta_bar(plan.start())?)?;
    sample_from(plan, preds, i_in, init, schedule, stream)
}

pub fn sample_from(
    plan: &SamplingPlan,
    preds: PredictorSet<'_>,
    i_in: &Tensor,
    init: Tensor,
    schedule: &CoefficientSchedule,
    stream: &mut RandomStream,
) -> Result<Tensor> {
    sample_observed(plan, preds, i_in, init, schedule, stream, &mut |_, _, _| {})
}

/// [`sample_from`] reporting `(step index, t, state)` after every transfer;
/// step 0 is the initial state.
#[allow(clippy::too_many_arguments)]
pub fn sample_observed(
    plan: &SamplingPlan,
    preds: PredictorSet<'_>,
    i_in: &Tensor,
    init: Tensor,
    schedule: &CoefficientSchedule,
    stream: &mut RandomStream,
    observe: &mut dyn FnMut(usize, usize, &Tensor),
) -> Result<Tensor> {
    plan.check_against(schedule)?;
    if init.shape() != i_in.shape() {
        return Err(Error::ShapeMismatch { left: init.shape().to_vec(), right: i_in.shape().to_vec() });
    }
    if plan.path_mode != PathMode::Simultaneous && !preds.is_pair() {
        return Err(Error::Predictor(format!(
            "path mode {} needs separate residual and noise predictors",
            plan.path_mode
        )));
    }
    let total = schedule.total_steps();
    let t0 = plan.start();
    let mut x = init;
    let mut step = 0;
    observe(step, t0, &x);
    let run = |x: &mut Tensor,
                   from: Coord,
                   to: Coord,
                   need_res: bool,
                   need_eps: bool,
                   sigma_sq: f64,
                   stream: &mut RandomStream|
     -> Result<()> {
        let q = Query {
            i_t: x,
            i_in,
            t: from.t,
            alpha_bar: from.alpha_bar,
            beta_bar: from.beta_bar(),
            total_steps: total,
        };
        let (r, e) = estimates(plan.method, &preds, &q, need_res, need_eps)?;
        *x = transfer(x, r.as_ref(), e.as_ref(), from, to, sigma_sq, stream, plan.flip_noise_sign)?;
        Ok(())
    };
    let transitions = plan.transitions();
    match plan.path_mode {
        PathMode::Simultaneous => {
            for &(t, p) in &transitions {
                let sigma_sq = schedule.sigma_sq_between(t, p, plan.eta)?;
                run(&mut x, Coord::on_curve(schedule, t)?, Coord::on_curve(schedule, p)?, true, true, sigma_sq, stream)?;
                step += 1;
                observe(step, p, &x);
            }
        }
        PathMode::ResidualFirst | PathMode::NoiseFirst => {
            let b_fixed = schedule.beta_bar_sq(t0)?;
            let a_fixed = schedule.alpha_bar(t0)?;
            let residual_first = plan.path_mode == PathMode::ResidualFirst;
            for phase in 0..2 {
                let moving_residual = (phase == 0) == residual_first;
                for &(t, p) in &transitions {
                    let (from, to, sigma_sq) = if moving_residual {
                        let b = if residual_first { b_fixed } else { 0.0 };
                        let from = Coord { t, alpha_bar: schedule.alpha_bar(t)?, beta_bar_sq: b };
                        let to = Coord { t: p, alpha_bar: schedule.alpha_bar(p)?, beta_bar_sq: b };
                        (from, to, 0.0)
                    } else {
                        let a = if residual_first { 0.0 } else { a_fixed };
                        let (bt, bp) = (schedule.beta_bar_sq(t)?, schedule.beta_bar_sq(p)?);
                        let sigma_sq = sigma_sq_at(VarianceMode::Rddm, plan.eta, (a, bt), (a, bp))?;
                        let from = Coord { t, alpha_bar: a, beta_bar_sq: bt };
                        let to = Coord { t: p, alpha_bar: a, beta_bar_sq: bp };
                        (from, to, sigma_sq)
                    };
                    run(&mut x, from, to, moving_residual, !moving_residual, sigma_sq, stream)?;
                    step += 1;
                    observe(step, p, &x);
                }
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{synthesize, TripletBatch};
    use crate::predictors::{GroundTruth, Predictor};
    use crate::schedules::{ddim_to_rddm, make_ddim_schedule, DdimFamily};

    fn s1(v: f64) -> Tensor {
        Tensor::from_vec(vec![v]).unwrap()
    }

    #[test]
    fn worked_step() {
        // abar: 0.5 -> 1, bbar^2: 0.25 -> 1
        let s = CoefficientSchedule::from_cumulatives(&[0.5, 1.0], &[0.25, 1.0], 0.0, VarianceMode::Rddm).unwrap();
        let out = reverse_step(&s1(1.0), &s1(1.0), &s1(0.5), 2, 1, &s, 0.0, &mut RandomStream::new(0)).unwrap();
        assert!((out.data()[0] - 0.25).abs() < 1e-15);
        let same = reverse_step(&s1(1.0), &s1(0.0), &s1(0.0), 2, 1, &s, 0.0, &mut RandomStream::new(0)).unwrap();
        assert_eq!(same.data(), &[1.0]);
    }

    #[test]
    fn posterior_at_forward_mean() {
        let s = CoefficientSchedule::power(20, 1.0, 1.0, 1.0, 1.0, VarianceMode::Rddm).unwrap();
        let (i0, res) = (s1(0.4), s1(-1.2));
        let x = i0.lincomb(1.0, &res, s.alpha_bar(12).unwrap()).unwrap();
        let (mean, sd) = posterior_params(&x, &i0, &res, 12, 7, &s).unwrap();
        let want = 0.4 - 1.2 * s.alpha_bar(7).unwrap();
        assert!((mean.data()[0] - want).abs() < 1e-15);
        assert!(sd > 0.0);
    }

    #[test]
    fn uniform_plans() {
        let p = SamplingPlan::uniform(1000, 5, 0.0, SamplingMethod::SmRes, PathMode::Simultaneous).unwrap();
        assert_eq!(p.timesteps, vec![1000, 800, 600, 400, 200]);
        let p = SamplingPlan::uniform(10, 3, 0.0, SamplingMethod::SmRes, PathMode::Simultaneous).unwrap();
        assert_eq!(p.timesteps, vec![10, 7, 4]);
        assert_eq!(p.transitions(), vec![(10, 7), (7, 4), (4, 0)]);
        assert!(SamplingPlan::new(vec![5, 5], 0.0, SamplingMethod::SmRes, PathMode::Simultaneous).is_err());
        assert!(SamplingPlan::new(vec![], 0.0, SamplingMethod::SmRes, PathMode::Simultaneous).is_err());
        assert!(SamplingPlan::uniform(10, 11, 0.0, SamplingMethod::SmRes, PathMode::Simultaneous).is_err());
    }

    fn recorded(s: &CoefficientSchedule, seed: u64) -> (TripletBatch, Tensor, GroundTruth) {
        let mut rng = RandomStream::new(seed);
        let i0 = rng.gaussian(&[6, 2]).unwrap();
        let i_in = rng.gaussian(&[6, 2]).unwrap().scale(0.5).unwrap();
        let tri = TripletBatch::new(i0, i_in).unwrap();
        let (st, eps) = synthesize(&tri, s.total_steps(), s, &mut rng).unwrap();
        let gt = GroundTruth::new(tri.i_res.clone(), eps).unwrap();
        (tri, st.x, gt)
    }

    #[test]
    fn ground_truth_reversal_every_path() {
        let d = make_ddim_schedule(100, DdimFamily::Linear).unwrap();
        let s = ddim_to_rddm(&d, 0.0, VarianceMode::Rddm).unwrap();
        let (tri, x_t, gt) = recorded(&s, 3);
        let pair = PredictorSet::Pair { residual: &gt, noise: &gt };
        for method in SamplingMethod::ALL {
            for path in PathMode::ALL {
                let plan = SamplingPlan::uniform(100, 10, 0.0, method, path).unwrap();
                let out = sample_from(&plan, pair, &tri.i_in, x_t.clone(), &s, &mut RandomStream::new(0)).unwrap();
                let err = out.max_abs_diff(&tri.i0).unwrap();
                assert!(err < 1e-10, "{method} {path}: {err}");
            }
        }
    }

    #[test]
    fn decomposed_paths_need_a_pair() {
        let s = CoefficientSchedule::power(10, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let (tri, x_t, gt) = recorded(&s, 4);
        let plan = SamplingPlan::uniform(10, 2, 0.0, SamplingMethod::SmRes, PathMode::ResidualFirst).unwrap();
        let single = PredictorSet::Single(&gt);
        assert!(sample_from(&plan, single, &tri.i_in, x_t, &s, &mut RandomStream::new(0)).is_err());
    }

    #[test]
    fn sm_n_at_terminal_power_step_is_singular() {
        let s = CoefficientSchedule::power(10, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let (tri, x_t, gt) = recorded(&s, 5);
        let plan = SamplingPlan::uniform(10, 5, 0.0, SamplingMethod::SmN, PathMode::Simultaneous).unwrap();
        let err = sample_from(&plan, PredictorSet::Single(&gt), &tri.i_in, x_t, &s, &mut RandomStream::new(0));
        assert!(matches!(err, Err(Error::SingularConversion { t: 10, .. })), "{err:?}");
    }

    struct Fixed(Tensor);
    impl Predictor for Fixed {
        fn outputs(&self) -> crate::predictors::Outputs {
            crate::predictors::Outputs::Noise
        }
        fn predict(&self, q: &Query<'_>) -> Result<crate::predictors::Prediction> {
            let e = q.i_t.lincomb(0.3, &self.0, 1.0)?;
            Ok(crate::predictors::Prediction { residual: None, noise: Some(e) })
        }
    }

    #[test]
    fn sm_n_matches_ddim_form() {
        let d = make_ddim_schedule(1000, DdimFamily::Linear).unwrap();
        let s = ddim_to_rddm(&d, 1.0, VarianceMode::Ddim).unwrap();
        let zero = Tensor::zeros(&[4, 2]).unwrap();
        let pred = Fixed(Tensor::full(&[4, 2], 0.1).unwrap());
        let mut x_r = RandomStream::new(1).gaussian(&[4, 2]).unwrap();
        let mut x_d = x_r.clone();
        let plan = SamplingPlan::uniform(1000, 20, 1.0, SamplingMethod::SmN, PathMode::Simultaneous).unwrap();
        let (mut sr, mut sd) = (RandomStream::new(9), RandomStream::new(9));
        for (t, p) in plan.transitions() {
            let q = Query { i_t: &x_r, i_in: &zero, t, alpha_bar: s.alpha_bar(t).unwrap(), beta_bar: s.beta_bar(t).unwrap(), total_steps: 1000 };
            let eps = pred.predict(&q).unwrap().noise.unwrap();
            let res = noise_to_residual(&eps, &x_r, &zero, q.alpha_bar, q.beta_bar, t).unwrap();
            x_r = reverse_step(&x_r, &res, &eps, t, p, &s, 1.0, &mut sr).unwrap();
            let eps_d = x_d.lincomb(0.3, &pred.0, 1.0).unwrap();
            let sigma = d.sigma_sq(t, p, 1.0).unwrap().sqrt();
            x_d = ddim_equivalent_step(&x_d, &eps_d, t, p, &d, sigma, &mut sd).unwrap();
            assert!(x_r.max_abs_diff(&x_d).unwrap() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn budget_never_exceeds_terminal_variance() {
        let s = CoefficientSchedule::power(100, 1.0, 1.0, 1.0, 1.0, VarianceMode::Rddm).unwrap();
        for steps in [1, 2, 7, 100] {
            for path in PathMode::ALL {
                let plan = SamplingPlan::uniform(100, steps, 1.0, SamplingMethod::SmResN, path).unwrap();
                assert!(plan_noise_budget(&plan, &s).unwrap() <= s.beta_bar_t_sq() + 1e-12);
            }
        }
    }
}
