//! The invariant suite behind `rddm verify` and the acceptance tests.
//!
//! Every check produces one [`CheckRow`]; [`run_all`] emits exactly the rows
//! named in [`CHECK_INVENTORY`], in that order.

use crate::error::{Error, Result};
use crate::forward::{forward_step, DiffusionState, TripletBatch};
use crate::metrics::covariance;
use crate::numerics::{RandomStream, Tensor};
use crate::predictors::{
    noise_to_residual, residual_to_noise, GaussianOracle, GroundTruth, Heads, Mlp, MlpConfig, Outputs, Predictor,
    PredictorSet, Query, TimeCondition,
};
use crate::reverse::{ddim_equivalent_step, reverse_step, sample_from, sample_observed, PathMode, SamplingMethod, SamplingPlan};
use crate::schedules::{ddim_to_rddm, make_ddim_schedule, rddm_to_ddim, CoefficientSchedule, DdimFamily, VarianceMode};
use crate::tasks::{Preset, TaskSpec};
use crate::training::{conversion_gain, draw_batch, grad_check, GradCheckOptions, LossConfig, Norm, Objective, Trainer};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Passing means `statistic <= bound` (and both are finite).
    pub fn at_most(name: impl Into<String>, statistic: f64, bound: f64) -> Self {
        let pass = statistic.is_finite() && statistic <= bound;
        Self { name: name.into(), statistic, bound, pass }
    }
}

pub const CHECK_INVENTORY: [&str; 38] = [
    "forward-telescoping-mean",
    "forward-telescoping-var",
    "marginal-mean/power-generation",
    "marginal-var/power-generation",
    "marginal-mean/power-restoration",
    "marginal-var/power-restoration",
    "marginal-mean/ddim-linear",
    "marginal-var/ddim-linear",
    "marginal-mean/ddim-scaled-linear",
    "marginal-var/ddim-scaled-linear",
    "marginal-mean/ddim-squared-cosine",
    "marginal-var/ddim-squared-cosine",
    "ddim-equivalence/steps-10/eta-0",
    "ddim-equivalence/steps-10/eta-1",
    "ddim-equivalence/steps-20/eta-0",
    "ddim-equivalence/steps-20/eta-1",
    "ddim-equivalence/steps-100/eta-0",
    "ddim-equivalence/steps-100/eta-1",
    "variance-sum/power-generation",
    "variance-sum/power-restoration",
    "variance-sum/ddim-linear",
    "variance-sum/ddim-scaled-linear",
    "variance-sum/ddim-squared-cosine",
    "variance-order/ddim-linear",
    "variance-order/ddim-scaled-linear",
    "variance-order/ddim-squared-cosine",
    "conversion-round-trip",
    "conversion-round-trip-per-gain",
    "schedule-round-trip",
    "singular-conversion-raises",
    "off-manifold-raises",
    "ground-truth-reversal/ddim-linear",
    "ground-truth-reversal/power-generation",
    "oracle-generation-mean",
    "oracle-generation-cov",
    "grad-check/l1",
    "grad-check/l2",
    "grad-check/auto",
];

/// Steps whose residual/noise conversion amplifies errors by at most this
/// much count as well conditioned.
pub const WELL_CONDITIONED_GAIN: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
#[derive(Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Flips the sign of the noise term in every DDIM-equivalence trajectory.
    pub inject_fault: bool,
}


/// The schedules every variance and marginal check runs over, at `eta`.
pub fn shipped_schedules(eta: f64, mode: VarianceMode) -> Result<Vec<(String, CoefficientSchedule)>> {
    let mut out = vec![
        ("power-generation".to_string(), CoefficientSchedule::power(1000, 1.0, 1.0, 1.0, eta, mode)?),
        ("power-restoration".to_string(), CoefficientSchedule::power(1000, 1.0, 1.0, 0.01, eta, mode)?),
    ];
    for f in DdimFamily::ALL {
        out.push((format!("ddim-{f}"), ddim_to_rddm(&make_ddim_schedule(1000, f)?, eta, mode)?));
    }
    Ok(out)
}

fn mean_var_errors(x: &Tensor, mean: &[f64], var: f64) -> (f64, Vec<f64>) {
    let m = x.column_means();
    let v = x.column_vars();
    let n = x.rows() as f64;
    let mean_ratio = m
        .iter()
        .zip(mean)
        .map(|(a, b)| (a - b).abs() / (4.0 * var.sqrt() / n.sqrt()))
        .fold(0.0, f64::max);
    (mean_ratio, v.iter().map(|s| (s - var).abs() / var).collect())
}

fn constant_rows(row: &[f64], n: usize) -> Result<Tensor> {
    Tensor::broadcast_rows(row, n)
}

const FIXED_I0: [f64; 2] = [0.5, -0.3];
const FIXED_RES: [f64; 2] = [-1.0, 0.8];

/// Stepwise forward diffusion against the closed-form marginal at
/// `t in {T/5, T/2, T}`: mean error in units of `4 bbar_t / sqrt(n)` and
/// relative variance error.
pub fn forward_telescoping(total: usize, n: usize, seed: u64) -> Result<(f64, f64)> {
    let s = CoefficientSchedule::power(total, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm)?;
    let i0 = constant_rows(&FIXED_I0, n)?;
    let res = constant_rows(&FIXED_RES, n)?;
    let mut rng = RandomStream::new(seed);
    let mut state = DiffusionState::new(i0, 0, &s)?;
    let (mut worst_mean, mut worst_var): (f64, f64) = (0.0, 0.0);
    let checkpoints = [total / 5, total / 2, total];
    while state.t < total {
        state = forward_step(&state, &res, &mut rng)?;
        if checkpoints.contains(&state.t) {
            let ab = s.alpha_bar(state.t)?;
            let mean: Vec<f64> = FIXED_I0.iter().zip(FIXED_RES).map(|(a, r)| a + ab * r).collect();
            let (m, v) = mean_var_errors(&state.x, &mean, s.beta_bar_sq(state.t)?);
            worst_mean = worst_mean.max(m);
            worst_var = v.into_iter().fold(worst_var, f64::max);
        }
    }
    Ok((worst_mean, worst_var))
}

/// Spot-checked `(t, t_prev)` pairs for a `T`-step schedule.
pub fn marginal_pairs(total: usize) -> [(usize, usize); 5] {
    [(total, total * 4 / 5), (total / 2, total / 2 - 1), (total * 3 / 10, total / 10), (total / 20, total / 100), (2, 1)]
}

/// Draws `I_t` from the forward marginal, applies the exact posterior
/// transfer to each pair's `t_prev`, and compares with the forward marginal
/// there. Returns `(worst mean ratio, worst relative variance error)`.
pub fn marginal_preservation(s: &CoefficientSchedule, n: usize, seed: u64) -> Result<(f64, f64)> {
    let i0 = constant_rows(&FIXED_I0, n)?;
    let res = constant_rows(&FIXED_RES, n)?;
    let mut rng = RandomStream::new(seed);
    let (mut worst_mean, mut worst_var): (f64, f64) = (0.0, 0.0);
    for (t, p) in marginal_pairs(s.total_steps()) {
        let eps = rng.gaussian(&[n, 2])?;
        let x_t = i0.lincomb(1.0, &res, s.alpha_bar(t)?)?.lincomb(1.0, &eps, s.beta_bar(t)?)?;
        let x_p = reverse_step(&x_t, &res, &eps, t, p, s, s.eta(), &mut rng)?;
        let ab = s.alpha_bar(p)?;
        let mean: Vec<f64> = FIXED_I0.iter().zip(FIXED_RES).map(|(a, r)| a + ab * r).collect();
        let (m, v) = mean_var_errors(&x_p, &mean, s.beta_bar_sq(p)?);
        worst_mean = worst_mean.max(m);
        worst_var = v.into_iter().fold(worst_var, f64::max);
    }
    Ok((worst_mean, worst_var))
}

/// A fixed, nonlinear noise predictor shared by both trajectories.
struct SharedNoise;

impl Predictor for SharedNoise {
    fn outputs(&self) -> Outputs {
        Outputs::Noise
    }

    fn predict(&self, q: &Query<'_>) -> Result<crate::predictors::Prediction> {
        let c = q.t as f64 / q.total_steps as f64;
        let e = q.i_t.map(|v| 0.8 * v + 0.1 * (3.0 * v).sin() + 0.05 * c)?;
        Ok(crate::predictors::Prediction { residual: None, noise: Some(e) })
    }
}

/// Max per-step abs difference between the SM-N sampler on the converted
/// schedule and native DDIM updates, sharing predictor and noise draws.
pub fn ddim_equivalence(family: DdimFamily, total: usize, steps: usize, eta: f64, n: usize, fault: bool, seed: u64) -> Result<f64> {
    let d = make_ddim_schedule(total, family)?;
    let s = ddim_to_rddm(&d, eta, VarianceMode::Ddim)?;
    let mut plan = SamplingPlan::uniform(total, steps, eta, SamplingMethod::SmN, PathMode::Simultaneous)?;
    plan.flip_noise_sign = fault;
    let zero = Tensor::zeros(&[n, 2])?;
    let init = RandomStream::new(seed).gaussian(&[n, 2])?;
    let mut states = Vec::new();
    sample_observed(&plan, PredictorSet::Single(&SharedNoise), &zero, init.clone(), &s, &mut RandomStream::new(seed + 1), &mut |_, _, x| {
        states.push(x.clone())
    })?;
    let mut x = init;
    let mut rng = RandomStream::new(seed + 1);
    let mut worst: f64 = 0.0;
    for (k, (t, p)) in plan.transitions().into_iter().enumerate() {
        let q = Query { i_t: &x, i_in: &zero, t, alpha_bar: s.alpha_bar(t)?, beta_bar: s.beta_bar(t)?, total_steps: total };
        let eps = SharedNoise.predict(&q)?.noise.ok_or_else(|| Error::Predictor("no noise".into()))?;
        let sigma = d.sigma_sq(t, p, eta)?.sqrt();
        x = ddim_equivalent_step(&x, &eps, t, p, &d, sigma, &mut rng)?;
        worst = worst.max(x.max_abs_diff(&states[k + 1])?);
    }
    Ok(worst)
}

/// `(max over chains and eta of sum sigma^2 - bbar_T^2)` for the RDDM
/// variance, over the full chain and 10- and 100-step plans.
pub fn variance_sum_excess(s: &CoefficientSchedule) -> Result<f64> {
    let total = s.total_steps();
    let mut worst = f64::NEG_INFINITY;
    for eta in [0.25, 0.5, 1.0] {
        let r = s.clone().with_variance_mode(VarianceMode::Rddm);
        for steps in [total, 100.min(total), 10.min(total)] {
            let plan = SamplingPlan::uniform(total, steps, eta, SamplingMethod::SmResN, PathMode::Simultaneous)?;
            let sum: f64 = plan.transitions().iter().map(|&(t, p)| r.sigma_sq_between(t, p, eta)).sum::<Result<f64>>()?;
            worst = worst.max(sum - r.beta_bar_t_sq());
        }
    }
    Ok(worst)
}

/// `max(sigma^2_rddm - sigma^2_ddim)` per step at `eta = 1`.
pub fn variance_order_excess(s: &CoefficientSchedule) -> Result<f64> {
    let r = s.clone().with_variance_mode(VarianceMode::Rddm);
    let d = s.clone().with_variance_mode(VarianceMode::Ddim);
    let mut worst = f64::NEG_INFINITY;
    for t in 1..=s.total_steps() {
        worst = worst.max(r.sigma_sq_between(t, t - 1, 1.0)? - d.sigma_sq_between(t, t - 1, 1.0)?);
    }
    Ok(worst)
}

/// Round trips `res -> eps -> res` and `eps -> res -> eps` over every
/// non-singular `t` of every shipped schedule. Returns the max abs error over
/// steps whose conversion gain is at most `max_gain`, and the max over all
/// steps of the error divided by the gain.
pub fn conversion_round_trip(n: usize, seed: u64, max_gain: f64) -> Result<(f64, f64)> {
    let mut rng = RandomStream::new(seed);
    let (res, eps, i_in) = (rng.gaussian(&[n, 2])?, rng.gaussian(&[n, 2])?, rng.gaussian(&[n, 2])?);
    let (mut worst, mut scaled): (f64, f64) = (0.0, 0.0);
    for (_, s) in shipped_schedules(0.0, VarianceMode::Rddm)? {
        for t in 1..=s.total_steps() {
            let (ab, bb) = (s.alpha_bar(t)?, s.beta_bar(t)?);
            let x_t = i_in.lincomb(1.0, &res, ab - 1.0)?.lincomb(1.0, &eps, bb)?;
            match (noise_to_residual(&eps, &x_t, &i_in, ab, bb, t), residual_to_noise(&res, &x_t, &i_in, ab, bb, t)) {
                (Ok(r), Ok(e)) => {
                    let r2 = noise_to_residual(&residual_to_noise(&r, &x_t, &i_in, ab, bb, t)?, &x_t, &i_in, ab, bb, t)?;
                    let e2 = residual_to_noise(&noise_to_residual(&e, &x_t, &i_in, ab, bb, t)?, &x_t, &i_in, ab, bb, t)?;
                    let err = r2.max_abs_diff(&r)?.max(e2.max_abs_diff(&e)?);
                    let gain = conversion_gain(&s, t)?;
                    if gain <= max_gain {
                        worst = worst.max(err);
                    }
                    scaled = scaled.max(err / gain.max(1.0));
                }
                (Err(Error::SingularConversion { .. }), _) | (_, Err(Error::SingularConversion { .. })) => {}
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
    }
    Ok((worst, scaled))
}

/// Max abs error of `abar_ddim` after DDIM -> RDDM -> DDIM, over families.
pub fn schedule_round_trip() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in DdimFamily::ALL {
        let d = make_ddim_schedule(1000, f)?;
        let back = rddm_to_ddim(&ddim_to_rddm(&d, 0.0, VarianceMode::Rddm)?)?;
        for t in 0..=1000 {
            worst = worst.max((back.alpha_bar_at(t)? - d.alpha_bar_at(t)?).abs());
        }
    }
    Ok(worst)
}

/// 1 when SM-N at the terminal step of a generation power schedule raises a
/// singular-conversion error naming that step, else 0.
pub fn singular_conversion_raises() -> Result<f64> {
    let s = CoefficientSchedule::power(1000, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm)?;
    let x = Tensor::zeros(&[1, 2])?;
    let r = noise_to_residual(&x, &x, &x, s.alpha_bar(1000)?, s.beta_bar(1000)?, 1000);
    Ok(f64::from(matches!(r, Err(Error::SingularConversion { t: 1000, .. }))))
}

/// 1 when converting a power schedule (off the DDIM manifold) to DDIM fails
/// with the documented error, else 0.
pub fn off_manifold_raises() -> Result<f64> {
    let s = CoefficientSchedule::power(100, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm)?;
    Ok(f64::from(matches!(rddm_to_ddim(&s), Err(Error::OffManifold { .. }))))
}

/// Recovery error of deterministic sampling from recorded `(I_res, eps)`,
/// maxed over `methods`, all path modes and plan lengths `lengths`.
pub fn ground_truth_reversal(s: &CoefficientSchedule, methods: &[SamplingMethod], lengths: &[usize], seed: u64) -> Result<f64> {
    let mut rng = RandomStream::new(seed);
    let total = s.total_steps();
    let i0 = rng.gaussian(&[16, 2])?;
    let i_in = rng.gaussian(&[16, 2])?.scale(0.5)?;
    let tri = TripletBatch::new(i0, i_in)?;
    let eps = rng.gaussian(&[16, 2])?;
    let x_t = tri.i0.lincomb(1.0, &tri.i_res, s.alpha_bar(total)?)?.lincomb(1.0, &eps, s.beta_bar(total)?)?;
    let gt = GroundTruth::new(tri.i_res.clone(), eps)?;
    let pair = PredictorSet::Pair { residual: &gt, noise: &gt };
    let mut worst: f64 = 0.0;
    for &method in methods {
        for path in PathMode::ALL {
            for &steps in lengths {
                let plan = SamplingPlan::uniform(total, steps, 0.0, method, path)?;
                let out = sample_from(&plan, pair, &tri.i_in, x_t.clone(), s, &mut RandomStream::new(0))?;
                worst = worst.max(out.max_abs_diff(&tri.i0)?);
            }
        }
    }
    Ok(worst)
}

/// Oracle SM-Res-N sampling on gaussian-2d: `(mean error, mean bound,
/// relative Frobenius covariance error)`.
pub fn oracle_generation(n: usize, steps: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let task = TaskSpec::preset(Preset::Gaussian2d);
    let params = task.gaussian_params().ok_or_else(|| Error::InvalidArgument("gaussian-2d has no oracle".into()))?;
    let s = CoefficientSchedule::power(1000, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm)?;
    let oracle = GaussianOracle::new(params.clone());
    let plan = SamplingPlan::uniform(1000, steps, 0.0, SamplingMethod::SmResN, PathMode::Simultaneous)?;
    let zero = Tensor::zeros(&[n, 2])?;
    let out = crate::reverse::sample(&plan, PredictorSet::Single(&oracle), &zero, &s, &mut RandomStream::new(seed))?;
    let m = out.column_means();
    let mean_err = m.iter().zip(&params.mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let mu_norm = params.mu.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cov = covariance(&out)?;
    let target = [params.s_sq[0], 0.0, 0.0, params.s_sq[1]];
    let diff = cov.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((mean_err, 0.03 * mu_norm + 0.05, diff / norm))
}

/// Gradient check of a small MLP on a gaussian-2d batch.
pub fn grad_check_case(norm: Option<Norm>, lambda: f64, seed: u64) -> Result<f64> {
    let task = TaskSpec::preset(Preset::Gaussian2d);
    let s = CoefficientSchedule::power(100, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm)?;
    let (heads, outputs, objective) = match norm {
        Some(n) => (Heads::Double, Outputs::Both, Objective::Fixed(LossConfig::both(n))),
        None => (Heads::Single, Outputs::Residual, Objective::Auto),
    };
    let cfg = MlpConfig { data_dim: 2, embed_dim: 8, hidden: 16, heads };
    let mut tr = Trainer::new(Mlp::new(cfg, seed)?, outputs, TimeCondition::Step, objective, 1e-3, seed)?;
    tr.aosa.lambda = lambda;
    let b = draw_batch(&task, &s, 8, &mut RandomStream::new(seed + 1), Some(f64::INFINITY))?;
    let r = grad_check(&tr, &b, &s, &GradCheckOptions { seed, ..GradCheckOptions::default() })?;
    Ok(r.worst())
}

/// Runs every check in [`CHECK_INVENTORY`].
pub fn run_all(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let seed = opts.seed;
    let mut rows = Vec::new();
    let (m, v) = forward_telescoping(50, 100_000, seed)?;
    rows.push(CheckRow::at_most(CHECK_INVENTORY[0], m, 1.0));
    rows.push(CheckRow::at_most(CHECK_INVENTORY[1], v, 0.02));
    for (name, s) in shipped_schedules(1.0, VarianceMode::Rddm)? {
        let (m, v) = marginal_preservation(&s, 100_000, seed)?;
        rows.push(CheckRow::at_most(format!("marginal-mean/{name}"), m, 1.0));
        rows.push(CheckRow::at_most(format!("marginal-var/{name}"), v, 0.02));
    }
    for steps in [10, 20, 100] {
        for eta in [0.0, 1.0] {
            let e = ddim_equivalence(DdimFamily::Linear, 1000, steps, eta, 64, opts.inject_fault, seed)?;
            rows.push(CheckRow::at_most(format!("ddim-equivalence/steps-{steps}/eta-{eta}"), e, 1e-9));
        }
    }
    for (name, s) in shipped_schedules(0.0, VarianceMode::Rddm)? {
        rows.push(CheckRow::at_most(format!("variance-sum/{name}"), variance_sum_excess(&s)?, 1e-12));
    }
    for (name, s) in shipped_schedules(0.0, VarianceMode::Rddm)?.into_iter().filter(|(n, _)| n.starts_with("ddim")) {
        rows.push(CheckRow::at_most(format!("variance-order/{name}"), variance_order_excess(&s)?, 1e-9));
    }
    let (abs, per_gain) = conversion_round_trip(8, seed, WELL_CONDITIONED_GAIN)?;
    rows.push(CheckRow::at_most("conversion-round-trip", abs, 1e-12));
    rows.push(CheckRow::at_most("conversion-round-trip-per-gain", per_gain, 1e-12));
    rows.push(CheckRow::at_most("schedule-round-trip", schedule_round_trip()?, 1e-12));
    let raised = singular_conversion_raises()?;
    rows.push(CheckRow { name: "singular-conversion-raises".into(), statistic: raised, bound: 1.0, pass: raised == 1.0 });
    let raised = off_manifold_raises()?;
    rows.push(CheckRow { name: "off-manifold-raises".into(), statistic: raised, bound: 1.0, pass: raised == 1.0 });
    let ddim = ddim_to_rddm(&make_ddim_schedule(1000, DdimFamily::Linear)?, 0.0, VarianceMode::Rddm)?;
    let lengths = [2, 5, 10, 1000];
    rows.push(CheckRow::at_most(
        "ground-truth-reversal/ddim-linear",
        ground_truth_reversal(&ddim, &SamplingMethod::ALL, &lengths, seed)?,
        1e-10,
    ));
    let power = CoefficientSchedule::power(1000, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm)?;
    rows.push(CheckRow::at_most(
        "ground-truth-reversal/power-generation",
        ground_truth_reversal(&power, &[SamplingMethod::SmRes, SamplingMethod::SmResN], &lengths, seed)?,
        1e-10,
    ));
    let (me, mb, ce) = oracle_generation(10_000, 100, seed)?;
    rows.push(CheckRow::at_most("oracle-generation-mean", me, mb));
    rows.push(CheckRow::at_most("oracle-generation-cov", ce, 0.05));
    rows.push(CheckRow::at_most("grad-check/l1", grad_check_case(Some(Norm::L1), 0.5, seed)?, 1e-5));
    rows.push(CheckRow::at_most("grad-check/l2", grad_check_case(Some(Norm::L2), 0.5, seed)?, 1e-5));
    let auto = [0.3, 0.5, 0.8].iter().map(|&l| grad_check_case(None, l, seed)).collect::<Result<Vec<_>>>()?;
    rows.push(CheckRow::at_most("grad-check/auto", auto.into_iter().fold(0.0, f64::max), 1e-5));
    debug_assert_eq!(rows.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), CHECK_INVENTORY);
    Ok(rows)
}

/// `check,statistic,bound,pass` CSV.
pub fn report_csv(rows: &[CheckRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "statistic", "bound", "pass"])?;
    for r in rows {
        w.write_record([r.name.clone(), format!("{:e}", r.statistic), format!("{:e}", r.bound), r.pass.to_string()])?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ddim_equivalence_detects_fault() {
        assert!(ddim_equivalence(DdimFamily::Linear, 100, 10, 0.0, 4, false, 1).unwrap() < 1e-9);
        assert!(ddim_equivalence(DdimFamily::Linear, 100, 10, 0.0, 4, true, 1).unwrap() > 1e-3);
    }

    #[test]
    fn guards_raise() {
        assert_eq!(singular_conversion_raises().unwrap(), 1.0);
        assert_eq!(off_manifold_raises().unwrap(), 1.0);
    }

    #[test]
    fn check_row_rejects_nan() {
        assert!(!CheckRow::at_most("x", f64::NAN, 1.0).pass);
        assert!(CheckRow::at_most("x", 1.0, 1.0).pass);
    }
}
