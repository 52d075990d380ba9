//! Path-dependence of generation with separate residual and noise networks.
//!
//! Every variant starts from the same state and reuses the same noise
//! stream, so differences come only from the schedule or path.

use rddm_core::error::{Error, Result};
use rddm_core::metrics::energy_distance;
use rddm_core::numerics::{RandomStream, Tensor};
use rddm_core::predictors::{PredictorSet, Query};
use rddm_core::reverse::{sample_from, sample_observed, PathMode, SamplingMethod, SamplingPlan};
use rddm_core::schedules::{adjust_schedule, AdjustMode, CoefficientSchedule};

pub const ALPHA_EXPONENTS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

/// Perturbation of the time coordinates for finite-difference sensitivities.
pub const FD_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct VariantDeviation {
    pub name: String,
    pub energy_distance: f64,
    pub max_abs_deviation: f64,
    pub mean_abs_deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathReport {
    pub variants: Vec<VariantDeviation>,
    /// Mean `|d res_hat / d bbar|` along the baseline trajectory.
    pub residual_wrt_beta_bar: f64,
    /// Mean `|d eps_hat / d abar|` along the baseline trajectory.
    pub noise_wrt_alpha_bar: f64,
}

pub fn variant_name(a: f64) -> String {
    format!("alpha-power-{a}")
}

fn deviation(name: String, out: &Tensor, base: &Tensor) -> Result<VariantDeviation> {
    let diff = out.sub(base)?;
    let abs: Vec<f64> = diff.data().iter().map(|v| v.abs()).collect();
    Ok(VariantDeviation {
        name,
        energy_distance: energy_distance(out, base)?,
        max_abs_deviation: abs.iter().copied().fold(0.0, f64::max),
        mean_abs_deviation: abs.iter().sum::<f64>() / abs.len() as f64,
    })
}

/// Samples the baseline, a rerun of it, each alpha-power schedule and both
/// decomposed paths with `SM-Res-N`, starting every run from `init` at
/// `t = T`.
pub fn run(
    preds: PredictorSet<'_>,
    i_in: &Tensor,
    init: &Tensor,
    base: &CoefficientSchedule,
    steps: usize,
    eta: f64,
    seed: u64,
) -> Result<PathReport> {
    if !preds.is_pair() {
        return Err(Error::Predictor(
            "the path experiment needs two independent networks (SM-Res-N-2Net): set predictor = checkpoint with both \
             checkpoint and noise_checkpoint, or use oracle / ground-truth"
                .into(),
        ));
    }
    let total = base.total_steps();
    let plan = |path| SamplingPlan::uniform(total, steps, eta, SamplingMethod::SmResN, path);
    let noise = || RandomStream::new(seed).derive(1);

    let mut states = Vec::new();
    let baseline = sample_observed(&plan(PathMode::Simultaneous)?, preds, i_in, init.clone(), base, &mut noise(), &mut |_, t, x| {
        states.push((t, x.clone()))
    })?;
    let mut variants = Vec::new();
    let rerun = sample_from(&plan(PathMode::Simultaneous)?, preds, i_in, init.clone(), base, &mut noise())?;
    variants.push(deviation("baseline-rerun".into(), &rerun, &baseline)?);
    for a in ALPHA_EXPONENTS {
        let s = adjust_schedule(base, AdjustMode::Alpha, a)?;
        let out = sample_from(&plan(PathMode::Simultaneous)?, preds, i_in, init.clone(), &s, &mut noise())?;
        variants.push(deviation(variant_name(a), &out, &baseline)?);
    }
    for path in [PathMode::ResidualFirst, PathMode::NoiseFirst] {
        let out = sample_from(&plan(path)?, preds, i_in, init.clone(), base, &mut noise())?;
        variants.push(deviation(path.to_string(), &out, &baseline)?);
    }

    let (mut d_res, mut d_eps, mut count) = (0.0, 0.0, 0usize);
    for (t, x) in states.iter().filter(|(t, _)| *t > 0) {
        let q = Query { i_t: x, i_in, t: *t, alpha_bar: base.alpha_bar(*t)?, beta_bar: base.beta_bar(*t)?, total_steps: total };
        let r_up = preds.residual(&Query { beta_bar: q.beta_bar + FD_STEP, ..q })?;
        let r_down = preds.residual(&Query { beta_bar: q.beta_bar - FD_STEP, ..q })?;
        let e_up = preds.noise(&Query { alpha_bar: q.alpha_bar + FD_STEP, ..q })?;
        let e_down = preds.noise(&Query { alpha_bar: q.alpha_bar - FD_STEP, ..q })?;
        d_res += r_up.sub(&r_down)?.data().iter().map(|v| v.abs()).sum::<f64>() / (2.0 * FD_STEP);
        d_eps += e_up.sub(&e_down)?.data().iter().map(|v| v.abs()).sum::<f64>() / (2.0 * FD_STEP);
        count += x.len();
    }
    Ok(PathReport { variants, residual_wrt_beta_bar: d_res / count as f64, noise_wrt_alpha_bar: d_eps / count as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rddm_core::forward::TripletBatch;
    use rddm_core::predictors::{GaussianOracle, GroundTruth};
    use rddm_core::schedules::VarianceMode;
    use rddm_core::tasks::{Preset, TaskSpec};

    #[test]
    fn ground_truth_paths_agree() {
        let s = CoefficientSchedule::power(100, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let mut rng = RandomStream::new(3);
        let tri = TripletBatch::generation(rng.gaussian(&[50, 2]).unwrap()).unwrap();
        let eps = rng.gaussian(&[50, 2]).unwrap();
        let init = tri.i_in.lincomb(1.0, &tri.i_res, s.alpha_bar(100).unwrap() - 1.0).unwrap().lincomb(1.0, &eps, s.beta_bar(100).unwrap()).unwrap();
        let gt = GroundTruth::new(tri.i_res.clone(), eps).unwrap();
        let r = run(PredictorSet::Pair { residual: &gt, noise: &gt }, &tri.i_in, &init, &s, 10, 0.0, 0).unwrap();
        for v in &r.variants {
            assert!(v.max_abs_deviation < 1e-10, "{v:?}");
        }
        assert_eq!((r.residual_wrt_beta_bar, r.noise_wrt_alpha_bar), (0.0, 0.0));
    }

    #[test]
    fn single_network_is_rejected() {
        let s = CoefficientSchedule::power(10, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let o = GaussianOracle::new(TaskSpec::preset(Preset::Gaussian2d).gaussian_params().unwrap());
        let x = Tensor::zeros(&[4, 2]).unwrap();
        let e = run(PredictorSet::Single(&o), &x, &x, &s, 5, 0.0, 0).unwrap_err();
        assert!(e.to_string().contains("SM-Res-N-2Net"), "{e}");
    }

    #[test]
    fn oracle_mild_exponents_deviate_less_than_strong() {
        let task = TaskSpec::preset(Preset::Gaussian2d);
        let s = CoefficientSchedule::power(1000, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let o = GaussianOracle::new(task.gaussian_params().unwrap());
        let i_in = Tensor::zeros(&[2000, 2]).unwrap();
        let init = RandomStream::new(5).gaussian(&[2000, 2]).unwrap().scale(s.beta_bar(1000).unwrap()).unwrap();
        let r = run(PredictorSet::Pair { residual: &o, noise: &o }, &i_in, &init, &s, 10, 0.0, 5).unwrap();
        let dev = |name: &str| r.variants.iter().find(|v| v.name == name).unwrap().mean_abs_deviation;
        assert_eq!(dev("baseline-rerun"), 0.0);
        assert_eq!(dev(&variant_name(1.0)), 0.0);
        assert!(dev(&variant_name(0.5)) < dev(&variant_name(5.0)));
        assert!(dev(&variant_name(2.0)) < dev(&variant_name(5.0)));
    }
}
