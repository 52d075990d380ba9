//! Central-difference check of the analytic gradients.

use crate::error::{Error, Result};
use crate::numerics::RandomStream;
use crate::schedules::CoefficientSchedule;
use crate::training::trainer::{Objective, TrainBatch, Trainer};

/// Denominator floor for relative errors, per unit of loss. Central
/// differences carry roughly `eps_mach * |L| / h` of roundoff, so smaller
/// gradients are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Check this many randomly chosen parameters instead of all of them.
    pub samples: Option<usize>,
    pub seed: u64,
    /// Adds a relative error of 10% to one analytic entry, for testing the
    /// checker itself.
    pub corrupt: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-5, samples: Some(100), seed: 0, corrupt: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters skipped because a perturbation crossed an L1 kink.
    pub excluded: usize,
    pub lambda_rel_error: Option<f64>,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.max_rel_error.max(self.lambda_rel_error.unwrap_or(0.0))
    }
}

pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `trainer`'s analytic gradients on `batch` with central
/// differences; under the automatic objective also checks `dL/d lambda`.
pub fn grad_check(
    trainer: &Trainer,
    batch: &TrainBatch,
    schedule: &CoefficientSchedule,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(opts.h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let grads = trainer.loss_and_grads(batch, schedule)?;
    let mut flat: Vec<(usize, usize)> = Vec::new();
    for (k, g) in grads.grads.iter().enumerate() {
        flat.extend((0..g.len()).map(|i| (k, i)));
    }
    let chosen: Vec<(usize, usize)> = match opts.samples {
        Some(n) if n < flat.len() => {
            let mut rng = RandomStream::new(opts.seed);
            // partial Fisher-Yates
            for i in 0..n {
                let j = i + rng.below(flat.len() - i);
                flat.swap(i, j);
            }
            flat.truncate(n);
            flat
        }
        _ => flat,
    };
    let lambda = trainer.aosa.lambda;
    let floor = REL_ERROR_FLOOR * grads.value.abs().max(1.0);
    let base_sig = trainer.l1_signature(&trainer.model, batch, schedule)?;
    let mut worst: f64 = 0.0;
    let (mut checked, mut excluded) = (0, 0);
    for (n, &(k, i)) in chosen.iter().enumerate() {
        let mut values = [0.0; 2];
        let mut kink = false;
        for (slot, sign) in [(0, 1.0), (1, -1.0)] {
            let mut m = trainer.model.clone();
            m.params_mut()[k][i] += sign * opts.h;
            if let Some(sig) = &base_sig {
                kink |= trainer.l1_signature(&m, batch, schedule)?.as_ref() != Some(sig);
            }
            values[slot] = trainer.loss_value(&m, batch, schedule, lambda)?;
        }
        if kink {
            excluded += 1;
            continue;
        }
        let numeric = (values[0] - values[1]) / (2.0 * opts.h);
        let mut analytic = grads.grads[k][i];
        if opts.corrupt && n == 0 {
            analytic = if analytic == 0.0 { 1.0 } else { 1.1 * analytic };
        }
        worst = worst.max(rel_error(analytic, numeric, floor));
        checked += 1;
    }
    let lambda_rel_error = match (trainer.objective, grads.d_lambda) {
        (Objective::Auto, Some(dl)) => {
            let up = trainer.loss_value(&trainer.model, batch, schedule, lambda + opts.h)?;
            let down = trainer.loss_value(&trainer.model, batch, schedule, lambda - opts.h)?;
            Some(rel_error(dl, (up - down) / (2.0 * opts.h), floor))
        }
        _ => None,
    };
    Ok(GradCheckReport { max_rel_error: worst, checked, excluded, lambda_rel_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::{Heads, Mlp, MlpConfig, Outputs, TimeCondition};
    use crate::schedules::VarianceMode;
    use crate::tasks::{Preset, TaskSpec};
    use crate::training::loss::{LossConfig, Norm};
    use crate::training::trainer::draw_batch;

    fn setup(outputs: Outputs, objective: Objective) -> (Trainer, TrainBatch, CoefficientSchedule) {
        let task = TaskSpec::preset(Preset::Gaussian2d);
        let s = CoefficientSchedule::power(50, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let heads = if outputs == Outputs::Both { Heads::Double } else { Heads::Single };
        let cfg = MlpConfig { data_dim: 2, embed_dim: 8, hidden: 16, heads };
        let tr = Trainer::new(Mlp::new(cfg, 5).unwrap(), outputs, TimeCondition::Step, objective, 1e-3, 5).unwrap();
        let b = draw_batch(&task, &s, 8, &mut RandomStream::new(2), Some(f64::INFINITY)).unwrap();
        (tr, b, s)
    }

    #[test]
    fn l2_gradients_match() {
        let (tr, b, s) = setup(Outputs::Both, Objective::Fixed(LossConfig::both(Norm::L2)));
        let r = grad_check(&tr, &b, &s, &GradCheckOptions { samples: None, ..Default::default() }).unwrap();
        assert!(r.max_rel_error < 1e-5, "{r:?}");
        assert_eq!(r.checked, tr.model.param_count());
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let (tr, b, s) = setup(Outputs::Noise, Objective::Fixed(LossConfig::noise(Norm::L2)));
        let r = grad_check(&tr, &b, &s, &GradCheckOptions { corrupt: true, ..Default::default() }).unwrap();
        assert!(r.max_rel_error > 1e-2, "{r:?}");
    }

    #[test]
    fn rel_error_floor() {
        assert_eq!(rel_error(0.0, 0.0, 1e-4), 0.0);
        assert!((rel_error(1e-9, 0.0, 1e-4) - 1e-5).abs() < 1e-18);
        assert!((rel_error(2.0, 1.0, 1e-4) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l1_gradients_match_away_from_kinks() {
        let (tr, b, s) = setup(Outputs::Both, Objective::Fixed(LossConfig::both(Norm::L1)));
        let r = grad_check(&tr, &b, &s, &GradCheckOptions { samples: None, ..Default::default() }).unwrap();
        assert!(r.max_rel_error < 1e-5, "{r:?}");
        assert!(r.checked > 0);
    }

    #[test]
    fn auto_gradients_match_including_lambda() {
        let (mut tr, b, s) = setup(Outputs::Residual, Objective::Auto);
        for lambda in [0.5, 0.3, 0.8] {
            tr.aosa.lambda = lambda;
            let r = grad_check(&tr, &b, &s, &GradCheckOptions { samples: None, ..Default::default() }).unwrap();
            assert!(r.worst() < 1e-5, "{lambda}: {r:?}");
            assert!(r.lambda_rel_error.is_some());
        }
    }
}
