//! Minibatch construction, backprop, and the optimizer step.

use crate::error::{Error, Result};
use crate::numerics::{RandomStream, Tensor};
use crate::predictors::{Heads, Mlp, MlpConfig, MlpPredictor, Outputs, TimeCondition};
use crate::schedules::CoefficientSchedule;
use crate::tasks::TaskSpec;
use crate::training::adam::Adam;
use crate::training::aosa::{aosa_update, AosaState, Resolution};
use crate::training::loss::{auto_time_is_regular, loss_auto, loss_with_grad, LossConfig, Norm};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    Fixed(LossConfig),
    /// Learnable convex mix of residual and noise objectives.
    Auto,
}

/// Diffused training examples with per-row timesteps.
#[derive(Clone, Debug)]
pub struct TrainBatch {
    pub i_t: Tensor,
    pub i_in: Tensor,
    pub true_res: Tensor,
    pub true_eps: Tensor,
    pub t: Vec<usize>,
}

const MAX_RESAMPLES: usize = 10_000;

/// Draws `size` fresh task examples, a uniform `t` per row, and noise.
/// With `max_gain`, timesteps failing [`auto_time_is_regular`] are redrawn.
pub fn draw_batch(
    task: &TaskSpec,
    schedule: &CoefficientSchedule,
    size: usize,
    stream: &mut RandomStream,
    max_gain: Option<f64>,
) -> Result<TrainBatch> {
    let tri = task.make_dataset(size, stream)?;
    let total = schedule.total_steps();
    let mut t = Vec::with_capacity(size);
    for _ in 0..size {
        let mut tries = 0;
        loop {
            let c = stream.below(total) + 1;
            let keep = match max_gain {
                None => true,
                Some(g) => auto_time_is_regular(schedule, c, g)?,
            };
            if keep {
                t.push(c);
                break;
            }
            tries += 1;
            if tries > MAX_RESAMPLES {
                return Err(Error::Schedule("no regular timestep found for the automatic objective".into()));
            }
        }
    }
    let eps = stream.gaussian(tri.i0.shape())?;
    let w = tri.i0.row_len();
    let mut x = Vec::with_capacity(tri.i0.len());
    for (r, &tr) in t.iter().enumerate() {
        let (ab, bb) = (schedule.alpha_bar(tr)?, schedule.beta_bar(tr)?);
        for k in r * w..(r + 1) * w {
            x.push(tri.i0.data()[k] + ab * tri.i_res.data()[k] + bb * eps.data()[k]);
        }
    }
    Ok(TrainBatch { i_t: Tensor::new(tri.i0.shape().to_vec(), x)?, i_in: tri.i_in, true_res: tri.i_res, true_eps: eps, t })
}

pub fn conditions(t: &[usize], schedule: &CoefficientSchedule, time: TimeCondition) -> Result<Vec<f64>> {
    t.iter()
        .map(|&tr| Ok(time.value(tr, schedule.alpha_bar(tr)?, schedule.beta_bar(tr)?, schedule.total_steps())))
        .collect()
}

/// Splits a `[B, 2d]` two-headed output into `(residual, noise)` halves.
pub fn split_heads(out: &Tensor, d: usize) -> Result<(Tensor, Tensor)> {
    let (mut r, mut e) = (Vec::with_capacity(out.len() / 2), Vec::with_capacity(out.len() / 2));
    for row in 0..out.rows() {
        let v = out.row(row);
        r.extend_from_slice(&v[..d]);
        e.extend_from_slice(&v[d..]);
    }
    Ok((Tensor::new(vec![out.rows(), d], r)?, Tensor::new(vec![out.rows(), d], e)?))
}

fn join_heads(r: &Tensor, e: &Tensor) -> Result<Tensor> {
    let d = r.row_len();
    let mut out = Vec::with_capacity(2 * r.len());
    for row in 0..r.rows() {
        out.extend_from_slice(r.row(row));
        out.extend_from_slice(e.row(row));
    }
    Tensor::new(vec![r.rows(), 2 * d], out)
}

#[derive(Clone, Debug)]
pub struct StepGrads {
    pub value: f64,
    pub grads: Vec<Vec<f64>>,
    pub d_lambda: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    pub lambda: Option<f64>,
    pub resolved_now: bool,
}

/// A model together with its objective and optimizer state.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: Mlp,
    pub outputs: Outputs,
    pub time: TimeCondition,
    pub objective: Objective,
    pub optimizer: Adam,
    pub lambda_optimizer: Adam,
    pub aosa: AosaState,
    pub grad_clip: Option<f64>,
    pub base_seed: u64,
    pub iteration: usize,
}

impl Trainer {
    pub fn new(
        model: Mlp,
        outputs: Outputs,
        time: TimeCondition,
        objective: Objective,
        learning_rate: f64,
        base_seed: u64,
    ) -> Result<Self> {
        let heads = model.config().heads;
        match (objective, outputs, heads) {
            (Objective::Auto, Outputs::Both, _) | (Objective::Auto, _, Heads::Double) => {
                return Err(Error::InvalidArgument("the automatic objective trains a single-headed network".into()))
            }
            (Objective::Fixed(_), Outputs::Both, Heads::Single) | (Objective::Fixed(_), Outputs::Residual | Outputs::Noise, Heads::Double) => {
                return Err(Error::InvalidArgument(format!("{outputs:?} outputs do not match {heads:?} heads")))
            }
            (Objective::Fixed(c), Outputs::Residual, _) if c.lambda_eps != 0.0 => {
                return Err(Error::InvalidArgument("a residual-only network cannot carry a noise loss".into()))
            }
            (Objective::Fixed(c), Outputs::Noise, _) if c.lambda_res != 0.0 => {
                return Err(Error::InvalidArgument("a noise-only network cannot carry a residual loss".into()))
            }
            _ => {}
        }
        Ok(Self {
            model,
            outputs,
            time,
            objective,
            optimizer: Adam::new(learning_rate),
            lambda_optimizer: Adam::new(learning_rate),
            aosa: AosaState::default(),
            grad_clip: None,
            base_seed,
            iteration: 0,
        })
    }

    /// Single-headed trainer for the automatic objective.
    pub fn auto(config: MlpConfig, seed: u64, learning_rate: f64, lambda_learning_rate: f64) -> Result<Self> {
        let model = Mlp::new(MlpConfig { heads: Heads::Single, ..config }, seed)?;
        let mut tr = Self::new(model, Outputs::Residual, TimeCondition::Step, Objective::Auto, learning_rate, seed)?;
        tr.lambda_optimizer = Adam::new(lambda_learning_rate);
        Ok(tr)
    }

    fn heads_for_fixed(&self, out: &Tensor) -> Result<(Option<Tensor>, Option<Tensor>)> {
        Ok(match self.outputs {
            Outputs::Residual => (Some(out.clone()), None),
            Outputs::Noise => (None, Some(out.clone())),
            Outputs::Both => {
                let (r, e) = split_heads(out, self.model.config().data_dim)?;
                (Some(r), Some(e))
            }
        })
    }

    /// Raw network output for a batch.
    pub fn output(&self, model: &Mlp, batch: &TrainBatch, schedule: &CoefficientSchedule) -> Result<Tensor> {
        model.forward(&batch.i_t, &batch.i_in, &conditions(&batch.t, schedule, self.time)?)
    }

    /// Loss under `model` (not necessarily `self.model`), with the current
    /// objective and `lambda`.
    pub fn loss_value(&self, model: &Mlp, batch: &TrainBatch, schedule: &CoefficientSchedule, lambda: f64) -> Result<f64> {
        let out = self.output(model, batch, schedule)?;
        match self.objective {
            Objective::Fixed(cfg) => {
                let (r, e) = self.heads_for_fixed(&out)?;
                Ok(loss_with_grad(r.as_ref(), &batch.true_res, e.as_ref(), &batch.true_eps, &cfg)?.0)
            }
            Objective::Auto => Ok(loss_auto(
                &out,
                &batch.true_res,
                &batch.true_eps,
                &batch.i_t,
                &batch.i_in,
                &batch.t,
                schedule,
                lambda,
            )?
            .value),
        }
    }

    /// Signs of the weighted L1 residuals, used to spot kinks during
    /// gradient checks. `None` for smooth objectives.
    pub fn l1_signature(&self, model: &Mlp, batch: &TrainBatch, schedule: &CoefficientSchedule) -> Result<Option<Vec<i8>>> {
        let cfg = match self.objective {
            Objective::Fixed(c) if c.norm == Norm::L1 => c,
            _ => return Ok(None),
        };
        let out = self.output(model, batch, schedule)?;
        let (r, e) = self.heads_for_fixed(&out)?;
        let mut sig = Vec::new();
        let sign = |d: f64| if d > 0.0 { 1 } else if d < 0.0 { -1 } else { 0 };
        if let (Some(r), true) = (r, cfg.lambda_res != 0.0) {
            sig.extend(r.data().iter().zip(batch.true_res.data()).map(|(a, b)| sign(a - b)));
        }
        if let (Some(e), true) = (e, cfg.lambda_eps != 0.0) {
            sig.extend(e.data().iter().zip(batch.true_eps.data()).map(|(a, b)| sign(a - b)));
        }
        Ok(Some(sig))
    }

    /// Loss and exact gradients for the current parameters.
    pub fn loss_and_grads(&self, batch: &TrainBatch, schedule: &CoefficientSchedule) -> Result<StepGrads> {
        let cond = conditions(&batch.t, schedule, self.time)?;
        let (out, cache) = self.model.forward_cached(&batch.i_t, &batch.i_in, &cond)?;
        let (value, d_out, d_lambda) = match self.objective {
            Objective::Fixed(cfg) => {
                let (r, e) = self.heads_for_fixed(&out)?;
                let (v, gr, ge) = loss_with_grad(r.as_ref(), &batch.true_res, e.as_ref(), &batch.true_eps, &cfg)?;
                let d = match self.outputs {
                    Outputs::Residual => gr.ok_or_else(|| Error::InvalidArgument("missing residual gradient".into()))?,
                    Outputs::Noise => ge.ok_or_else(|| Error::InvalidArgument("missing noise gradient".into()))?,
                    Outputs::Both => {
                        let zero = Tensor::zeros(batch.true_res.shape())?;
                        join_heads(gr.as_ref().unwrap_or(&zero), ge.as_ref().unwrap_or(&zero))?
                    }
                };
                (v, d, None)
            }
            Objective::Auto => {
                let a = loss_auto(
                    &out,
                    &batch.true_res,
                    &batch.true_eps,
                    &batch.i_t,
                    &batch.i_in,
                    &batch.t,
                    schedule,
                    self.aosa.lambda,
                )?;
                (a.value, a.d_out, Some(a.d_lambda))
            }
        };
        let grads = self.model.backward(&cache, &d_out)?;
        Ok(StepGrads { value, grads, d_lambda })
    }

    /// One optimizer step; for the automatic objective also updates the
    /// mixing weight and applies the resolution rule.
    pub fn step(&mut self, batch: &TrainBatch, schedule: &CoefficientSchedule) -> Result<StepReport> {
        self.iteration += 1;
        let StepGrads { value, mut grads, d_lambda } = self.loss_and_grads(batch, schedule)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: self.iteration });
        }
        if let Some(c) = self.grad_clip {
            let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
            if norm > c {
                let k = c / norm;
                grads.iter_mut().flatten().for_each(|g| *g *= k);
            }
        }
        self.optimizer.step(&mut self.model.params_mut(), &grads)?;
        let mut resolved_now = false;
        if let Some(dl) = d_lambda {
            let mut lam = [self.aosa.lambda];
            self.lambda_optimizer.step(&mut [&mut lam[..]], &[vec![dl]])?;
            self.aosa.lambda = lam[0].clamp(0.0, 1.0);
            resolved_now = aosa_update(&mut self.aosa, &mut self.model, self.base_seed)?;
            if resolved_now {
                self.optimizer.reset();
                let norm = Norm::L2;
                match self.aosa.resolved {
                    Resolution::SmRes => {
                        self.outputs = Outputs::Residual;
                        self.objective = Objective::Fixed(LossConfig::residual(norm));
                    }
                    Resolution::SmN => {
                        self.outputs = Outputs::Noise;
                        self.objective = Objective::Fixed(LossConfig::noise(norm));
                    }
                    Resolution::Undecided => {}
                }
            }
        }
        let lambda = match self.objective {
            Objective::Auto => Some(self.aosa.lambda),
            Objective::Fixed(_) if self.aosa.resolved != Resolution::Undecided => Some(self.aosa.lambda),
            _ => None,
        };
        Ok(StepReport { loss: value, lambda, resolved_now })
    }

    pub fn predictor(&self) -> Result<MlpPredictor> {
        MlpPredictor::new(self.model.clone(), self.outputs, self.time)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub grad_clip: Option<f64>,
    pub hidden: usize,
    pub outputs: Outputs,
    pub loss: LossConfig,
    pub time: Option<TimeCondition>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub loss: f64,
    pub lambda: Option<f64>,
    pub resolved: Resolution,
}

/// Fits a fresh MLP to `task` with a fixed objective.
pub fn train(
    task: &TaskSpec,
    schedule: &CoefficientSchedule,
    cfg: &TrainConfig,
    log: &mut dyn FnMut(TrainLogRow),
) -> Result<Trainer> {
    let heads = if cfg.outputs == Outputs::Both { Heads::Double } else { Heads::Single };
    let mcfg = MlpConfig { hidden: cfg.hidden, ..MlpConfig::new(task.data_dim, heads) };
    let model = Mlp::new(mcfg, cfg.seed)?;
    let time = cfg.time.unwrap_or_else(|| TimeCondition::default_for(cfg.outputs));
    let mut tr = Trainer::new(model, cfg.outputs, time, Objective::Fixed(cfg.loss), cfg.learning_rate, cfg.seed)?;
    tr.grad_clip = cfg.grad_clip;
    let mut stream = RandomStream::new(cfg.seed).derive(1);
    for _ in 0..cfg.iterations {
        let batch = draw_batch(task, schedule, cfg.batch_size, &mut stream, None)?;
        let rep = tr.step(&batch, schedule)?;
        log(TrainLogRow { iteration: tr.iteration, loss: rep.loss, lambda: None, resolved: Resolution::Undecided });
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::VarianceMode;
    use crate::tasks::Preset;

    #[test]
    fn output_layer_gradient_closed_form() {
        let cfg = MlpConfig { data_dim: 1, embed_dim: 2, hidden: 3, heads: Heads::Single };
        let model = Mlp::new(cfg, 1).unwrap();
        let x = Tensor::from_rows(&[vec![0.4]]).unwrap();
        let (out, cache) = model.forward_cached(&x, &x, &[2.0]).unwrap();
        let y = 0.9;
        let w: f64 = out.data()[0];
        let d = Tensor::from_rows(&[vec![2.0 * (w - y)]]).unwrap();
        let g = model.backward(&cache, &d).unwrap();
        for (gw, h) in g[4].iter().zip(cache.last_hidden()) {
            assert!((gw - 2.0 * (w - y) * h).abs() < 1e-15);
        }
        assert_eq!(g[5][0], 2.0 * (w - y));
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let task = TaskSpec::preset(Preset::Gaussian2d);
        let s = CoefficientSchedule::power(100, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let cfg = TrainConfig {
            seed: 3,
            iterations: 5,
            batch_size: 4,
            learning_rate: 0.0,
            grad_clip: None,
            hidden: 8,
            outputs: Outputs::Noise,
            loss: LossConfig::noise(Norm::L2),
            time: None,
        };
        let tr = train(&task, &s, &cfg, &mut |_| {}).unwrap();
        let fresh = Mlp::new(*tr.model.config(), 3).unwrap();
        assert_eq!(tr.model, fresh);
    }

    #[test]
    fn mismatched_objective_rejected() {
        let model = Mlp::new(MlpConfig::new(2, Heads::Single), 0).unwrap();
        let obj = Objective::Fixed(LossConfig::both(Norm::L2));
        assert!(Trainer::new(model, Outputs::Residual, TimeCondition::Step, obj, 1e-3, 0).is_err());
    }

    #[test]
    fn regular_batches_skip_singular_t() {
        let task = TaskSpec::preset(Preset::Gaussian2d);
        let s = CoefficientSchedule::power(20, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let b = draw_batch(&task, &s, 500, &mut RandomStream::new(1), Some(f64::INFINITY)).unwrap();
        assert!(b.t.iter().all(|&t| auto_time_is_regular(&s, t, f64::INFINITY).unwrap()));
        assert!(b.t.iter().all(|&t| (1..20).contains(&t)));
        let b = draw_batch(&task, &s, 500, &mut RandomStream::new(1), Some(3.0)).unwrap();
        assert!(b.t.iter().all(|&t| (1..=17).contains(&t)));
    }
}
