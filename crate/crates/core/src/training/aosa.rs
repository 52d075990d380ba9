//! Automatic objective selection: a learnable weight between residual and
//! noise objectives that snaps to one of them once it leaves `0.5 +- delta`.

use std::fmt;

use crate::error::Result;
use crate::numerics::RandomStream;
use crate::predictors::{Mlp, MlpConfig};
use crate::schedules::CoefficientSchedule;
use crate::tasks::TaskSpec;
use crate::training::trainer::{draw_batch, Trainer};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resolution {
    Undecided,
    SmRes,
    SmN,
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Undecided => "undecided",
            Self::SmRes => "sm-res",
            Self::SmN => "sm-n",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AosaState {
    pub lambda: f64,
    pub delta: f64,
    pub resolved: Resolution,
    pub iterations_elapsed: usize,
    /// Iteration at which the weight resolved.
    pub resolved_at: Option<usize>,
    /// Seed used to reinitialize the network on resolution.
    pub reinit_seed: Option<u64>,
}

impl Default for AosaState {
    fn default() -> Self {
        Self { lambda: 0.5, delta: 0.01, resolved: Resolution::Undecided, iterations_elapsed: 0, resolved_at: None, reinit_seed: None }
    }
}

/// Call once per iteration after the gradient step. Returns `true` on the
/// iteration that resolves, after reinitializing `model` with seed
/// `base_seed ^ iteration`.
pub fn aosa_update(state: &mut AosaState, model: &mut Mlp, base_seed: u64) -> Result<bool> {
    state.iterations_elapsed += 1;
    if state.resolved != Resolution::Undecided || (state.lambda - 0.5).abs() < state.delta {
        return Ok(false);
    }
    let (res, lam) = if state.lambda > 0.5 { (Resolution::SmRes, 1.0) } else { (Resolution::SmN, 0.0) };
    let seed = base_seed ^ state.iterations_elapsed as u64;
    *model = Mlp::new(*model.config(), seed)?;
    state.resolved = res;
    state.lambda = lam;
    state.resolved_at = Some(state.iterations_elapsed);
    state.reinit_seed = Some(seed);
    Ok(true)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AosaConfig {
    pub seed: u64,
    pub max_iterations: usize,
    /// Iterations to keep training the chosen objective after resolution.
    pub continue_after: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda_learning_rate: f64,
    pub grad_clip: Option<f64>,
    pub hidden: usize,
    /// Timesteps whose conversions amplify errors by more than this are
    /// redrawn while the weight is undecided.
    pub max_conversion_gain: f64,
}

impl Default for AosaConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iterations: 5000,
            continue_after: 0,
            batch_size: 64,
            learning_rate: 1e-3,
            lambda_learning_rate: 1e-4,
            grad_clip: Some(1.0),
            hidden: 64,
            max_conversion_gain: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AosaLogRow {
    pub iteration: usize,
    pub loss: f64,
    pub lambda: f64,
    pub resolved: Resolution,
}

#[derive(Clone, Debug)]
pub struct AosaReport {
    pub resolution: Resolution,
    pub resolved_at: Option<usize>,
    pub reinit_seed: Option<u64>,
    pub final_lambda: f64,
    pub trainer: Trainer,
}

/// Trains with the automatic objective until it resolves (or the budget runs
/// out), then optionally continues on the chosen objective.
pub fn run_aosa(
    task: &TaskSpec,
    schedule: &CoefficientSchedule,
    cfg: &AosaConfig,
    log: &mut dyn FnMut(AosaLogRow),
) -> Result<AosaReport> {
    let mcfg = MlpConfig { hidden: cfg.hidden, ..MlpConfig::new(task.data_dim, crate::predictors::Heads::Single) };
    let mut tr = Trainer::auto(mcfg, cfg.seed, cfg.learning_rate, cfg.lambda_learning_rate)?;
    tr.grad_clip = cfg.grad_clip;
    let mut stream = RandomStream::new(cfg.seed).derive(1);
    let mut after = 0;
    while tr.iteration < cfg.max_iterations {
        let undecided = tr.aosa.resolved == Resolution::Undecided;
        if !undecided {
            if after >= cfg.continue_after {
                break;
            }
            after += 1;
        }
        let batch = draw_batch(task, schedule, cfg.batch_size, &mut stream, undecided.then_some(cfg.max_conversion_gain))?;
        let rep = tr.step(&batch, schedule)?;
        log(AosaLogRow { iteration: tr.iteration, loss: rep.loss, lambda: tr.aosa.lambda, resolved: tr.aosa.resolved });
    }
    Ok(AosaReport {
        resolution: tr.aosa.resolved,
        resolved_at: tr.aosa.resolved_at,
        reinit_seed: tr.aosa.reinit_seed,
        final_lambda: tr.aosa.lambda,
        trainer: tr,
    })
}
