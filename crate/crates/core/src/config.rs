//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key has a default, so an
//! empty file is a valid configuration; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::predictors::Outputs;
use crate::reverse::{PathMode, SamplingMethod, SamplingPlan};
use crate::schedules::{adjust_schedule, ddim_to_rddm, make_ddim_schedule, AdjustMode, CoefficientSchedule, DdimFamily, VarianceMode};
use crate::tasks::{Preset, TaskSpec};
use crate::training::{AosaConfig, LossConfig, Norm, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleFamily {
    Power,
    Ddim(DdimFamily),
}

impl FromStr for ScheduleFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Self::Power),
            other => match other.strip_prefix("ddim-") {
                Some(f) => Ok(Self::Ddim(f.parse()?)),
                None => Err(Error::InvalidArgument(format!("unknown schedule family `{other}`"))),
            },
        }
    }
}

impl fmt::Display for ScheduleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power => f.write_str("power"),
            Self::Ddim(d) => write!(f, "ddim-{d}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    Oracle,
    GroundTruth,
    Checkpoint,
}

impl FromStr for PredictorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "ground-truth" => Ok(Self::GroundTruth),
            "checkpoint" => Ok(Self::Checkpoint),
            other => Err(Error::InvalidArgument(format!("unknown predictor `{other}`"))),
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Oracle => "oracle",
            Self::GroundTruth => "ground-truth",
            Self::Checkpoint => "checkpoint",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Preset,
    pub total_steps: usize,
    pub schedule: ScheduleFamily,
    pub alpha_exponent: f64,
    pub beta_exponent: f64,
    /// `None` takes the task's default.
    pub beta_bar_t_sq: Option<f64>,
    pub eta: f64,
    pub variance_mode: VarianceMode,
    pub adjust: AdjustMode,
    pub adjust_exponent: f64,
    pub method: SamplingMethod,
    pub path_mode: PathMode,
    pub steps: usize,
    /// `None` starts sampling at `total_steps`.
    pub start_step: Option<usize>,
    pub samples: usize,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda_learning_rate: f64,
    pub grad_clip: Option<f64>,
    pub hidden: usize,
    pub loss: Norm,
    pub outputs: Outputs,
    pub max_conversion_gain: f64,
    pub predictor: PredictorKind,
    /// Residual network when `noise_checkpoint` is also given.
    pub checkpoint: Option<PathBuf>,
    pub noise_checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub trajectory: bool,
    pub pgm: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let aosa = AosaConfig::default();
        Self {
            task: Preset::Gaussian2d,
            total_steps: 1000,
            schedule: ScheduleFamily::Power,
            alpha_exponent: 1.0,
            beta_exponent: 1.0,
            beta_bar_t_sq: None,
            eta: 0.0,
            variance_mode: VarianceMode::Rddm,
            adjust: AdjustMode::None,
            adjust_exponent: 1.0,
            method: SamplingMethod::SmResN,
            path_mode: PathMode::Simultaneous,
            steps: 100,
            start_step: None,
            samples: 10_000,
            seed: 0,
            seeds: vec![0, 1, 2],
            iterations: aosa.max_iterations,
            batch_size: aosa.batch_size,
            learning_rate: aosa.learning_rate,
            lambda_learning_rate: aosa.lambda_learning_rate,
            grad_clip: aosa.grad_clip,
            hidden: aosa.hidden,
            loss: Norm::L2,
            outputs: Outputs::Both,
            max_conversion_gain: aosa.max_conversion_gain,
            predictor: PredictorKind::Oracle,
            checkpoint: None,
            noise_checkpoint: None,
            output_dir: PathBuf::from("out"),
            trajectory: false,
            pgm: false,
        }
    }
}

pub const KEYS: [&str; 32] = [
    "task",
    "total_steps",
    "schedule",
    "alpha_exponent",
    "beta_exponent",
    "beta_bar_t_sq",
    "eta",
    "variance_mode",
    "adjust",
    "adjust_exponent",
    "method",
    "path_mode",
    "steps",
    "start_step",
    "samples",
    "seed",
    "seeds",
    "iterations",
    "batch_size",
    "learning_rate",
    "lambda_learning_rate",
    "grad_clip",
    "hidden",
    "loss",
    "outputs",
    "max_conversion_gain",
    "predictor",
    "checkpoint",
    "noise_checkpoint",
    "output_dir",
    "trajectory",
    "pgm",
];

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), message: message.into() }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(key, format!("cannot parse `{v}`: {e}")))
}

fn optional<T: FromStr>(key: &str, v: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    if v == "none" { Ok(None) } else { value(key, v).map(Some) }
}

fn show<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(line, format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "task" => self.task = value(key, v)?,
            "total_steps" => self.total_steps = value(key, v)?,
            "schedule" => self.schedule = value(key, v)?,
            "alpha_exponent" => self.alpha_exponent = value(key, v)?,
            "beta_exponent" => self.beta_exponent = value(key, v)?,
            "beta_bar_t_sq" => self.beta_bar_t_sq = optional(key, v)?,
            "eta" => self.eta = value(key, v)?,
            "variance_mode" => self.variance_mode = value(key, v)?,
            "adjust" => self.adjust = value(key, v)?,
            "adjust_exponent" => self.adjust_exponent = value(key, v)?,
            "method" => self.method = value(key, v)?,
            "path_mode" => self.path_mode = value(key, v)?,
            "steps" => self.steps = value(key, v)?,
            "start_step" => self.start_step = optional(key, v)?,
            "samples" => self.samples = value(key, v)?,
            "seed" => self.seed = value(key, v)?,
            "seeds" => {
                self.seeds = v.split(',').map(|s| value(key, s.trim())).collect::<Result<_>>()?;
            }
            "iterations" => self.iterations = value(key, v)?,
            "batch_size" => self.batch_size = value(key, v)?,
            "learning_rate" => self.learning_rate = value(key, v)?,
            "lambda_learning_rate" => self.lambda_learning_rate = value(key, v)?,
            "grad_clip" => self.grad_clip = optional(key, v)?,
            "hidden" => self.hidden = value(key, v)?,
            "loss" => self.loss = value(key, v)?,
            "outputs" => self.outputs = value(key, v)?,
            "max_conversion_gain" => self.max_conversion_gain = value(key, v)?,
            "predictor" => self.predictor = value(key, v)?,
            "checkpoint" => self.checkpoint = optional(key, v)?,
            "noise_checkpoint" => self.noise_checkpoint = optional(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "trajectory" => self.trajectory = value(key, v)?,
            "pgm" => self.pgm = value(key, v)?,
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(bad(key, "must be positive")) };
        positive("alpha_exponent", self.alpha_exponent)?;
        positive("beta_exponent", self.beta_exponent)?;
        positive("adjust_exponent", self.adjust_exponent)?;
        positive("learning_rate", self.learning_rate)?;
        positive("lambda_learning_rate", self.lambda_learning_rate)?;
        positive("max_conversion_gain", self.max_conversion_gain)?;
        if let Some(b) = self.beta_bar_t_sq {
            positive("beta_bar_t_sq", b)?;
        }
        if let Some(c) = self.grad_clip {
            positive("grad_clip", c)?;
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(bad("eta", "must lie in [0, 1]"));
        }
        for (key, v) in [("total_steps", self.total_steps), ("steps", self.steps), ("samples", self.samples), ("batch_size", self.batch_size), ("hidden", self.hidden)] {
            if v == 0 {
                return Err(bad(key, "must be at least 1"));
            }
        }
        if self.steps > self.start() {
            return Err(bad("steps", format!("exceeds the start step {}", self.start())));
        }
        if let Some(s) = self.start_step {
            if s == 0 || s > self.total_steps {
                return Err(bad("start_step", format!("outside 1..={}", self.total_steps)));
            }
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds", "needs at least one seed"));
        }
        if self.predictor == PredictorKind::Checkpoint && self.checkpoint.is_none() {
            return Err(bad("checkpoint", "required when predictor = checkpoint"));
        }
        Ok(())
    }

    /// Every key with its value, in [`KEYS`] order.
    pub fn resolved_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let pairs: [(&str, String); 32] = [
            ("task", self.task.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("schedule", self.schedule.to_string()),
            ("alpha_exponent", self.alpha_exponent.to_string()),
            ("beta_exponent", self.beta_exponent.to_string()),
            ("beta_bar_t_sq", show(&self.beta_bar_t_sq)),
            ("eta", self.eta.to_string()),
            ("variance_mode", self.variance_mode.to_string()),
            ("adjust", self.adjust.to_string()),
            ("adjust_exponent", self.adjust_exponent.to_string()),
            ("method", self.method.to_string()),
            ("path_mode", self.path_mode.to_string()),
            ("steps", self.steps.to_string()),
            ("start_step", show(&self.start_step)),
            ("samples", self.samples.to_string()),
            ("seed", self.seed.to_string()),
            ("seeds", seeds.join(",")),
            ("iterations", self.iterations.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("lambda_learning_rate", self.lambda_learning_rate.to_string()),
            ("grad_clip", show(&self.grad_clip)),
            ("hidden", self.hidden.to_string()),
            ("loss", self.loss.to_string()),
            ("outputs", self.outputs.to_string()),
            ("max_conversion_gain", self.max_conversion_gain.to_string()),
            ("predictor", self.predictor.to_string()),
            ("checkpoint", show(&self.checkpoint.as_ref().map(|p| p.display()))),
            ("noise_checkpoint", show(&self.noise_checkpoint.as_ref().map(|p| p.display()))),
            ("output_dir", self.output_dir.display().to_string()),
            ("trajectory", self.trajectory.to_string()),
            ("pgm", self.pgm.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec::preset(self.task)
    }

    pub fn beta_bar_t_sq(&self) -> f64 {
        self.beta_bar_t_sq.unwrap_or_else(|| self.task_spec().beta_bar_t_sq)
    }

    pub fn start(&self) -> usize {
        self.start_step.unwrap_or(self.total_steps)
    }

    /// The configured family before any adjustment.
    pub fn base_schedule(&self) -> Result<CoefficientSchedule> {
        let s = match self.schedule {
            ScheduleFamily::Power => CoefficientSchedule::power(
                self.total_steps,
                self.alpha_exponent,
                self.beta_exponent,
                self.beta_bar_t_sq(),
                self.eta,
                self.variance_mode,
            ),
            ScheduleFamily::Ddim(f) => {
                if self.beta_bar_t_sq.is_some() {
                    return Err(bad("beta_bar_t_sq", "DDIM-derived schedules fix bbar_T^2 themselves"));
                }
                ddim_to_rddm(&make_ddim_schedule(self.total_steps, f)?, self.eta, self.variance_mode)
            }
        };
        s.map_err(|e| bad("schedule", e.to_string()))
    }

    pub fn schedule(&self) -> Result<CoefficientSchedule> {
        let s = self.base_schedule()?;
        if self.adjust == AdjustMode::None {
            return Ok(s);
        }
        adjust_schedule(&s, self.adjust, self.adjust_exponent).map_err(|e| bad("adjust", e.to_string()))
    }

    pub fn plan(&self) -> Result<SamplingPlan> {
        SamplingPlan::uniform_from(self.total_steps, self.start(), self.steps, self.eta, self.method, self.path_mode)
            .map_err(|e| bad("steps", e.to_string()))
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let loss = match self.outputs {
            Outputs::Residual => LossConfig::residual(self.loss),
            Outputs::Noise => LossConfig::noise(self.loss),
            Outputs::Both => LossConfig::both(self.loss),
        };
        Ok(TrainConfig {
            seed: self.seed,
            iterations: self.iterations,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            grad_clip: self.grad_clip,
            hidden: self.hidden,
            outputs: self.outputs,
            loss,
            time: None,
        })
    }

    pub fn aosa_config(&self, seed: u64) -> AosaConfig {
        AosaConfig {
            seed,
            max_iterations: self.iterations,
            continue_after: 0,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            lambda_learning_rate: self.lambda_learning_rate,
            grad_clip: self.grad_clip,
            hidden: self.hidden,
            max_conversion_gain: self.max_conversion_gain,
        }
    }

    /// `output_dir`, placed under `root` when it is relative.
    pub fn output_dir_under(&self, root: Option<&Path>) -> PathBuf {
        match root {
            Some(r) if self.output_dir.is_relative() => r.join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_names_the_key() {
        match RunConfig::parse("task = mixture-2d\nbogus = 3\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "bogus"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_family_names_the_key() {
        match RunConfig::parse("schedule = ddim-wavy") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "schedule"),
            other => panic!("{other:?}"),
        }
        match RunConfig::parse("alpha_exponent = -1") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "alpha_exponent"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolved_text_round_trips() {
        let cfg = RunConfig::parse(
            "task = shade-restore\nschedule = ddim-squared-cosine\neta = 0.3 # comment\nseeds = 4, 5\ngrad_clip = none\nlearning_rate = 3e-4\n",
        )
        .unwrap();
        let text = cfg.resolved_text();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back.resolved_text(), text);
        assert_eq!(back, cfg);
        assert_eq!(text.lines().count(), KEYS.len());
    }

    #[test]
    fn task_default_beta_bar() {
        let cfg = RunConfig::parse("task = shade-restore").unwrap();
        assert!((cfg.schedule().unwrap().beta_bar_t_sq() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn output_root_only_prefixes_relative_dirs() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.output_dir_under(Some(Path::new("/r"))), PathBuf::from("/r/out"));
        cfg.output_dir = PathBuf::from("/abs");
        assert_eq!(cfg.output_dir_under(Some(Path::new("/r"))), PathBuf::from("/abs"));
    }
}
