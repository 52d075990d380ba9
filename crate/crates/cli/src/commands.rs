use std::io::Write;
use std::path::Path;

use rddm_core::config::{PredictorKind, RunConfig};
use rddm_core::error::{Error, Result};
use rddm_core::io::{fmt_f64, load_checkpoint, pgm_bytes, samples_to_csv, save_checkpoint, schedule_to_csv, write_bytes, write_text, TrajectoryWriter};
use rddm_core::metrics::{energy_distance, moment_distance, mse_psnr};
use rddm_core::numerics::{RandomStream, Tensor};
use rddm_core::predictors::{GaussianOracle, GroundTruth, MlpPredictor, Outputs, PredictorSet};
use rddm_core::reverse::{sample_observed, PathMode};
use rddm_core::schedules::{adjust_schedule, rddm_to_ddim, AdjustMode, CoefficientSchedule, VarianceMode};
use rddm_core::tasks::{TaskMode, TaskSpec};
use rddm_core::training::{run_aosa, train};
use rddm_core::verify::{report_csv, run_all, VerifyOptions};

use crate::path_experiment;
use crate::Status;

pub const RESOLVED_CONFIG: &str = "config.resolved";

/// Rows used for energy distances, which cost `O(n^2)`.
pub const ENERGY_ROWS: usize = 2000;

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
}

fn head_rows(x: &Tensor, n: usize) -> Result<Tensor> {
    let n = n.min(x.rows());
    Tensor::new(vec![n, x.row_len()], x.data()[..n * x.row_len()].to_vec())
}

/// Writes the resolved configuration next to a command's outputs.
pub fn write_resolved(cfg: &RunConfig, out: &Path) -> Result<()> {
    write_text(&out.join(RESOLVED_CONFIG), &cfg.resolved_text())
}

/// Exports the configured schedule in both variance modes, its
/// alpha-adjusted form and, when it lies on the DDIM manifold, the DDIM view.
pub fn cmd_schedule(cfg: &RunConfig, out: &Path, w: &mut dyn Write) -> Result<Status> {
    write_resolved(cfg, out)?;
    let raw = cfg.base_schedule()?;
    for mode in [VarianceMode::Rddm, VarianceMode::Ddim] {
        let s = raw.clone().with_variance_mode(mode);
        write_text(&out.join(format!("schedule_{mode}.csv")), &schedule_to_csv(&s)?)?;
        let total = match s.total_variance() {
            Ok(v) => fmt_f64(v),
            Err(Error::Schedule(why)) => format!("undefined ({why})"),
            Err(e) => return Err(e),
        };
        writeln!(w, "sum sigma^2 ({mode}, eta={}) = {total}", cfg.eta).map_err(io_err)?;
    }
    writeln!(w, "bbar_T^2 = {}", fmt_f64(raw.beta_bar_t_sq())).map_err(io_err)?;
    let mode = if cfg.adjust == AdjustMode::None { AdjustMode::Alpha } else { cfg.adjust };
    let adjusted = adjust_schedule(&raw, mode, cfg.adjust_exponent)?;
    write_text(&out.join("schedule_adjusted.csv"), &schedule_to_csv(&adjusted)?)?;
    writeln!(w, "adjusted ({mode}, a={}): abar_T = {}", cfg.adjust_exponent, fmt_f64(adjusted.alpha_bar(adjusted.total_steps())?))
        .map_err(io_err)?;
    match rddm_to_ddim(&raw) {
        Ok(d) => {
            let rows = (0..=d.total_steps()).map(|t| Ok(vec![t.to_string(), fmt_f64(d.alpha_bar_at(t)?)])).collect::<Result<Vec<_>>>()?;
            write_text(&out.join("ddim_view.csv"), &csv_text(&["t", "alpha_bar_ddim"], rows)?)?;
            writeln!(w, "DDIM view written").map_err(io_err)?;
        }
        Err(Error::OffManifold { t, deviation }) => {
            writeln!(w, "no DDIM view: off the manifold at t={t} (deviation {deviation:e})").map_err(io_err)?;
        }
        Err(e) => return Err(e),
    }
    Ok(Status::Success)
}

pub fn cmd_verify(cfg: &RunConfig, inject_fault: bool, out: &Path, w: &mut dyn Write) -> Result<Status> {
    write_resolved(cfg, out)?;
    let rows = run_all(&VerifyOptions { seed: cfg.seed, inject_fault })?;
    write_text(&out.join("verify.csv"), &report_csv(&rows)?)?;
    for r in &rows {
        writeln!(w, "{} {} {:e} <= {:e}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.statistic, r.bound).map_err(io_err)?;
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    writeln!(w, "{} checks, {failed} failed", rows.len()).map_err(io_err)?;
    Ok(if failed == 0 { Status::Success } else { Status::CheckFailure })
}

/// Predictors a sampling command can run with.
pub enum Loaded {
    Oracle(GaussianOracle),
    Truth(GroundTruth),
    Network(MlpPredictor),
    Networks { residual: MlpPredictor, noise: MlpPredictor },
}

impl Loaded {
    /// Oracle and ground truth serve as both networks of a pair.
    pub fn set(&self, pair: bool) -> PredictorSet<'_> {
        match self {
            Self::Oracle(o) if pair => PredictorSet::Pair { residual: o, noise: o },
            Self::Oracle(o) => PredictorSet::Single(o),
            Self::Truth(g) if pair => PredictorSet::Pair { residual: g, noise: g },
            Self::Truth(g) => PredictorSet::Single(g),
            Self::Network(m) => PredictorSet::Single(m),
            Self::Networks { residual, noise } => PredictorSet::Pair { residual, noise },
        }
    }
}

fn load_network(path: &Path, key: &str) -> Result<MlpPredictor> {
    if !path.exists() {
        return Err(config_error(key, format!("checkpoint {} not found", path.display())));
    }
    load_checkpoint(path)
}

/// The starting state at `t0` and the predictors. Ground truth starts from
/// the exact forward marginal of the recorded `(I_res, eps)`; every other
/// predictor from `I_in + bbar_t0 * eps`.
pub fn prepare(cfg: &RunConfig, task: &TaskSpec, s: &CoefficientSchedule, i0: &Tensor, i_in: &Tensor, t0: usize) -> Result<(Tensor, Loaded)> {
    let eps = RandomStream::new(cfg.seed).derive(2).gaussian(i_in.shape())?;
    let mut init = i_in.lincomb(1.0, &eps, s.beta_bar(t0)?)?;
    let loaded = match cfg.predictor {
        PredictorKind::Oracle => {
            let p = task
                .gaussian_params()
                .ok_or_else(|| config_error("predictor", format!("no analytic oracle for task {}", cfg.task)))?;
            Loaded::Oracle(GaussianOracle::new(p))
        }
        PredictorKind::GroundTruth => {
            let res = i_in.sub(i0)?;
            init = init.lincomb(1.0, &res, s.alpha_bar(t0)? - 1.0)?;
            Loaded::Truth(GroundTruth::new(res, eps)?)
        }
        PredictorKind::Checkpoint => {
            let path = cfg.checkpoint.as_deref().ok_or_else(|| config_error("checkpoint", "required"))?;
            let first = load_network(path, "checkpoint")?;
            match &cfg.noise_checkpoint {
                None => Loaded::Network(first),
                Some(p) => {
                    let noise = load_network(p, "noise_checkpoint")?;
                    if first.outputs != Outputs::Residual || noise.outputs != Outputs::Noise {
                        return Err(config_error("noise_checkpoint", "a pair needs a residual and a noise network"));
                    }
                    Loaded::Networks { residual: first, noise }
                }
            }
        }
    };
    Ok((init, loaded))
}

pub fn cmd_sample(cfg: &RunConfig, out: &Path, w: &mut dyn Write) -> Result<Status> {
    write_resolved(cfg, out)?;
    let task = cfg.task_spec();
    let s = cfg.schedule()?;
    let plan = cfg.plan()?;
    let root = RandomStream::new(cfg.seed);
    let tri = task.make_dataset(cfg.samples, &mut root.derive(1))?;
    let (init, loaded) = prepare(cfg, &task, &s, &tri.i0, &tri.i_in, plan.start())?;
    let mut traj = TrajectoryWriter::new();
    let record = cfg.trajectory;
    let samples = sample_observed(
        &plan,
        loaded.set(plan.path_mode != PathMode::Simultaneous),
        &tri.i_in,
        init,
        &s,
        &mut root.derive(3),
        &mut |k, t, x| {
            if record {
                traj.record(k, t, x)
            }
        },
    )?;
    write_text(&out.join("samples.csv"), &samples_to_csv(&samples)?)?;
    if record {
        write_text(&out.join("trajectory.csv"), &traj.to_csv()?)?;
    }
    let mut metrics: Vec<(&str, f64)> = Vec::new();
    match task.mode {
        TaskMode::Generation => {
            let target = task.sample_targets(cfg.samples, &mut root.derive(4))?;
            metrics.push(("moment_distance", moment_distance(&samples, &target)?));
            metrics.push(("energy_distance", energy_distance(&head_rows(&samples, ENERGY_ROWS)?, &head_rows(&target, ENERGY_ROWS)?)?));
        }
        TaskMode::Restoration => {
            let (mse, psnr) = mse_psnr(&samples, &tri.i0)?;
            let (dmse, dpsnr) = mse_psnr(&tri.i_in, &tri.i0)?;
            metrics.extend([("mse", mse), ("psnr", psnr), ("degraded_mse", dmse), ("degraded_psnr", dpsnr)]);
        }
    }
    let rows = metrics.iter().map(|(k, v)| vec![k.to_string(), fmt_f64(*v)]);
    write_text(&out.join("metrics.csv"), &csv_text(&["metric", "value"], rows)?)?;
    for (k, v) in &metrics {
        writeln!(w, "{k} = {v}").map_err(io_err)?;
    }
    if let (true, Some(side)) = (cfg.pgm, task.image_side()) {
        for r in 0..samples.rows().min(4) {
            write_bytes(&out.join(format!("sample_{r}.pgm")), &pgm_bytes(samples.row(r), side)?)?;
            write_bytes(&out.join(format!("input_{r}.pgm")), &pgm_bytes(tri.i_in.row(r), side)?)?;
            write_bytes(&out.join(format!("target_{r}.pgm")), &pgm_bytes(tri.i0.row(r), side)?)?;
        }
    }
    Ok(Status::Success)
}

pub fn cmd_train(cfg: &RunConfig, out: &Path, w: &mut dyn Write) -> Result<Status> {
    write_resolved(cfg, out)?;
    let task = cfg.task_spec();
    let s = cfg.schedule()?;
    let mut log = Vec::new();
    let tr = train(&task, &s, &cfg.train_config()?, &mut |row| log.push(row))?;
    let rows = log.iter().map(|r| vec![r.iteration.to_string(), fmt_f64(r.loss)]);
    write_text(&out.join("train_log.csv"), &csv_text(&["iteration", "loss"], rows)?)?;
    save_checkpoint(&tr.predictor()?, &out.join("model.ckpt"))?;
    if let Some(last) = log.last() {
        writeln!(w, "iteration {}: loss {}", last.iteration, last.loss).map_err(io_err)?;
    }
    writeln!(w, "checkpoint written to {}", out.join("model.ckpt").display()).map_err(io_err)?;
    Ok(Status::Success)
}

pub fn cmd_aosa(cfg: &RunConfig, out: &Path, w: &mut dyn Write) -> Result<Status> {
    write_resolved(cfg, out)?;
    let task = cfg.task_spec();
    let s = cfg.schedule()?;
    let mut summary = Vec::new();
    for &seed in &cfg.seeds {
        let mut log = Vec::new();
        let rep = run_aosa(&task, &s, &cfg.aosa_config(seed), &mut |row| log.push(row))?;
        let rows = log.iter().map(|r| vec![r.iteration.to_string(), fmt_f64(r.loss), fmt_f64(r.lambda), r.resolved.to_string()]);
        write_text(&out.join(format!("aosa_log_seed{seed}.csv")), &csv_text(&["iteration", "loss", "lambda", "resolved"], rows)?)?;
        let at = rep.resolved_at.map_or_else(|| "none".to_string(), |i| i.to_string());
        let reinit = rep.reinit_seed.map_or_else(|| "none".to_string(), |i| i.to_string());
        writeln!(w, "seed {seed}: {} at iteration {at} (final lambda {})", rep.resolution, rep.final_lambda).map_err(io_err)?;
        summary.push(vec![seed.to_string(), rep.resolution.to_string(), at, reinit, fmt_f64(rep.final_lambda)]);
    }
    write_text(
        &out.join("aosa_summary.csv"),
        &csv_text(&["seed", "resolution", "resolved_at", "reinit_seed", "final_lambda"], summary)?,
    )?;
    Ok(Status::Success)
}

pub fn cmd_path_experiment(cfg: &RunConfig, out: &Path, w: &mut dyn Write) -> Result<Status> {
    write_resolved(cfg, out)?;
    let task = cfg.task_spec();
    let s = cfg.schedule()?;
    let tri = task.make_dataset(cfg.samples, &mut RandomStream::new(cfg.seed).derive(1))?;
    let (init, loaded) = prepare(cfg, &task, &s, &tri.i0, &tri.i_in, s.total_steps())?;
    let rep = path_experiment::run(loaded.set(true), &tri.i_in, &init, &s, cfg.steps, cfg.eta, cfg.seed)?;
    let mut rows = Vec::new();
    for v in &rep.variants {
        writeln!(w, "{}: energy {:e}, max |dev| {:e}, mean |dev| {:e}", v.name, v.energy_distance, v.max_abs_deviation, v.mean_abs_deviation)
            .map_err(io_err)?;
        rows.push(vec![v.name.clone(), fmt_f64(v.energy_distance), fmt_f64(v.max_abs_deviation), fmt_f64(v.mean_abs_deviation)]);
    }
    write_text(
        &out.join("path_experiment.csv"),
        &csv_text(&["variant", "energy_distance", "max_abs_deviation", "mean_abs_deviation"], rows)?,
    )?;
    let sens = [("residual_wrt_beta_bar", rep.residual_wrt_beta_bar), ("noise_wrt_alpha_bar", rep.noise_wrt_alpha_bar)];
    for (k, v) in sens {
        writeln!(w, "mean |{k}| = {v:e}").map_err(io_err)?;
    }
    let rows = sens.iter().map(|(k, v)| vec![k.to_string(), fmt_f64(*v)]);
    write_text(&out.join("path_sensitivities.csv"), &csv_text(&["sensitivity", "mean_abs"], rows)?)?;
    Ok(Status::Success)
}
