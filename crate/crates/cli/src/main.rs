use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rddm_cli::commands;
use rddm_cli::{exit_code, EXIT_CONFIG};
use rddm_core::config::RunConfig;
use rddm_core::error::{Error, Result};

/// Variable whose value prefixes relative output directories.
const OUTPUT_ROOT_VAR: &str = "RDDM_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "rddm", version, about = "Residual denoising diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides one configuration key; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build, convert, adjust and export coefficient schedules.
    Schedule(Common),
    /// Run the invariant suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Break the sampler on purpose; the DDIM-equivalence checks must fail.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Sample with an oracle, ground-truth or checkpointed predictor.
    Sample(Common),
    /// Train the MLP predictor.
    Train(Common),
    /// Train with automatic objective selection.
    Aosa(Common),
    /// Compare outputs across schedules and sampling paths.
    PathExperiment(Common),
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io(io) => Error::Config { key: "config".into(), message: format!("{}: {io}", p.display()) },
            other => other,
        })?,
        None => RunConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config { key: kv.clone(), message: "expected KEY=VALUE".into() })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.output_dir {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32> {
    let (common, inject_fault) = match &cli.command {
        Command::Verify { common, inject_fault } => (common, *inject_fault),
        Command::Schedule(c) | Command::Sample(c) | Command::Train(c) | Command::Aosa(c) | Command::PathExperiment(c) => (c, false),
    };
    let cfg = resolve(common)?;
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from);
    let out = cfg.output_dir_under(root.as_deref());
    let w = &mut std::io::stdout().lock();
    let status = match cli.command {
        Command::Schedule(_) => commands::cmd_schedule(&cfg, &out, w)?,
        Command::Verify { .. } => commands::cmd_verify(&cfg, inject_fault, &out, w)?,
        Command::Sample(_) => commands::cmd_sample(&cfg, &out, w)?,
        Command::Train(_) => commands::cmd_train(&cfg, &out, w)?,
        Command::Aosa(_) => commands::cmd_aosa(&cfg, &out, w)?,
        Command::PathExperiment(_) => commands::cmd_path_experiment(&cfg, &out, w)?,
    };
    Ok(status.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
