use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use e2f_core::config::RunConfig;
use e2f_core::zeroshot::Task;

mod commands;

#[derive(Parser)]
#[command(name = "e2f", version, about = "Event-to-frame toolkit: simulation, training, sampling, bound checks and metrics")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key; repeatable. Applied after the file and E2F_SEED.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded synthetic sequences (frames plus simulated events) to a dataset directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long, default_value_t = 16)]
        height: usize,
        #[arg(long, default_value_t = 16)]
        width: usize,
    },
    /// Simulate events from a frame tensor; `.txt`/`.csv` event paths use the text format.
    Simulate {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        events: PathBuf,
        /// Also write the stacked event volume.
        #[arg(long)]
        volume: Option<PathBuf>,
    },
    /// Stack an event file into a `frames x 3 x H x W` volume on a uniform timeline.
    Stack {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sensor width, for text input without a header.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Train the toy conditional denoiser on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct frames from events alone.
    Reconstruct(RunArgs),
    /// 4x interpolation between every fourth reference frame.
    Vfi4(RunArgs),
    /// Interpolation between the first and last frame.
    Vfi11(RunArgs),
    /// Prediction from the first frame.
    Vfp(RunArgs),
    /// Check the reconstruction error bound on seeded random instances.
    BoundCheck {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-frame MSE and SSIM of predicted against ground-truth frames.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration.
    Config {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Stacked event volume.
    #[arg(long)]
    volume: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Reference frames: either every frame of the sequence or just the
    /// task's reference frames in order.
    #[arg(long)]
    refs: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write one PGM/PPM per output frame into this directory.
    #[arg(long)]
    pnm: Option<PathBuf>,
    /// Write the latent after every sampling step into this directory.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl RunArgs {
    fn borrowed(&self) -> commands::RunArgs<'_> {
        commands::RunArgs {
            volume: &self.volume,
            model: &self.model,
            refs: self.refs.as_deref(),
            out: &self.out,
            pnm: self.pnm.as_deref(),
            trace: self.trace.as_deref(),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Ok(seed) = std::env::var("E2F_SEED") {
        cfg.set("seed", &seed).context("E2F_SEED")?;
    }
    for item in &cli.overrides {
        let Some((key, value)) = item.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {item:?}");
        };
        cfg.set(key.trim(), value.trim()).with_context(|| format!("--set {item}"))?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Synth { out, count, channels, height, width } => commands::synth(&cfg, &out, count, channels, height, width),
        Command::Simulate { frames, events, volume } => commands::simulate(&cfg, &frames, &events, volume.as_deref()),
        Command::Stack { events, out, width, height, duration } => commands::stack(&cfg, &events, &out, width, height, duration),
        Command::Train { data, out } => commands::train(&cfg, &data, &out),
        Command::Reconstruct(a) => commands::run(&cfg, None, &a.borrowed()),
        Command::Vfi4(a) => commands::run(&cfg, Some(Task::Vfi4x), &a.borrowed()),
        Command::Vfi11(a) => commands::run(&cfg, Some(Task::Vfi11x), &a.borrowed()),
        Command::Vfp(a) => commands::run(&cfg, Some(Task::Vfp), &a.borrowed()),
        Command::BoundCheck { instances, out } => commands::bound_check(&cfg, instances, out.as_deref()),
        Command::Eval { pred, truth, out } => commands::eval(&pred, &truth, out.as_deref()),
        Command::Config { out } => commands::write_or_print(out.as_deref(), &cfg.dump()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("e2f: error: {msg}");
            ExitCode::FAILURE
        }
    }
}
