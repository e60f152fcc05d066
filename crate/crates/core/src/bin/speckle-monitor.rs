use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use speckle_monitor::dataset::Mode;
use speckle_monitor::harness::{self, HarnessConfig, Thresholds};

#[derive(Parser)]
#[command(name = "speckle-monitor", version, about = "Speckle-based laser process monitoring")]
struct Cli {
    /// TOML config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed` and `train.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML acceptance limits; a failed limit exits with status 2.
    #[arg(long, global = true)]
    threshold_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Groove,
    Drill,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Groove => Mode::Groove,
            ModeArg::Drill => Mode::Drill,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize groove and/or drill datasets.
    Synth,
    /// Train a model on a synthesized dataset.
    Train {
        #[arg(long, value_enum, default_value = "groove")]
        mode: ModeArg,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Continue from the existing checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a checkpoint on the validation split.
    Eval {
        #[arg(long, value_enum, default_value = "groove")]
        mode: ModeArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Measure single-triplet inference latency.
    Bench {
        #[arg(long, value_enum, default_value = "groove")]
        mode: ModeArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Timed iterations (at least 100).
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Predict from a JSON file of consecutive frames.
    Predict {
        #[arg(long, value_enum, default_value = "groove")]
        mode: ModeArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        frames: PathBuf,
    },
}

fn report_checks(checks: &[harness::Check]) -> bool {
    for c in checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {:.6} (limit {})", c.name, c.value, c.limit);
    }
    checks.iter().all(|c| c.pass)
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    let thresholds = cli.threshold_file.as_deref().map(Thresholds::load).transpose()?;

    match cli.command {
        Command::Synth => {
            for info in harness::cmd_synth(&cfg)? {
                println!("{}: {} runs, {} samples -> {} (sha256 {})", info.mode, info.runs, info.samples, info.path.display(), info.sha256);
            }
            Ok(true)
        }
        Command::Train { mode, dataset, resume } => {
            let s = harness::cmd_train(&cfg, mode.into(), dataset.as_deref(), resume)?;
            println!(
                "trained {} epochs on {} samples: loss {:.5} -> {:.5}; checkpoint {}",
                s.epochs,
                s.train_samples,
                s.initial_train_loss,
                s.final_train_loss,
                s.checkpoint.display()
            );
            Ok(true)
        }
        Command::Eval { mode, checkpoint, dataset } => {
            let (s, _) = harness::cmd_eval(&cfg, mode.into(), checkpoint.as_deref(), dataset.as_deref(), thresholds.as_ref())?;
            println!(
                "{}: MAE {:.4} {} (range {:.4}), R2 {}, accuracy {:.3}, median margin {}",
                s.mode,
                s.mae,
                s.target_unit,
                s.label_range,
                s.r2.map_or("n/a".into(), |v| format!("{v:.4}")),
                s.accuracy,
                s.median_margin.map_or("n/a".into(), |v| format!("{v:.3}"))
            );
            Ok(report_checks(&s.checks))
        }
        Command::Bench { mode, checkpoint, iterations } => {
            if let Some(n) = iterations {
                cfg.bench.iterations = n;
            }
            let s = harness::cmd_bench(&cfg, checkpoint.as_deref(), mode.into(), thresholds.as_ref())?;
            let l = &s.latency;
            println!("latency over {} runs: mean {:.3} ms, p50 {:.3} ms, p95 {:.3} ms ({})", l.iterations, l.mean_ms, l.p50_ms, l.p95_ms, l.hardware);
            Ok(report_checks(&s.checks))
        }
        Command::Predict { mode, checkpoint, frames } => {
            let text = harness::cmd_predict(&cfg, checkpoint.as_deref(), mode.into(), &frames)
                .with_context(|| format!("predicting from {}", frames.display()))?;
            print!("{text}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
