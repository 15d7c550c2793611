use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orient_cli::commands::{
    cmd_calibrate, cmd_eval, cmd_flips, cmd_gen, cmd_orient, cmd_sweep, cmd_train, CalibrateArgs,
    EvalArgs, OrientArgs, SweepArgs, TrainArgs,
};
use orient_cli::config::RunConfig;
use orient_core::error::{Error, Result};

#[derive(Parser)]
#[command(
    name = "orient",
    version,
    about = "Two-stage 3D orientation estimation that stays robust on symmetric shapes"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset of canonical shape clouds plus a manifest
    Gen {
        /// Run configuration JSON (defaults are used when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the configured seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override points per generated cloud
        #[arg(long)]
        points: Option<usize>,
        /// Dataset output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the orienter or the flipper on the train split
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Which model to train: orienter | flipper
        #[arg(long)]
        role: String,
        /// Dataset directory from `gen`
        #[arg(long)]
        dataset: PathBuf,
        /// Checkpoint output path (loss curve lands next to it)
        #[arg(long)]
        out: PathBuf,
        /// Continue from an existing checkpoint at `--out`
        #[arg(long)]
        resume: bool,
        /// Suppress progress lines
        #[arg(long)]
        quiet: bool,
    },
    /// Calibrate conformal flip prediction sets on the cal split
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured miscoverage level
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        orienter: PathBuf,
        #[arg(long)]
        flipper: PathBuf,
        /// Calibration output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Orient one mesh (.obj) or point cloud (.json / whitespace text)
    Orient {
        /// Input shape file
        input: PathBuf,
        #[arg(long)]
        orienter: PathBuf,
        #[arg(long)]
        flipper: PathBuf,
        /// Calibration file (required with --aps)
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Also write the ranked candidate set, one cloud per candidate
        #[arg(long)]
        aps: bool,
        /// Stage-1 augmentation draws
        #[arg(long, default_value_t = 8)]
        tta_k: usize,
        /// Surface samples when the input is a mesh
        #[arg(long, default_value_t = 512)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for transformed clouds and result.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate on the test split and write report.json + CSVs
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override stage-1 augmentation draws
        #[arg(long)]
        tta_k: Option<usize>,
        /// Override the up-axis accuracy threshold in degrees
        #[arg(long)]
        threshold_deg: Option<f64>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        orienter: PathBuf,
        #[arg(long)]
        flipper: PathBuf,
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Report output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep a full turn about one axis and record stage-1 behavior
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        orienter: PathBuf,
        /// Sweep CSV output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the canonical table of the 24 flips
    Flips {
        /// Write the table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Print to stdout, treating a closed pipe as an orderly exit instead of
/// a panic (`orient ... | head` must not crash).
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout();
    if out.write_all(text.as_bytes()).and_then(|()| out.flush()).is_err() {
        std::process::exit(0);
    }
}

fn emit_line(text: &str) {
    emit(&format!("{text}\n"));
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn mean_aps_size(hist: &[usize]) -> f64 {
    let n: usize = hist.iter().sum();
    if n == 0 {
        return 0.0;
    }
    hist.iter().enumerate().map(|(i, &c)| (i + 1) * c).sum::<usize>() as f64 / n as f64
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Gen { config, seed, points, out } => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(p) = points {
                cfg.dataset.points_per_cloud = p;
            }
            let manifest = cmd_gen(&cfg, &out)?;
            emit_line(&format!("dataset: {} shapes -> {}", manifest.shapes.len(), out.display()));
        }
        Cmd::Train { config, seed, role, dataset, out, resume, quiet } => {
            let cfg = load_config(&config, seed)?;
            let role = role.parse()?;
            let summary =
                cmd_train(&TrainArgs { cfg: &cfg, role, dataset_dir: &dataset, out: &out, resume, quiet })?;
            match summary.final_loss {
                Some(loss) => emit_line(&format!(
                    "trained {} steps ({} this run), final batch loss {loss:.4} -> {}",
                    summary.steps,
                    summary.steps_run,
                    summary.checkpoint.display()
                )),
                None => emit_line(&format!(
                    "checkpoint already at step {} -> {}",
                    summary.steps,
                    summary.checkpoint.display()
                )),
            }
        }
        Cmd::Calibrate { config, seed, alpha, dataset, orienter, flipper, out } => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            let (path, cal) = cmd_calibrate(&CalibrateArgs {
                cfg: &cfg,
                dataset_dir: &dataset,
                orienter: &orienter,
                flipper: &flipper,
                out: &out,
            })?;
            emit_line(&format!(
                "calibrated tau {:.6} (alpha {}, {} shapes) -> {}",
                cal.tau,
                cal.alpha,
                cal.n_cal,
                path.display()
            ));
        }
        Cmd::Orient { input, orienter, flipper, calibration, aps, tta_k, points, seed, out } => {
            let result = cmd_orient(&OrientArgs {
                input: &input,
                orienter: &orienter,
                flipper: &flipper,
                calibration: calibration.as_deref(),
                out_dir: out.as_deref(),
                aps,
                tta_k,
                points,
                seed,
            })?;
            emit_line(&serde_json::to_string_pretty(&result)?);
        }
        Cmd::Eval { config, seed, tta_k, threshold_deg, dataset, orienter, flipper, calibration, out } => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(k) = tta_k {
                cfg.pipeline.orient_tta_k = k;
            }
            if let Some(t) = threshold_deg {
                cfg.threshold_deg = t;
            }
            let outputs = cmd_eval(&EvalArgs {
                cfg: &cfg,
                dataset_dir: &dataset,
                orienter: &orienter,
                flipper: &flipper,
                calibration: calibration.as_deref(),
                out_dir: &out,
            })?;
            let r = &outputs.report;
            emit_line(&format!(
                "evaluated {} shapes: accuracy@{}deg {:.4}, chamfer mean {:.6}, mean APS size {:.2} -> {}",
                r.records.len(),
                r.threshold_deg,
                r.accuracy,
                r.chamfer_mean,
                mean_aps_size(&r.aps.size_histogram),
                outputs.report_path.display()
            ));
        }
        Cmd::Sweep { config, seed, orienter, out } => {
            let cfg = load_config(&config, seed)?;
            let (path, rows) =
                cmd_sweep(&SweepArgs { cfg: &cfg, orienter: &orienter, out: &out })?;
            emit_line(&format!("sweep: {} rows -> {}", rows.len(), path.display()));
        }
        Cmd::Flips { out } => {
            let text = cmd_flips(out.as_deref())?;
            match out {
                Some(path) => emit_line(&format!("flip table -> {}", path.display())),
                None => emit(&text),
            }
        }
    }
    Ok(())
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Structure(_) | Error::Io(_) | Error::Json(_) => 2,
        Error::Config(_) | Error::Mismatch(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
