use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use superres_cli::config::{self, ExperimentKind, Overrides};
use superres_cli::experiments;

#[derive(Parser)]
#[command(
    name = "superres",
    about = "Point-source recovery experiments: demos, phase-transition sweeps, \
             mixture learning, and an exactness suite",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single seeded recovery demo (2-D by default); emits point sets and a report.
    Demo2d(CommonArgs),
    /// Success-rate grid over (separation, cutoff R) at fixed sample count.
    SweepCutoff(CommonArgs),
    /// Success-rate grid over (separation, sample count m) with R = 0.26/delta.
    SweepMeasurements(CommonArgs),
    /// Learn a spherical Gaussian mixture from samples drawn at a known separation.
    GmmDemo(CommonArgs),
    /// Noiseless exactness sweep over a (d, k, delta) grid.
    ExactnessSuite(CommonArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Demo2d(_) => ExperimentKind::Demo2d,
            Command::SweepCutoff(_) => ExperimentKind::SweepCutoff,
            Command::SweepMeasurements(_) => ExperimentKind::SweepMeasurements,
            Command::GmmDemo(_) => ExperimentKind::GmmDemo,
            Command::ExactnessSuite(_) => ExperimentKind::ExactnessSuite,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Demo2d(a)
            | Command::SweepCutoff(a)
            | Command::SweepMeasurements(a)
            | Command::GmmDemo(a)
            | Command::ExactnessSuite(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Ambient dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Number of sources (mixture components for gmm-demo).
    #[arg(long)]
    k: Option<usize>,
    /// Separation target; grid maximum for the sweeps.
    #[arg(long)]
    delta: Option<f64>,
    /// Measurement noise bound.
    #[arg(long = "eps-z")]
    eps_z: Option<f64>,
    /// Frequency cutoff; grid maximum for sweep-cutoff.
    #[arg(long = "R")]
    r: Option<f64>,
    /// Gaussian frequency count; grid maximum for sweep-measurements.
    #[arg(long)]
    m: Option<usize>,
    /// Trials per cell (instances for exactness-suite).
    #[arg(long)]
    trials: Option<usize>,
    /// Success threshold on the matched-error statistic.
    #[arg(long)]
    threshold: Option<f64>,
    /// Master seed; all per-trial randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (also settable via SUPERRES_OUT_DIR).
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Tensor slice count (2 or 3).
    #[arg(long)]
    slices: Option<usize>,
    /// Flat key=value settings file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            d: self.d,
            k: self.k,
            delta: self.delta,
            eps_z: self.eps_z,
            r: self.r,
            m: self.m,
            trials: self.trials,
            threshold: self.threshold,
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            slices: self.slices,
            sigma: None,
            n_samples: None,
        }
    }
}

fn run(cli: Cli) -> superres_core::Result<()> {
    let kind = cli.command.kind();
    let args = cli.command.args();
    let settings = config::resolve(kind, args.config.as_deref(), &args.overrides())?;

    match kind {
        ExperimentKind::Demo2d => {
            let out = experiments::run_demo2d(&settings)?;
            match (out.statistic, &out.pipeline_error) {
                (Some(stat), _) => println!(
                    "demo2d: statistic = {stat:.6} (threshold {}), success = {}",
                    settings.threshold, out.success
                ),
                (None, Some(err)) => {
                    println!("demo2d: pipeline failed, recorded in report: {err}")
                }
                (None, None) => println!("demo2d: no statistic produced"),
            }
            println!("points: {}", out.points_path.display());
            println!("report: {}", out.report_path.display());
        }
        ExperimentKind::SweepCutoff => {
            let out = experiments::run_sweep_cutoff(&settings)?;
            let mean_rate = out.cells.iter().map(|c| c.rate).sum::<f64>()
                / out.cells.len().max(1) as f64;
            println!(
                "sweep-cutoff: {} cells x {} trials, mean success rate {mean_rate:.3}",
                out.cells.len(),
                settings.trials
            );
            println!("csv: {}", out.csv_path.display());
            println!("heatmap: {}", out.svg_path.display());
            println!("report: {}", out.report_path.display());
        }
        ExperimentKind::SweepMeasurements => {
            let out = experiments::run_sweep_measurements(&settings)?;
            let thresholds: Vec<String> = out
                .threshold_m
                .iter()
                .map(|t| t.map(|m| m.to_string()).unwrap_or_else(|| "-".to_string()))
                .collect();
            println!(
                "sweep-measurements: {} cells x {} trials; 50% threshold m per column: [{}], cv = {}",
                out.cells.len(),
                settings.trials,
                thresholds.join(", "),
                out.threshold_cv
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_else(|| "-".to_string()),
            );
            println!("csv: {}", out.csv_path.display());
            println!("heatmap: {}", out.svg_path.display());
            println!("report: {}", out.report_path.display());
        }
        ExperimentKind::GmmDemo => {
            let out = experiments::run_gmm_demo(&settings)?;
            println!(
                "gmm-demo: mean coordinate error = {:.6} (threshold {}), success = {}, sigma = {}",
                out.mean_coord_error, settings.threshold, out.success, out.selected_sigma
            );
            println!("samples: {}", out.samples_path.display());
            println!("points: {}", out.points_path.display());
            println!("report: {}", out.report_path.display());
        }
        ExperimentKind::ExactnessSuite => {
            let out = experiments::run_exactness_suite(&settings)?;
            println!(
                "exactness-suite: {}/{} instances within {} (worst matched error {:.3e})",
                out.successes, out.instances, settings.threshold, out.worst_error
            );
            println!("csv: {}", out.csv_path.display());
            println!("report: {}", out.report_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
