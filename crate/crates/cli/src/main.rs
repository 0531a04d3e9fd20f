//! `dyspn`: synthetic scenes, propagation runs, checks, metrics and
//! benchmarks from the command line.
//!
//! Exit codes: 0 success, 1 validation or input error, 2 a check ran and
//! failed.

mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dyspn::synth::SceneKind;
use dyspn::{Precision, Variant};

#[derive(Parser, Debug)]
#[command(
    name = "dyspn",
    version,
    about = "Attention-modulated spatial propagation for depth completion"
)]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run N propagation steps on the inputs named in a run config.
    Propagate(PropagateArgs),
    /// Compare the fast kernel against the dense-matrix reference.
    OracleCheck(OracleArgs),
    /// Certify analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic scene and every input a propagation run needs.
    Synth(SynthArgs),
    /// Evaluate a prediction against ground truth.
    Eval(EvalArgs),
    /// Steps per second for each neighborhood variant.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct PropagateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out` next to the config).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Check the bundle of a run config instead of a random one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = Variant::Ring7x7)]
    variant: Variant,
    #[arg(long, default_value_t = 8)]
    size: usize,
    #[arg(long, default_value_t = 6)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Precision::F64)]
    precision: Precision,
    /// Absolute for f64; relative to max(|reference|, 1) for f32.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = Variant::Ring7x7)]
    variant: Variant,
    #[arg(long, default_value_t = 5)]
    size: usize,
    #[arg(long, default_value_t = 3)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = SceneKind::StepEdge)]
    scene: SceneKind,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of ground-truth pixels kept as sparse input.
    #[arg(long, default_value_t = 0.05)]
    sparsity: f64,
    #[arg(long, default_value_t = Variant::Ring7x7)]
    variant: Variant,
    #[arg(long, default_value_t = 6)]
    steps: usize,
    /// Affinity bandwidth (default: a tenth of the guidance range).
    #[arg(long)]
    sigma: Option<f64>,
    /// `far-decay` or `constant`.
    #[arg(long, default_value = "far-decay")]
    schedule: String,
    /// Edge modulation of the schedule (0 disables it).
    #[arg(long, default_value_t = 0.0)]
    edge_gain: f64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Prediction: depth PGM or an [H, W] tensor file (`.dyt`).
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth depth PGM (0 = missing).
    #[arg(long)]
    gt: PathBuf,
    /// Also write the CSV report to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 6)]
    steps: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only this variant (default: all three).
    #[arg(long)]
    variant: Option<Variant>,
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    };

    let result = pool.install(|| match cli.command {
        Command::Propagate(a) => commands::propagate(&a, cli.threads.is_some()),
        Command::OracleCheck(a) => commands::oracle_check(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
    });
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
