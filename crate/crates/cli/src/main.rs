//! `sma` — two-stage rank-correlation attack pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use sma_core::pipeline::{run, InputSource, RunConfig, RunMode, SweepKind};
use sma_core::{AttackConfig, RBounds, ScorerSpec, StageOneConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    FullAttack,
    StageOneOnly,
    MetricsOnly,
    Ablation,
    Selfcheck,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScorerArg {
    FeatureAffine,
    LinearMean,
}

/// Rank-correlation + score-error adversarial attack on quality scorers.
#[derive(Debug, Parser)]
#[command(name = "sma", version, about)]
struct Args {
    /// What to run.
    #[arg(long, value_enum, default_value = "full-attack")]
    mode: ModeArg,

    /// Directory of binary portable pixmaps (P5/P6).
    #[arg(long, group = "input")]
    images: Option<PathBuf>,

    /// `id,score` CSV of original scores.
    #[arg(long, group = "input")]
    scores: Option<PathBuf>,

    /// Generate a seeded synthetic corpus of this many items.
    #[arg(long, group = "input")]
    synthetic: Option<usize>,

    /// Synthetic image height.
    #[arg(long, default_value_t = 32)]
    height: usize,

    /// Synthetic image width.
    #[arg(long, default_value_t = 32)]
    width: usize,

    /// Synthetic image channels.
    #[arg(long, default_value_t = 3)]
    channels: usize,

    /// Second `id,score` CSV for metrics-only mode.
    #[arg(long)]
    scores_after: Option<PathBuf>,

    /// Toy scorer to attack.
    #[arg(long, value_enum, default_value = "feature-affine")]
    scorer: ScorerArg,

    /// Soft-rank temperature.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Dispersal reward weight.
    #[arg(long, default_value_t = 1e-4)]
    lambda_var: f64,

    /// Score-error reward weight.
    #[arg(long, default_value_t = 1e-4)]
    lambda_mse: f64,

    /// Stage-One optimization epochs.
    #[arg(long, default_value_t = 100_000)]
    epochs: usize,

    /// Stage-One Adam learning rate.
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,

    /// Stage-One init jitter scale.
    #[arg(long, default_value_t = 1e-3)]
    init_noise: f64,

    /// Clamp window for target scores, as `lo..hi`; `none` disables it.
    #[arg(long, default_value = "0..100")]
    target_bounds: String,

    /// l_inf pixel budget of the attack.
    #[arg(long, default_value_t = 0.005)]
    epsilon: f64,

    /// Attack iterations.
    #[arg(long, default_value_t = 10)]
    iterations: usize,

    /// Attack step size.
    #[arg(long, default_value_t = 0.005)]
    alpha: f64,

    /// Upper score anchor of the R metric.
    #[arg(long, default_value_t = 90.55)]
    r_hi: f64,

    /// Lower score anchor of the R metric.
    #[arg(long, default_value_t = 3.50)]
    r_lo: f64,

    /// Seed for synthetic data and Stage-One initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads for per-image attacks.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Comma-separated temperatures for a Stage-One ablation sweep.
    #[arg(long, group = "sweep")]
    beta_sweep: Option<String>,

    /// Comma-separated error weights for a full-attack sweep (dispersal off).
    #[arg(long, group = "sweep")]
    lambda_mse_sweep: Option<String>,

    /// Comma-separated dispersal weights for a full-attack sweep (error off).
    #[arg(long, group = "sweep")]
    lambda_var_sweep: Option<String>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_values(raw: &str) -> Result<Vec<f64>, String> {
    raw.split(',')
        .map(|tok| tok.trim().parse::<f64>().map_err(|_| format!("invalid number {tok:?}")))
        .collect()
}

fn parse_target_bounds(raw: &str) -> Result<Option<(f64, f64)>, String> {
    if raw.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let (lo, hi) = raw
        .split_once("..")
        .ok_or_else(|| format!("expected `lo..hi` or `none`, got {raw:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("invalid bound {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("invalid bound {hi:?}"))?;
    Ok(Some((lo, hi)))
}

fn build_config(args: &Args) -> Result<RunConfig, String> {
    let mode = match args.mode {
        ModeArg::FullAttack => RunMode::FullAttack,
        ModeArg::StageOneOnly => RunMode::StageOneOnly,
        ModeArg::MetricsOnly => RunMode::MetricsOnly,
        ModeArg::Ablation => RunMode::Ablation,
        ModeArg::Selfcheck => RunMode::SelfCheck,
    };

    let input = match (&args.images, &args.scores, args.synthetic) {
        (Some(dir), None, None) => InputSource::ImageDir(dir.clone()),
        (None, Some(path), None) => InputSource::ScoresFile(path.clone()),
        (None, None, Some(count)) => InputSource::Synthetic {
            count,
            height: args.height,
            width: args.width,
            channels: args.channels,
        },
        (None, None, None) => {
            if matches!(mode, RunMode::SelfCheck) {
                // selfcheck has no inputs; the placeholder is never read.
                InputSource::Synthetic {
                    count: 1,
                    height: 1,
                    width: 1,
                    channels: 1,
                }
            } else {
                return Err("exactly one input source is required: --images, --scores, or --synthetic".into());
            }
        }
        _ => return Err("exactly one input source is required: --images, --scores, or --synthetic".into()),
    };

    let scorer = match args.scorer {
        ScorerArg::FeatureAffine => ScorerSpec::feature_affine_default(),
        ScorerArg::LinearMean => ScorerSpec::linear_mean(100.0, 0.0),
    };

    let sweep = match (&args.beta_sweep, &args.lambda_mse_sweep, &args.lambda_var_sweep) {
        (Some(raw), None, None) => Some(SweepKind::Beta(parse_values(raw)?)),
        (None, Some(raw), None) => Some(SweepKind::LambdaMse(parse_values(raw)?)),
        (None, None, Some(raw)) => Some(SweepKind::LambdaVar(parse_values(raw)?)),
        (None, None, None) => None,
        _ => return Err("at most one sweep may be given".into()),
    };

    let stage_one = StageOneConfig {
        beta: args.beta,
        lambda_var: args.lambda_var,
        lambda_mse: args.lambda_mse,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        init_noise: args.init_noise,
        seed: args.seed,
        target_bounds: parse_target_bounds(&args.target_bounds)?,
    };
    let attack = AttackConfig {
        epsilon: args.epsilon,
        iterations: args.iterations,
        step_size: args.alpha,
    };
    let bounds = RBounds::new(args.r_hi, args.r_lo).map_err(|e| e.to_string())?;

    Ok(RunConfig {
        mode,
        input,
        scores_after: args.scores_after.clone(),
        scorer,
        stage_one,
        attack,
        bounds,
        out_dir: args.out.clone(),
        seed: args.seed,
        jobs: args.jobs.max(1),
        sweep,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match build_config(&args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
