//! End-to-end orchestration: input ingestion, the two attack stages, report
//! emission, ablation sweeps, and the built-in self check.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{rmse, srocc, soft_srocc, MetricsReport, RBounds};
use crate::numerics::{finite_diff_grad, rng_uniform, AdamState, adam_step, Rng};
use crate::pnm;
use crate::report::{AttackReport, ReportRow, SCHEMA_VERSION};
use crate::scorer::{score, score_grad, score_set, ImageTensor, ScorerSpec};
use crate::soft_rank::{hard_rank, soft_rank, soft_rank_vjp};
use crate::stage_one::{optimize_targets, stage_one_grad, stage_one_objective, StageOneConfig};
use crate::stage_two::{attack_set, AttackConfig};

/// What the pipeline should do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    FullAttack,
    StageOneOnly,
    MetricsOnly,
    Ablation,
    SelfCheck,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::FullAttack => "full-attack",
            RunMode::StageOneOnly => "stage-one-only",
            RunMode::MetricsOnly => "metrics-only",
            RunMode::Ablation => "ablation",
            RunMode::SelfCheck => "selfcheck",
        }
    }
}

/// Exactly one source of inputs per run.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    /// Directory of binary portable pixmaps (`.pgm`/`.ppm`/`.pnm`).
    ImageDir(PathBuf),
    /// `id,score` CSV.
    ScoresFile(PathBuf),
    /// Seeded synthetic corpus: uniform-noise images (image modes) or
    /// uniform scores in [0, 100] (score-only modes).
    Synthetic {
        count: usize,
        height: usize,
        width: usize,
        channels: usize,
    },
}

/// Hyperparameter sweep for ablation mode.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepKind {
    /// Stage One per temperature; reports the soft/hard correlation gap.
    Beta(Vec<f64>),
    /// Full attack per error weight, dispersal weight fixed at zero.
    LambdaMse(Vec<f64>),
    /// Full attack per dispersal weight, error weight fixed at zero.
    LambdaVar(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: RunMode,
    pub input: InputSource,
    /// Second score vector for metrics-only mode.
    pub scores_after: Option<PathBuf>,
    pub scorer: ScorerSpec,
    pub stage_one: StageOneConfig,
    pub attack: AttackConfig,
    pub bounds: RBounds,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub sweep: Option<SweepKind>,
}

impl RunConfig {
    fn scorer_name(&self) -> &'static str {
        match self.scorer.kind {
            crate::scorer::ScorerKind::LinearMean => "linear-mean",
            crate::scorer::ScorerKind::FeatureAffine => "feature-affine",
        }
    }

    fn echo(&self) -> Vec<(String, String)> {
        let mut e = vec![
            ("mode".into(), self.mode.as_str().into()),
            ("scorer".into(), self.scorer_name().into()),
            ("beta".into(), self.stage_one.beta.to_string()),
            ("lambda_var".into(), self.stage_one.lambda_var.to_string()),
            ("lambda_mse".into(), self.stage_one.lambda_mse.to_string()),
            ("epochs".into(), self.stage_one.epochs.to_string()),
            ("learning_rate".into(), self.stage_one.learning_rate.to_string()),
            ("init_noise".into(), self.stage_one.init_noise.to_string()),
            ("epsilon".into(), self.attack.epsilon.to_string()),
            ("iterations".into(), self.attack.iterations.to_string()),
            ("step_size".into(), self.attack.step_size.to_string()),
            ("r_hi".into(), self.bounds.hi.to_string()),
            ("r_lo".into(), self.bounds.lo.to_string()),
        ];
        match self.stage_one.target_bounds {
            Some((lo, hi)) => e.push(("target_bounds".into(), format!("{lo}..{hi}"))),
            None => e.push(("target_bounds".into(), "none".into())),
        }
        e
    }
}

/// Files written by a run, in emission order, plus the summary text.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Load every `.pgm`/`.ppm`/`.pnm` file under `dir` in lexicographic
/// filename order. Ids are the file stems.
pub fn ingest_images(dir: &Path) -> Result<Vec<(String, ImageTensor)>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase());
        if path.is_file() && matches!(ext.as_deref(), Some("pgm" | "ppm" | "pnm")) {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no portable pixmap files (.pgm/.ppm/.pnm) in {dir:?}"
        )));
    }
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));

    let mut out = Vec::with_capacity(files.len());
    for path in files {
        let data = fs::read(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let img = pnm::decode(&path, &data)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push((id, img));
    }
    Ok(out)
}

/// Parse an `id,score` file, one record per line; blank lines are skipped.
pub fn ingest_scores(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut ids = Vec::new();
    let mut scores = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            file: path.to_path_buf(),
            location: format!("line {}", lineno + 1),
            message,
        };
        let (id, value) = line
            .split_once(',')
            .ok_or_else(|| parse_err("expected `id,score`".into()))?;
        let score: f64 = value
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("invalid score {value:?}")))?;
        if !score.is_finite() {
            return Err(parse_err(format!("non-finite score {score}")));
        }
        ids.push(id.trim().to_string());
        scores.push(score);
    }
    if scores.is_empty() {
        return Err(Error::Parse {
            file: path.to_path_buf(),
            location: "line 1".into(),
            message: "no records".into(),
        });
    }
    Ok((ids, scores))
}

fn synthetic_images(seed: u64, count: usize, height: usize, width: usize, channels: usize) -> Result<Vec<(String, ImageTensor)>> {
    if count == 0 {
        return Err(Error::InvalidArgument("synthetic corpus needs count >= 1".into()));
    }
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let pixels = rng_uniform(&mut rng, 0.0, 1.0, height * width * channels)?;
        out.push((format!("syn{k:04}"), ImageTensor::new(height, width, channels, pixels)?));
    }
    Ok(out)
}

fn synthetic_scores(seed: u64, count: usize) -> Result<(Vec<String>, Vec<f64>)> {
    if count == 0 {
        return Err(Error::InvalidArgument("synthetic corpus needs count >= 1".into()));
    }
    let mut rng = Rng::new(seed);
    let scores = rng_uniform(&mut rng, 0.0, 100.0, count)?;
    let ids = (0..count).map(|k| format!("syn{k:04}")).collect();
    Ok((ids, scores))
}

fn load_images(cfg: &RunConfig) -> Result<Vec<(String, ImageTensor)>> {
    match &cfg.input {
        InputSource::ImageDir(dir) => ingest_images(dir),
        InputSource::Synthetic {
            count,
            height,
            width,
            channels,
        } => synthetic_images(cfg.seed, *count, *height, *width, *channels),
        InputSource::ScoresFile(_) => Err(Error::InvalidArgument(
            "this mode needs images (a directory or a synthetic corpus), not a scores file".into(),
        )),
    }
}

fn load_scores(cfg: &RunConfig) -> Result<(Vec<String>, Vec<f64>)> {
    match &cfg.input {
        InputSource::ScoresFile(path) => ingest_scores(path),
        InputSource::Synthetic { count, .. } => synthetic_scores(cfg.seed, *count),
        InputSource::ImageDir(dir) => {
            let images = ingest_images(dir)?;
            let scores = score_set(&cfg.scorer, &images.iter().map(|(_, i)| i.clone()).collect::<Vec<_>>())?;
            Ok((images.into_iter().map(|(id, _)| id).collect(), scores))
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(())
}

/// Dispatch a configured run.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    match cfg.mode {
        RunMode::FullAttack => run_full_attack(cfg),
        RunMode::StageOneOnly => run_stage_one_only(cfg),
        RunMode::MetricsOnly => run_metrics_only(cfg),
        RunMode::Ablation => run_ablation(cfg),
        RunMode::SelfCheck => run_selfcheck(cfg),
    }
}

/// Score the originals, optimize targets, attack every image, and write the
/// report CSV, summary document, and score-change diagnostic.
pub fn run_full_attack(cfg: &RunConfig) -> Result<RunOutcome> {
    let named = load_images(cfg)?;
    let ids: Vec<String> = named.iter().map(|(id, _)| id.clone()).collect();
    let images: Vec<ImageTensor> = named.into_iter().map(|(_, img)| img).collect();

    let before = score_set(&cfg.scorer, &images)?;
    let (targets, _trace) = optimize_targets(&before, &cfg.stage_one)?;
    let (results, metrics) = attack_set(&cfg.scorer, &images, &targets, &cfg.attack, &cfg.bounds, cfg.jobs)?;

    let after: Vec<f64> = results.iter().map(|r| r.achieved_score).collect();
    let rank_before = hard_rank(&before)?;
    let rank_after = hard_rank(&after)?;

    let rows: Vec<ReportRow> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| ReportRow {
            id: id.clone(),
            orig_score: before[i],
            target_score: targets[i],
            adv_score: after[i],
            rank_before: rank_before[i],
            rank_after: rank_after[i],
            linf: results[i].linf_distance,
        })
        .collect();

    let report = AttackReport {
        seed: cfg.seed,
        config_echo: cfg.echo(),
        metrics,
        rows,
    };

    let mut files = Vec::new();
    write_file(&cfg.out_dir, "report.csv", &report.to_csv(), &mut files)?;
    let summary = report.to_summary();
    write_file(&cfg.out_dir, "summary.txt", &summary, &mut files)?;
    write_file(&cfg.out_dir, "diagnostic.csv", &report.to_diagnostic_csv(), &mut files)?;
    Ok(RunOutcome { files, summary })
}

/// Optimize targets for a score vector and write them with the diagnostic.
pub fn run_stage_one_only(cfg: &RunConfig) -> Result<RunOutcome> {
    let (ids, original) = load_scores(cfg)?;
    let (targets, _trace) = optimize_targets(&original, &cfg.stage_one)?;

    let mut csv = String::from("id,orig_score,target_score\n");
    for ((id, o), t) in ids.iter().zip(&original).zip(&targets) {
        csv.push_str(&format!("{id},{o},{t}\n"));
    }
    let mut diag = String::from("orig_score,abs_target_delta\n");
    for (o, t) in original.iter().zip(&targets) {
        diag.push_str(&format!("{o},{}\n", (t - o).abs()));
    }

    let mut summary = String::from("sma stage-one report\n");
    summary.push_str(&format!("schema_version: {SCHEMA_VERSION}\n"));
    summary.push_str(&format!("seed: {}\n", cfg.seed));
    for (k, v) in cfg.echo() {
        summary.push_str(&format!("{k}: {v}\n"));
    }
    summary.push_str(&format!("n_scores: {}\n", original.len()));
    summary.push_str(&format!("srocc_targets_vs_original: {}\n", srocc(&targets, &original)?));
    summary.push_str(&format!(
        "soft_srocc_targets_vs_original: {}\n",
        soft_srocc(&targets, &original, cfg.stage_one.beta)?
    ));
    summary.push_str(&format!("rmse_targets_vs_original: {}\n", rmse(&targets, &original)?));

    let mut files = Vec::new();
    write_file(&cfg.out_dir, "targets.csv", &csv, &mut files)?;
    write_file(&cfg.out_dir, "diagnostic.csv", &diag, &mut files)?;
    write_file(&cfg.out_dir, "summary.txt", &summary, &mut files)?;
    Ok(RunOutcome { files, summary })
}

/// Evaluate the metric suite between two score files.
pub fn run_metrics_only(cfg: &RunConfig) -> Result<RunOutcome> {
    let (_, before) = load_scores(cfg)?;
    let after_path = cfg.scores_after.as_ref().ok_or_else(|| {
        Error::InvalidArgument("metrics-only mode needs --scores-after".into())
    })?;
    let (_, after) = ingest_scores(after_path)?;
    let metrics = MetricsReport::compute(&before, &after, &cfg.bounds)?;

    let mut summary = String::from("sma metrics report\n");
    summary.push_str(&format!("schema_version: {SCHEMA_VERSION}\n"));
    summary.push_str(&format!("n_scores: {}\n", before.len()));
    summary.push_str("metrics:\n");
    summary.push_str(&format!("  srocc: {}\n", metrics.srocc));
    summary.push_str(&format!("  krocc: {}\n", metrics.krocc));
    summary.push_str(&format!("  plcc: {}\n", metrics.plcc));
    summary.push_str(&format!("  mse: {}\n", metrics.mse));
    summary.push_str(&format!("  rmse: {}\n", metrics.rmse));
    summary.push_str(&format!("  abs_gain: {}\n", metrics.abs_gain));
    summary.push_str(&format!("  r_metric: {}\n", metrics.r_metric));
    summary.push_str(&format!("  delta_rank: {}\n", metrics.delta_rank));

    let mut files = Vec::new();
    write_file(&cfg.out_dir, "summary.txt", &summary, &mut files)?;
    Ok(RunOutcome { files, summary })
}

/// One row of a hyperparameter sweep.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub value: f64,
    /// Surrogate-rank correlation between targets and originals.
    pub soft_srocc: f64,
    /// Hard correlation between targets and originals.
    pub srocc: f64,
    pub rmse_targets: f64,
    /// |soft - hard| correlation gap.
    pub approx_error: f64,
    /// Attack-side numbers; zero-filled for score-only (beta) sweeps.
    pub srocc_before_after: f64,
    pub rmse_before_after: f64,
    pub srocc_targets_achieved: f64,
}

/// Run the configured sweep and return its rows (also written as CSV).
pub fn run_ablation_rows(cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| {
        Error::InvalidArgument("ablation mode needs a sweep (--beta-sweep or --lambda-*-sweep)".into())
    })?;
    match sweep {
        SweepKind::Beta(values) => {
            if values.is_empty() {
                return Err(Error::InvalidArgument("empty beta sweep".into()));
            }
            let (_, original) = load_scores(cfg)?;
            let mut rows = Vec::with_capacity(values.len());
            for &beta in values {
                let mut stage = cfg.stage_one.clone();
                stage.beta = beta;
                let (targets, _) = optimize_targets(&original, &stage)?;
                let soft = soft_srocc(&targets, &original, beta)?;
                let hard = srocc(&targets, &original)?;
                rows.push(AblationRow {
                    value: beta,
                    soft_srocc: soft,
                    srocc: hard,
                    rmse_targets: rmse(&targets, &original)?,
                    approx_error: (soft - hard).abs(),
                    srocc_before_after: 0.0,
                    rmse_before_after: 0.0,
                    srocc_targets_achieved: 0.0,
                });
            }
            Ok(rows)
        }
        SweepKind::LambdaMse(values) | SweepKind::LambdaVar(values) => {
            if values.is_empty() {
                return Err(Error::InvalidArgument("empty lambda sweep".into()));
            }
            let sweep_is_mse = matches!(sweep, SweepKind::LambdaMse(_));
            let named = load_images(cfg)?;
            let images: Vec<ImageTensor> = named.into_iter().map(|(_, img)| img).collect();
            let before = score_set(&cfg.scorer, &images)?;

            let mut rows = Vec::with_capacity(values.len());
            for &lambda in values {
                let mut stage = cfg.stage_one.clone();
                if sweep_is_mse {
                    stage.lambda_mse = lambda;
                    stage.lambda_var = 0.0;
                } else {
                    stage.lambda_var = lambda;
                    stage.lambda_mse = 0.0;
                }
                let (targets, _) = optimize_targets(&before, &stage)?;
                let (results, report) =
                    attack_set(&cfg.scorer, &images, &targets, &cfg.attack, &cfg.bounds, cfg.jobs)?;
                let achieved: Vec<f64> = results.iter().map(|r| r.achieved_score).collect();
                let soft = soft_srocc(&targets, &before, stage.beta)?;
                let hard = srocc(&targets, &before)?;
                rows.push(AblationRow {
                    value: lambda,
                    soft_srocc: soft,
                    srocc: hard,
                    rmse_targets: rmse(&targets, &before)?,
                    approx_error: (soft - hard).abs(),
                    srocc_before_after: report.srocc,
                    rmse_before_after: report.rmse,
                    srocc_targets_achieved: srocc(&targets, &achieved)?,
                });
            }
            Ok(rows)
        }
    }
}

/// Sweep runner that also writes `ablation.csv` and a summary.
pub fn run_ablation(cfg: &RunConfig) -> Result<RunOutcome> {
    let rows = run_ablation_rows(cfg)?;
    let sweep_name = match cfg.sweep.as_ref().unwrap() {
        SweepKind::Beta(_) => "beta",
        SweepKind::LambdaMse(_) => "lambda_mse",
        SweepKind::LambdaVar(_) => "lambda_var",
    };

    let mut csv = String::from(
        "value,soft_srocc,srocc,rmse_targets,approx_error,srocc_before_after,rmse_before_after,srocc_targets_achieved\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.value,
            r.soft_srocc,
            r.srocc,
            r.rmse_targets,
            r.approx_error,
            r.srocc_before_after,
            r.rmse_before_after,
            r.srocc_targets_achieved
        ));
    }

    let mut summary = String::from("sma ablation report\n");
    summary.push_str(&format!("schema_version: {SCHEMA_VERSION}\n"));
    summary.push_str(&format!("seed: {}\n", cfg.seed));
    summary.push_str(&format!("sweep: {sweep_name}\n"));
    summary.push_str(&format!("rows: {}\n", rows.len()));
    for r in &rows {
        summary.push_str(&format!(
            "  {sweep_name}={}: soft_srocc={} srocc={} rmse={} error={}\n",
            r.value, r.soft_srocc, r.srocc, r.rmse_targets, r.approx_error
        ));
    }

    let mut files = Vec::new();
    write_file(&cfg.out_dir, "ablation.csv", &csv, &mut files)?;
    write_file(&cfg.out_dir, "summary.txt", &summary, &mut files)?;
    Ok(RunOutcome { files, summary })
}

/// One named self-check outcome.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fast internal verification: finite-difference gradient checks and
/// independent metric/rank oracles. Every check is deterministic.
pub fn selfcheck() -> Vec<CheckOutcome> {
    let mut out = Vec::new();

    // Adam drives a quadratic to its minimum.
    {
        let c = [1.0, -2.0];
        let mut x = vec![8.0, 5.0];
        let mut state = AdamState::new(2, 0.05);
        for _ in 0..20_000 {
            let g: Vec<f64> = x.iter().zip(&c).map(|(xi, ci)| 2.0 * (xi - ci)).collect();
            let (nx, ns) = adam_step(&x, &g, &state).unwrap();
            x = nx;
            state = ns;
        }
        let err = x.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.push(CheckOutcome {
            name: "adam-quadratic-convergence",
            passed: err < 1e-3,
            detail: format!("max |x - c| = {err:.2e}"),
        });
    }

    // Soft-rank vector-Jacobian product against central differences.
    {
        let mut rng = Rng::new(501);
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        while checked < 5 {
            let s = rng_uniform(&mut rng, 0.0, 2.0, 8).unwrap();
            let up = rng_uniform(&mut rng, -1.0, 1.0, 8).unwrap();
            let sig: Vec<_> = soft_rank(&s, 1.0).unwrap().blocks;
            let h = 1e-5;
            let mut stable = true;
            for i in 0..s.len() {
                for d in [h, -h] {
                    let mut p = s.clone();
                    p[i] += d;
                    if soft_rank(&p, 1.0).unwrap().blocks != sig {
                        stable = false;
                    }
                }
            }
            if !stable {
                continue;
            }
            let r = soft_rank(&s, 1.0).unwrap();
            let g = soft_rank_vjp(&r, &up).unwrap();
            let fd = finite_diff_grad(
                |x| {
                    soft_rank(x, 1.0)
                        .unwrap()
                        .values
                        .iter()
                        .zip(&up)
                        .map(|(v, u)| v * u)
                        .sum()
                },
                &s,
                h,
            )
            .unwrap();
            let num = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let den = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            worst = worst.max(num / den);
            checked += 1;
        }
        out.push(CheckOutcome {
            name: "soft-rank-vjp-vs-finite-diff",
            passed: worst < 1e-4,
            detail: format!("worst relative error {worst:.2e}"),
        });
    }

    // Stage-one gradient against central differences.
    {
        let mut rng = Rng::new(502);
        let cfg = StageOneConfig {
            epochs: 1,
            seed: 0,
            ..StageOneConfig::default()
        };
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        while checked < 5 {
            let original = rng_uniform(&mut rng, 0.0, 2.0, 8).unwrap();
            let candidate = rng_uniform(&mut rng, 0.0, 2.0, 8).unwrap();
            let sig = soft_rank(&candidate, cfg.beta).unwrap().blocks;
            let h = 1e-5;
            let mut stable = true;
            for i in 0..candidate.len() {
                for d in [h, -h] {
                    let mut p = candidate.clone();
                    p[i] += d;
                    if soft_rank(&p, cfg.beta).unwrap().blocks != sig {
                        stable = false;
                    }
                }
            }
            if !stable {
                continue;
            }
            let g = stage_one_grad(&candidate, &original, &cfg).unwrap();
            let fd = finite_diff_grad(
                |x| stage_one_objective(x, &original, &cfg).unwrap(),
                &candidate,
                h,
            )
            .unwrap();
            let num = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let den = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            worst = worst.max(num / den);
            checked += 1;
        }
        out.push(CheckOutcome {
            name: "stage-one-grad-vs-finite-diff",
            passed: worst < 1e-4,
            detail: format!("worst relative error {worst:.2e}"),
        });
    }

    // Scorer gradient against central differences (interior images).
    {
        let mut rng = Rng::new(503);
        let spec = ScorerSpec::feature_affine_default();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        'outer: while checked < 3 {
            let pixels = rng_uniform(&mut rng, 0.2, 0.8, 5 * 5 * 3).unwrap();
            for y in 0..5usize {
                for x in 0..5usize {
                    for c in 0..3usize {
                        let a = pixels[(y * 5 + x) * 3 + c];
                        if x + 1 < 5 && (a - pixels[(y * 5 + x + 1) * 3 + c]).abs() < 10.0 * h {
                            continue 'outer;
                        }
                        if y + 1 < 5 && (a - pixels[((y + 1) * 5 + x) * 3 + c]).abs() < 10.0 * h {
                            continue 'outer;
                        }
                    }
                }
            }
            let img = ImageTensor::new(5, 5, 3, pixels.clone()).unwrap();
            let g = score_grad(&spec, &img).unwrap();
            let fd = finite_diff_grad(
                |p| score(&spec, &ImageTensor::new(5, 5, 3, p.to_vec()).unwrap()).unwrap(),
                &pixels,
                h,
            )
            .unwrap();
            let num = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let den = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            worst = worst.max(num / den);
            checked += 1;
        }
        out.push(CheckOutcome {
            name: "score-grad-vs-finite-diff",
            passed: worst < 1e-4,
            detail: format!("worst relative error {worst:.2e}"),
        });
    }

    // Theorem regime: surrogate equals the hard rank below the minimum gap.
    {
        let mut rng = Rng::new(504);
        let mut worst: f64 = 0.0;
        for trial in 0..100 {
            let n = 2 + (trial % 20);
            let s = rng_uniform(&mut rng, 0.0, 100.0, n).unwrap();
            let mut sorted = s.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let gap = sorted.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
            if gap <= 1e-9 {
                continue;
            }
            let soft = soft_rank(&s, 0.9 * gap).unwrap();
            let hard = hard_rank(&s).unwrap();
            for (sv, hv) in soft.values.iter().zip(&hard) {
                worst = worst.max((sv - *hv as f64).abs());
            }
        }
        out.push(CheckOutcome {
            name: "soft-rank-exactness-below-min-gap",
            passed: worst < 1e-9,
            detail: format!("max deviation {worst:.2e}"),
        });
    }

    // Correlation metrics against independent oracles.
    {
        let mut rng = Rng::new(505);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let a = rng_uniform(&mut rng, 0.0, 100.0, 7).unwrap();
            let b = rng_uniform(&mut rng, 0.0, 100.0, 7).unwrap();
            // Spearman as Pearson of rank vectors.
            let ra: Vec<f64> = hard_rank(&a).unwrap().iter().map(|&r| r as f64).collect();
            let rb: Vec<f64> = hard_rank(&b).unwrap().iter().map(|&r| r as f64).collect();
            let oracle = crate::metrics::plcc(&ra, &rb).unwrap();
            worst = worst.max((srocc(&a, &b).unwrap() - oracle).abs());
            // Kendall by explicit pair cases.
            let mut net = 0i64;
            for i in 0..7 {
                for j in (i + 1)..7 {
                    if a[i] > a[j] && b[i] > b[j] || a[i] < a[j] && b[i] < b[j] {
                        net += 1;
                    } else if a[i] > a[j] && b[i] < b[j] || a[i] < a[j] && b[i] > b[j] {
                        net -= 1;
                    }
                }
            }
            let oracle_tau = net as f64 / 21.0;
            worst = worst.max((crate::metrics::krocc(&a, &b).unwrap() - oracle_tau).abs());
        }
        out.push(CheckOutcome {
            name: "correlation-oracles",
            passed: worst < 1e-10,
            detail: format!("max deviation {worst:.2e}"),
        });
    }

    out
}

fn run_selfcheck(cfg: &RunConfig) -> Result<RunOutcome> {
    let checks = selfcheck();
    let mut summary = String::from("sma selfcheck\n");
    let mut all_pass = true;
    for c in &checks {
        all_pass &= c.passed;
        summary.push_str(&format!(
            "{}: {} ({})\n",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        ));
    }
    let mut files = Vec::new();
    write_file(&cfg.out_dir, "selfcheck.txt", &summary, &mut files)?;
    if !all_pass {
        return Err(Error::Numeric(format!("selfcheck failed:\n{summary}")));
    }
    Ok(RunOutcome { files, summary })
}
