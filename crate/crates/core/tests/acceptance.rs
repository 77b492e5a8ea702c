//! Acceptance suite: one test per shipping criterion, each printing a
//! pass/fail line through the harness. Oracles here are independent of the
//! implementation paths they check.

use std::time::Instant;

use sma_core::metrics::{krocc, plcc, rmse, soft_srocc, srocc, RBounds};
use sma_core::numerics::{finite_diff_grad, rng_uniform, Rng};
use sma_core::pipeline::{run_ablation_rows, run_full_attack, InputSource, RunConfig, RunMode, SweepKind};
use sma_core::scorer::{score, score_grad, score_set, ImageTensor, ScorerSpec};
use sma_core::soft_rank::{hard_rank, permutahedron_project, soft_rank, soft_rank_vjp};
use sma_core::stage_one::{optimize_targets, stage_one_grad, stage_one_objective, StageOneConfig};
use sma_core::stage_two::{attack_image, attack_set, AttackConfig};

// ---------------------------------------------------------------------------
// helpers

fn tie_free_scores(rng: &mut Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    loop {
        let s = rng_uniform(rng, lo, hi, n).unwrap();
        let mut sorted = s.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).all(|w| w[0] < w[1]) {
            return s;
        }
    }
}

fn min_adjacent_gap(s: &[f64]) -> f64 {
    let mut sorted = s.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min)
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    num / den
}

fn noise_images(seed: u64, count: usize, h: usize, w: usize, c: usize) -> Vec<ImageTensor> {
    let mut rng = Rng::new(seed);
    (0..count)
        .map(|_| ImageTensor::new(h, w, c, rng_uniform(&mut rng, 0.0, 1.0, h * w * c).unwrap()).unwrap())
        .collect()
}

// ---------------------------------------------------------------------------
// criterion 1: exactness of the rank surrogate below the minimum gap

#[test]
fn c01_soft_rank_exactness_below_min_gap() {
    let started = Instant::now();
    let mut rng = Rng::new(1001);
    let mut worst: f64 = 0.0;
    for trial in 0..1000usize {
        let n = 2 + trial % 49; // cycles N over 2..=50
        let s = tie_free_scores(&mut rng, 0.0, 100.0, n);
        let gap = min_adjacent_gap(&s);
        assert!(gap > 0.0);
        let beta = 0.9 * gap;
        let soft = soft_rank(&s, beta).unwrap();
        let hard = hard_rank(&s).unwrap();
        for (sv, hv) in soft.values.iter().zip(&hard) {
            worst = worst.max((sv - *hv as f64).abs());
        }
    }
    let elapsed = started.elapsed();
    assert!(worst < 1e-9, "max deviation {worst:e}");
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("c01: max soft/hard deviation {worst:e} over 1000 vectors in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// criterion 2: projection against a brute-force quadratic program
//
// The oracle projects onto the permutahedron described by its full facet
// system (one halfspace per proper subset of coordinates plus the sum
// hyperplane) with Dykstra's alternating-projection algorithm; it shares no
// code with the sort+isotonic implementation.

fn subset_cap(n: usize, k: usize) -> f64 {
    // Sum of the k largest weights N, N-1, ..., N-k+1.
    (0..k).map(|i| (n - i) as f64).sum()
}

fn dykstra_project(point: &[f64]) -> Vec<f64> {
    let n = point.len();
    let total = (n * (n + 1)) as f64 / 2.0;
    let masks: Vec<u32> = (1..((1u32 << n) - 1)).collect();
    let mut x = point.to_vec();
    let mut corrections = vec![vec![0.0; n]; masks.len() + 1];

    for _cycle in 0..200_000 {
        let mut moved: f64 = 0.0;

        // Equality constraint: coordinates sum to N(N+1)/2.
        let y: Vec<f64> = x.iter().zip(&corrections[0]).map(|(a, b)| a + b).collect();
        let shift = (y.iter().sum::<f64>() - total) / n as f64;
        for i in 0..n {
            let xi = y[i] - shift;
            corrections[0][i] = y[i] - xi;
            moved = moved.max((xi - x[i]).abs());
            x[i] = xi;
        }

        // Subset halfspaces: sum over S <= cap(|S|).
        for (slot, &mask) in masks.iter().enumerate() {
            let k = mask.count_ones() as usize;
            let cap = subset_cap(n, k);
            let y: Vec<f64> = x.iter().zip(&corrections[slot + 1]).map(|(a, b)| a + b).collect();
            let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| y[i]).sum();
            let excess = if s > cap { (s - cap) / k as f64 } else { 0.0 };
            for i in 0..n {
                let xi = if mask & (1 << i) != 0 { y[i] - excess } else { y[i] };
                corrections[slot + 1][i] = y[i] - xi;
                moved = moved.max((xi - x[i]).abs());
                x[i] = xi;
            }
        }

        if moved < 1e-13 {
            break;
        }
    }
    x
}

#[test]
fn c02_projection_matches_bruteforce_qp() {
    let started = Instant::now();
    let mut rng = Rng::new(1002);
    let mut worst: f64 = 0.0;
    for trial in 0..200usize {
        let n = 2 + trial % 3; // N in {2, 3, 4}
        let scale = 2.0 * n as f64;
        let z = rng_uniform(&mut rng, -scale, scale, n).unwrap();
        let (fast, _, _) = permutahedron_project(&z).unwrap();
        let oracle = dykstra_project(&z);
        for (a, b) in fast.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = started.elapsed();
    assert!(worst < 1e-8, "max deviation from QP oracle {worst:e}");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("c02: max projection deviation {worst:e} over 200 inputs in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// criterion 3: gradient checks against central finite differences

/// Accept a candidate only if its soft-rank block structure is identical at
/// every probe point the central difference will visit.
fn blocks_stable(s: &[f64], beta: f64, h: f64) -> bool {
    let sig = soft_rank(s, beta).unwrap().blocks;
    for i in 0..s.len() {
        for delta in [h, -h] {
            let mut probe = s.to_vec();
            probe[i] += delta;
            if soft_rank(&probe, beta).unwrap().blocks != sig {
                return false;
            }
        }
    }
    true
}

#[test]
fn c03_gradients_match_finite_differences() {
    let started = Instant::now();
    let h = 1e-5;
    let tol = 1e-4;

    // soft_rank_vjp
    let mut rng = Rng::new(1003);
    let mut worst_vjp: f64 = 0.0;
    let mut accepted = 0;
    while accepted < 100 {
        let s = rng_uniform(&mut rng, 0.0, 2.0, 10).unwrap();
        let upstream = rng_uniform(&mut rng, -1.0, 1.0, 10).unwrap();
        if !blocks_stable(&s, 1.0, h) {
            continue;
        }
        let result = soft_rank(&s, 1.0).unwrap();
        let got = soft_rank_vjp(&result, &upstream).unwrap();
        let want = finite_diff_grad(
            |x| {
                soft_rank(x, 1.0)
                    .unwrap()
                    .values
                    .iter()
                    .zip(&upstream)
                    .map(|(v, u)| v * u)
                    .sum()
            },
            &s,
            h,
        )
        .unwrap();
        worst_vjp = worst_vjp.max(rel_err(&got, &want));
        accepted += 1;
    }
    assert!(worst_vjp < tol, "soft_rank_vjp worst relative error {worst_vjp:e}");

    // stage_one_grad
    let cfg = StageOneConfig {
        epochs: 1,
        seed: 0,
        ..StageOneConfig::default()
    };
    let mut worst_stage: f64 = 0.0;
    accepted = 0;
    while accepted < 100 {
        let original = rng_uniform(&mut rng, 0.0, 2.0, 10).unwrap();
        let candidate = rng_uniform(&mut rng, 0.0, 2.0, 10).unwrap();
        if !blocks_stable(&candidate, cfg.beta, h) {
            continue;
        }
        let got = stage_one_grad(&candidate, &original, &cfg).unwrap();
        let want = finite_diff_grad(
            |x| stage_one_objective(x, &original, &cfg).unwrap(),
            &candidate,
            h,
        )
        .unwrap();
        worst_stage = worst_stage.max(rel_err(&got, &want));
        accepted += 1;
    }
    assert!(worst_stage < tol, "stage_one_grad worst relative error {worst_stage:e}");

    // score_grad: interior pixels away from absolute-difference kinks.
    let spec = ScorerSpec::feature_affine_default();
    let mut worst_score: f64 = 0.0;
    accepted = 0;
    'outer: while accepted < 100 {
        let pixels = rng_uniform(&mut rng, 0.2, 0.8, 5 * 5 * 3).unwrap();
        let at = |y: usize, x: usize, c: usize| pixels[(y * 5 + x) * 3 + c];
        for y in 0..5 {
            for x in 0..5 {
                for c in 0..3 {
                    if x + 1 < 5 && (at(y, x, c) - at(y, x + 1, c)).abs() < 10.0 * h {
                        continue 'outer;
                    }
                    if y + 1 < 5 && (at(y, x, c) - at(y + 1, x, c)).abs() < 10.0 * h {
                        continue 'outer;
                    }
                }
            }
        }
        let img = ImageTensor::new(5, 5, 3, pixels.clone()).unwrap();
        let got = score_grad(&spec, &img).unwrap();
        let want = finite_diff_grad(
            |p| score(&spec, &ImageTensor::new(5, 5, 3, p.to_vec()).unwrap()).unwrap(),
            &pixels,
            h,
        )
        .unwrap();
        worst_score = worst_score.max(rel_err(&got, &want));
        accepted += 1;
    }
    assert!(worst_score < tol, "score_grad worst relative error {worst_score:e}");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "c03: worst relative errors vjp={worst_vjp:e} stage_one={worst_stage:e} \
         score={worst_score:e} in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// criterion 4: near-tie worked example

#[test]
fn c04_near_tie_worked_example() {
    let reference = [3.0, 2.0, 1.0];
    assert_eq!(srocc(&[5.00, 4.99, 4.98], &reference).unwrap(), 1.0);
    assert_eq!(srocc(&[4.99, 5.00, 5.01], &reference).unwrap(), -1.0);
    let r = rmse(&[5.00, 4.99, 4.98], &[4.99, 5.00, 5.01]).unwrap();
    assert!(r < 0.03, "rmse {r}");
    println!("c04: srocc +1/-1 exact, rmse {r:.4} < 0.03");
}

// ---------------------------------------------------------------------------
// criterion 5: correlation metrics against brute-force oracles

fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    // Pearson correlation of the descending rank vectors.
    let ra: Vec<f64> = hard_rank(a).unwrap().iter().map(|&r| r as f64).collect();
    let rb: Vec<f64> = hard_rank(b).unwrap().iter().map(|&r| r as f64).collect();
    plcc(&ra, &rb).unwrap()
}

fn kendall_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut net = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            if a[i] > a[j] && b[i] > b[j] || a[i] < a[j] && b[i] < b[j] {
                net += 1;
            } else if a[i] > a[j] && b[i] < b[j] || a[i] < a[j] && b[i] > b[j] {
                net -= 1;
            }
        }
    }
    net as f64 / (n * (n - 1) / 2) as f64
}

fn permutations(n: usize) -> Vec<Vec<f64>> {
    let mut items: Vec<f64> = (1..=n).map(|v| v as f64).collect();
    let mut out = Vec::new();
    heap_permute(&mut items, n, &mut out);
    out
}

fn heap_permute(items: &mut Vec<f64>, k: usize, out: &mut Vec<Vec<f64>>) {
    if k <= 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k.is_multiple_of(2) {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

#[test]
fn c05_metrics_match_bruteforce_oracles() {
    let mut worst: f64 = 0.0;
    for n in 2..=6usize {
        let perms = permutations(n);
        for a in &perms {
            for b in &perms {
                worst = worst.max((srocc(a, b).unwrap() - spearman_oracle(a, b)).abs());
                worst = worst.max((krocc(a, b).unwrap() - kendall_oracle(a, b)).abs());
            }
        }
    }
    let mut rng = Rng::new(1005);
    for trial in 0..500usize {
        let n = 2 + trial % 9;
        let a = tie_free_scores(&mut rng, 0.0, 100.0, n);
        let b = tie_free_scores(&mut rng, 0.0, 100.0, n);
        worst = worst.max((srocc(&a, &b).unwrap() - spearman_oracle(&a, &b)).abs());
        worst = worst.max((krocc(&a, &b).unwrap() - kendall_oracle(&a, &b)).abs());
    }
    assert!(worst <= 1e-12, "worst oracle deviation {worst:e}");
    println!("c05: worst srocc/krocc oracle deviation {worst:e}");
}

// ---------------------------------------------------------------------------
// criterion 6: desk-scale target optimization

#[test]
fn c06_stage_one_desk_scale_replication() {
    let started = Instant::now();
    let mut rng = Rng::new(7);
    let original = rng_uniform(&mut rng, 0.0, 100.0, 232).unwrap();
    let cfg = StageOneConfig {
        beta: 1.0,
        lambda_var: 1e-4,
        lambda_mse: 1e-4,
        epochs: 50_000,
        seed: 1,
        ..StageOneConfig::default()
    };
    let (targets, _) = optimize_targets(&original, &cfg).unwrap();
    let s = srocc(&targets, &original).unwrap();
    let r = rmse(&targets, &original).unwrap();
    let elapsed = started.elapsed();
    assert!(s <= -0.7, "srocc(s*, s) = {s}, need <= -0.7");
    assert!(r >= 40.0, "rmse(s*, s) = {r}, need >= 40");
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!("c06: srocc {s:.4} <= -0.7, rmse {r:.2} >= 40 in {elapsed:?}");
}

/// The approximation-error half of the desk-scale criterion: the soft/hard
/// correlation gap must stay below 0.1 at every sweep temperature.
///
/// Known red at beta = 1.0: the optimizer's clamp-saturated optimum carries
/// exact score ties at the window bounds, where the pooled rank surrogate
/// averages each tie run while the hard rank breaks it by index. That gap is
/// 6/(N(N^2-1)) * sum over tie runs of k(k^2-1)/6, about 0.13 for two piles
/// of ~116, and no learning rate or seed removes it: a saturated optimum and
/// a sub-0.1 gap at beta = 1.0 are mutually exclusive under index tie
/// handling. Temperatures at or below 0.8 resolve the piles and pass.
#[test]
fn c06_beta_sweep_approximation_error() {
    let started = Instant::now();
    let mut rng = Rng::new(7);
    let original = rng_uniform(&mut rng, 0.0, 100.0, 232).unwrap();
    let mut lines = Vec::new();
    let mut worst: f64 = 0.0;
    for beta in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let cfg = StageOneConfig {
            beta,
            lambda_var: 1e-4,
            lambda_mse: 1e-4,
            epochs: 50_000,
            seed: 1,
            ..StageOneConfig::default()
        };
        let (targets, _) = optimize_targets(&original, &cfg).unwrap();
        let soft = soft_srocc(&targets, &original, beta).unwrap();
        let hard = srocc(&targets, &original).unwrap();
        let err = (soft - hard).abs();
        worst = worst.max(err);
        lines.push(format!("beta={beta}: soft={soft:.4} hard={hard:.4} err={err:.4}"));
    }
    let elapsed = started.elapsed();
    println!("c06 sweep ({elapsed:?}):");
    for l in &lines {
        println!("  {l}");
    }
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    assert!(
        worst < 0.1,
        "max soft/hard correlation gap {worst:.4} >= 0.1 across the sweep \
         (structural at beta=1.0 for clamp-saturated optima; see test doc)\n{}",
        lines.join("\n")
    );
}

// ---------------------------------------------------------------------------
// criterion 7: end-to-end attack on a synthetic corpus

#[test]
fn c07_end_to_end_attack() {
    let started = Instant::now();
    let images = noise_images(42, 64, 32, 32, 3);
    let spec = ScorerSpec::feature_affine_default();
    let stage_one = StageOneConfig {
        epochs: 50_000,
        seed: 42,
        ..StageOneConfig::default()
    };
    let attack = AttackConfig::default();

    let before = score_set(&spec, &images).unwrap();
    let (targets, _) = optimize_targets(&before, &stage_one).unwrap();
    let (results, report) =
        attack_set(&spec, &images, &targets, &attack, &RBounds::default(), 2).unwrap();

    for r in &results {
        assert!(
            r.linf_distance <= attack.epsilon + 1e-12,
            "linf {} beyond budget",
            r.linf_distance
        );
        assert!(r.adversarial.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    }
    let elapsed = started.elapsed();
    assert!(report.srocc < 0.0, "srocc(before, after) = {}", report.srocc);
    assert!(
        report.delta_rank >= 64.0 / 4.0,
        "delta_rank = {}, need >= 16",
        report.delta_rank
    );
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "c07: srocc {:.4} < 0, delta_rank {:.2} >= 16, all constraints held, in {elapsed:?}",
        report.srocc, report.delta_rank
    );
}

// ---------------------------------------------------------------------------
// criterion 8: closed-form displacement on the mean scorer

#[test]
fn c08_linear_scorer_closed_form() {
    let spec = ScorerSpec::linear_mean(100.0, 0.0);
    let img = ImageTensor::new(16, 16, 1, vec![0.5; 256]).unwrap();
    let start = score(&spec, &img).unwrap();

    for (eps, m, alpha) in [
        (0.005, 10usize, 0.005),  // budget-capped: m*alpha > eps
        (0.005, 10, 0.0004),      // step-capped: m*alpha <= eps
        (0.02, 4, 0.003),         // step-capped again
    ] {
        let cfg = AttackConfig {
            epsilon: eps,
            iterations: m,
            step_size: alpha,
        };
        let expect = 100.0 * (m as f64 * alpha).min(eps);
        let up = attack_image(&spec, &img, 95.0, &cfg).unwrap();
        assert!(
            (up.achieved_score - start - expect).abs() < 1e-9,
            "eps={eps} m={m} alpha={alpha}: got {} want {}",
            up.achieved_score - start,
            expect
        );
        let down = attack_image(&spec, &img, 5.0, &cfg).unwrap();
        assert!((start - down.achieved_score - expect).abs() < 1e-9);
    }
    println!("c08: closed-form displacement exact to 1e-9 in all regimes");
}

// ---------------------------------------------------------------------------
// criterion 9: ablation monotonicity
//
// The ablation attack uses a larger pixel budget than the headline attack so
// the achieved scores can track targets spread over tens of points; the toy
// scorer moves ~260 points per unit of pixel change, far less than a deep
// model, and at the headline epsilon every sweep cell saturates identically.

fn ablation_config(sweep: SweepKind) -> RunConfig {
    RunConfig {
        mode: RunMode::Ablation,
        input: InputSource::Synthetic {
            count: 64,
            height: 32,
            width: 32,
            channels: 3,
        },
        scores_after: None,
        scorer: ScorerSpec::feature_affine_default(),
        stage_one: StageOneConfig {
            epochs: 30_000,
            seed: 42,
            ..StageOneConfig::default()
        },
        attack: AttackConfig {
            epsilon: 0.4,
            iterations: 10,
            step_size: 0.08,
        },
        bounds: RBounds::default(),
        out_dir: std::env::temp_dir().join("sma-acceptance-ablation"),
        seed: 42,
        jobs: 2,
        sweep: Some(sweep),
    }
}

#[test]
fn c09_ablation_monotonicity() {
    // Error-weight sweep, dispersal off: attack-side rmse non-decreasing.
    let cfg = ablation_config(SweepKind::LambdaMse(vec![1e-5, 1e-3, 1e-1]));
    let rows = run_ablation_rows(&cfg).unwrap();
    let rmse_ba: Vec<f64> = rows.iter().map(|r| r.rmse_before_after).collect();
    for w in rmse_ba.windows(2) {
        assert!(
            w[1] >= w[0],
            "rmse(before, after) not non-decreasing over the error-weight sweep: {rmse_ba:?}"
        );
    }

    // Dispersal-weight sweep, error off: target/achieved correlation trend
    // between the smallest and largest weight is non-decreasing.
    let cfg = ablation_config(SweepKind::LambdaVar(vec![1e-6, 1e-5, 1e-4]));
    let rows = run_ablation_rows(&cfg).unwrap();
    let consistency: Vec<f64> = rows.iter().map(|r| r.srocc_targets_achieved).collect();
    assert!(
        consistency.last().unwrap() >= consistency.first().unwrap(),
        "srocc(targets, achieved) trend decreased over the dispersal-weight sweep: {consistency:?}"
    );
    println!(
        "c09: rmse(before,after) over error sweep {rmse_ba:?}; \
         srocc(targets,achieved) over dispersal sweep {consistency:?}"
    );
}

// ---------------------------------------------------------------------------
// criterion 10: byte-identical reports under a fixed seed

#[test]
fn c10_pipeline_determinism() {
    let base_out = std::env::temp_dir().join(format!("sma-acceptance-det-{}", std::process::id()));
    let mk = |tag: &str| RunConfig {
        mode: RunMode::FullAttack,
        input: InputSource::Synthetic {
            count: 64,
            height: 32,
            width: 32,
            channels: 3,
        },
        scores_after: None,
        scorer: ScorerSpec::feature_affine_default(),
        stage_one: StageOneConfig {
            epochs: 20_000,
            seed: 42,
            ..StageOneConfig::default()
        },
        attack: AttackConfig::default(),
        bounds: RBounds::default(),
        out_dir: base_out.join(tag),
        seed: 42,
        jobs: 2,
        sweep: None,
    };

    let a = run_full_attack(&mk("a")).unwrap();
    let b = run_full_attack(&mk("b")).unwrap();
    assert_eq!(a.files.len(), 3);
    for (fa, fb) in a.files.iter().zip(&b.files) {
        let ba = std::fs::read(fa).unwrap();
        let bb = std::fs::read(fb).unwrap();
        assert_eq!(ba, bb, "payloads differ: {fa:?} vs {fb:?}");
    }
    println!("c10: report.csv, summary.txt, diagnostic.csv byte-identical across reruns");
}
