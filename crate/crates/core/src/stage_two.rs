//! Targeted adversarial example generation: iterative sign-gradient descent
//! on the squared score error, inside an l_inf ball around the original
//! image and the valid pixel range.

use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, RBounds};
use crate::scorer::{score, score_grad, ImageTensor, ScorerSpec};

/// Attack budget and schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    /// l_inf perturbation bound on the [0, 1] pixel scale.
    pub epsilon: f64,
    /// Number of sign-gradient iterations.
    pub iterations: usize,
    /// Per-iteration step size.
    pub step_size: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.005,
            iterations: 10,
            step_size: 0.005,
        }
    }
}

impl AttackConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of attacking a single image.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub adversarial: ImageTensor,
    pub achieved_score: f64,
    pub target_score: f64,
    pub linf_distance: f64,
    /// Squared score error before each iteration and after the last one
    /// (`iterations + 1` entries). Not guaranteed monotone.
    pub loss_trace: Vec<f64>,
}

fn sign(v: f64) -> f64 {
    // sign(0) = 0: a stationary start stays put.
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Drive one image's predicted score toward `target` with iterated
/// sign-gradient steps, clamping each iterate into the epsilon ball around
/// the original and into [0, 1].
pub fn attack_image(
    spec: &ScorerSpec,
    img: &ImageTensor,
    target: f64,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    if !target.is_finite() {
        return Err(Error::Numeric(format!("attack target must be finite, got {target}")));
    }

    let mut current = img.clone();
    let mut loss_trace = Vec::with_capacity(cfg.iterations + 1);
    for iteration in 0..cfg.iterations {
        let predicted = score(spec, &current)?;
        loss_trace.push((predicted - target) * (predicted - target));

        // d/dI (f(I) - target)^2 = 2 (f(I) - target) * df/dI.
        let residual = 2.0 * (predicted - target);
        let grad = score_grad(spec, &current)?;
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "attack_image: non-finite gradient at iteration {iteration}, pixel {i}"
            )));
        }

        for (pix, (g, orig)) in current
            .pixels
            .iter_mut()
            .zip(grad.iter().zip(&img.pixels))
        {
            let stepped = *pix - cfg.step_size * sign(residual * g);
            // Epsilon ball around the original, then the valid pixel range.
            *pix = stepped
                .clamp(orig - cfg.epsilon, orig + cfg.epsilon)
                .clamp(0.0, 1.0);
        }
    }

    let achieved_score = score(spec, &current)?;
    loss_trace.push((achieved_score - target) * (achieved_score - target));
    let linf_distance = current.linf_distance(img)?;
    Ok(AttackResult {
        adversarial: current,
        achieved_score,
        target_score: target,
        linf_distance,
        loss_trace,
    })
}

/// Attack every image toward its target and evaluate the run.
///
/// Per-image attacks are independent; `jobs > 1` splits them across that many
/// threads with results gathered in input order, bit-identical to the
/// sequential path.
pub fn attack_set(
    spec: &ScorerSpec,
    images: &[ImageTensor],
    targets: &[f64],
    cfg: &AttackConfig,
    bounds: &RBounds,
    jobs: usize,
) -> Result<(Vec<AttackResult>, MetricsReport)> {
    if images.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: images.len(),
            actual: targets.len(),
        });
    }
    if images.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "attack_set requires N >= 2 images for the correlation report, got {}",
            images.len()
        )));
    }
    cfg.validate()?;

    let before: Vec<f64> = images.iter().map(|img| score(spec, img)).collect::<Result<_>>()?;

    let results: Vec<AttackResult> = if jobs <= 1 {
        images
            .iter()
            .zip(targets)
            .map(|(img, &t)| attack_image(spec, img, t, cfg))
            .collect::<Result<_>>()?
    } else {
        let chunk = images.len().div_ceil(jobs);
        let mut collected: Vec<Vec<Result<AttackResult>>> = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (imgs, tgts) in images.chunks(chunk).zip(targets.chunks(chunk)) {
                handles.push(scope.spawn(move || {
                    imgs.iter()
                        .zip(tgts)
                        .map(|(img, &t)| attack_image(spec, img, t, cfg))
                        .collect::<Vec<_>>()
                }));
            }
            for h in handles {
                collected.push(h.join().expect("attack worker panicked"));
            }
        });
        collected.into_iter().flatten().collect::<Result<_>>()?
    };

    let after: Vec<f64> = results.iter().map(|r| r.achieved_score).collect();
    let report = MetricsReport::compute(&before, &after, bounds)?;
    Ok((results, report))
}
