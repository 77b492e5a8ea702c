//! Score-regression model interface: deterministic toy scorers with analytic
//! pixel gradients and final-layer score clipping. Any real model adapter
//! must provide the same `score` / `score_grad` contract.

use crate::error::{Error, Result};

/// An image as a flat `[0, 1]` pixel array, laid out row-major with
/// interleaved channels: `pixels[(y * width + x) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::DimensionMismatch {
                expected: height * width * channels,
                actual: pixels.len(),
            });
        }
        if let Some(i) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(format!(
                "pixel {i} out of [0, 1]: {}",
                pixels[i]
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Largest absolute per-pixel deviation from `other`.
    pub fn linf_distance(&self, other: &ImageTensor) -> Result<f64> {
        if self.pixels.len() != other.pixels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.pixels.len(),
                actual: other.pixels.len(),
            });
        }
        Ok(self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Functional form of a toy scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    /// `c0 * mean(pixels) + bias`.
    LinearMean,
    /// Affine map of `[mean, std, mean |horizontal diff|, mean |vertical diff|]`.
    FeatureAffine,
}

/// A concrete scorer: raw response clipped into `[clip_lo, clip_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub clip_lo: f64,
    pub clip_hi: f64,
}

impl ScorerSpec {
    pub fn linear_mean(c0: f64, bias: f64) -> Self {
        Self {
            kind: ScorerKind::LinearMean,
            coefficients: vec![c0],
            bias,
            clip_lo: 0.0,
            clip_hi: 100.0,
        }
    }

    /// Default feature-affine scorer. The gradient features carry most of the
    /// weight so that an l_inf budget of 0.005 can move a 32x32x3 noise
    /// image's score further than the spread of scores across such images;
    /// typical uniform-noise images land near 68 points.
    pub fn feature_affine_default() -> Self {
        Self {
            kind: ScorerKind::FeatureAffine,
            coefficients: vec![10.0, 10.0, 60.0, 60.0],
            bias: 20.0,
            clip_lo: 0.0,
            clip_hi: 100.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            ScorerKind::LinearMean => 1,
            ScorerKind::FeatureAffine => 4,
        };
        if self.coefficients.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.coefficients.len(),
            });
        }
        if !(self.clip_lo < self.clip_hi) {
            return Err(Error::InvalidArgument(format!(
                "clip range must satisfy lo < hi, got [{}, {}]",
                self.clip_lo, self.clip_hi
            )));
        }
        Ok(())
    }
}

/// Feature vector for `FeatureAffine`: mean, population std, mean absolute
/// horizontal neighbor difference, mean absolute vertical neighbor
/// difference. Differences are taken within a channel; images with a single
/// column (or row) have zero for the corresponding feature.
fn features(img: &ImageTensor) -> [f64; 4] {
    let n = img.pixels.len() as f64;
    let mean = img.pixels.iter().sum::<f64>() / n;
    let var = img.pixels.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    let std = var.sqrt();

    let (h, w, c) = (img.height, img.width, img.channels);
    let at = |y: usize, x: usize, ch: usize| img.pixels[(y * w + x) * c + ch];

    let mut dh_sum = 0.0;
    let mut dh_count = 0usize;
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            for ch in 0..c {
                dh_sum += (at(y, x + 1, ch) - at(y, x, ch)).abs();
                dh_count += 1;
            }
        }
    }
    let mut dv_sum = 0.0;
    let mut dv_count = 0usize;
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            for ch in 0..c {
                dv_sum += (at(y + 1, x, ch) - at(y, x, ch)).abs();
                dv_count += 1;
            }
        }
    }
    let dh = if dh_count > 0 { dh_sum / dh_count as f64 } else { 0.0 };
    let dv = if dv_count > 0 { dv_sum / dv_count as f64 } else { 0.0 };
    [mean, std, dh, dv]
}

fn raw_score(spec: &ScorerSpec, img: &ImageTensor) -> f64 {
    match spec.kind {
        ScorerKind::LinearMean => {
            let mean = img.pixels.iter().sum::<f64>() / img.pixels.len() as f64;
            spec.coefficients[0] * mean + spec.bias
        }
        ScorerKind::FeatureAffine => {
            let f = features(img);
            spec.coefficients.iter().zip(&f).map(|(c, v)| c * v).sum::<f64>() + spec.bias
        }
    }
}

/// Predicted quality score, clipped into `[clip_lo, clip_hi]`.
pub fn score(spec: &ScorerSpec, img: &ImageTensor) -> Result<f64> {
    spec.validate()?;
    Ok(raw_score(spec, img).clamp(spec.clip_lo, spec.clip_hi))
}

/// Analytic gradient of `score` with respect to every pixel.
///
/// Zero wherever the clip saturates (raw score strictly outside the range);
/// at an exact boundary the interior derivative is used so a fresh attack
/// is not born dead.
pub fn score_grad(spec: &ScorerSpec, img: &ImageTensor) -> Result<Vec<f64>> {
    spec.validate()?;
    let raw = raw_score(spec, img);
    if raw < spec.clip_lo || raw > spec.clip_hi {
        return Ok(vec![0.0; img.pixels.len()]);
    }

    let n = img.pixels.len() as f64;
    match spec.kind {
        ScorerKind::LinearMean => Ok(vec![spec.coefficients[0] / n; img.pixels.len()]),
        ScorerKind::FeatureAffine => {
            let [c_mean, c_std, c_dh, c_dv] = [
                spec.coefficients[0],
                spec.coefficients[1],
                spec.coefficients[2],
                spec.coefficients[3],
            ];
            let mut grad = vec![c_mean / n; img.pixels.len()];

            // std term: d std / d p_i = (p_i - mean) / (n * std).
            let mean = img.pixels.iter().sum::<f64>() / n;
            let var = img.pixels.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            if std > 0.0 {
                for (g, p) in grad.iter_mut().zip(&img.pixels) {
                    *g += c_std * (p - mean) / (n * std);
                }
            }

            let (h, w, c) = (img.height, img.width, img.channels);
            let idx = |y: usize, x: usize, ch: usize| (y * w + x) * c + ch;
            // sign(0) = 0: a flat pair contributes no gradient.
            let dh_count = (h * w.saturating_sub(1) * c).max(1) as f64;
            for y in 0..h {
                for x in 0..w.saturating_sub(1) {
                    for ch in 0..c {
                        let a = idx(y, x, ch);
                        let b = idx(y, x + 1, ch);
                        let s = (img.pixels[b] - img.pixels[a]).signum();
                        grad[b] += c_dh * s / dh_count;
                        grad[a] -= c_dh * s / dh_count;
                    }
                }
            }
            let dv_count = (h.saturating_sub(1) * w * c).max(1) as f64;
            for y in 0..h.saturating_sub(1) {
                for x in 0..w {
                    for ch in 0..c {
                        let a = idx(y, x, ch);
                        let b = idx(y + 1, x, ch);
                        let s = (img.pixels[b] - img.pixels[a]).signum();
                        grad[b] += c_dv * s / dv_count;
                        grad[a] -= c_dv * s / dv_count;
                    }
                }
            }
            Ok(grad)
        }
    }
}

/// Scores for a whole image set, order-preserving.
pub fn score_set(spec: &ScorerSpec, images: &[ImageTensor]) -> Result<Vec<f64>> {
    if images.is_empty() {
        return Err(Error::InvalidArgument("score_set requires at least one image".into()));
    }
    images.iter().map(|img| score(spec, img)).collect()
}
