//! Shared numeric utilities: Adam optimizer, finite-difference gradients,
//! and a seeded counter-based random generator.

use crate::error::{Error, Result};

/// State of an Adam optimizer over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub decay1: f64,
    pub decay2: f64,
    pub stabilizer: f64,
    pub learning_rate: f64,
}

impl AdamState {
    /// Fresh state for `n` parameters with the conventional decay constants.
    pub fn new(n: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step_count: 0,
            decay1: 0.9,
            decay2: 0.999,
            stabilizer: 1e-8,
            learning_rate,
        }
    }
}

/// One bias-corrected Adam update. Pure: returns the new parameters and state.
pub fn adam_step(params: &[f64], grads: &[f64], state: &AdamState) -> Result<(Vec<f64>, AdamState)> {
    if grads.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    if state.first_moment.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            actual: state.first_moment.len(),
        });
    }

    let mut next = state.clone();
    next.step_count += 1;
    let t = next.step_count as i32;
    let bc1 = 1.0 - next.decay1.powi(t);
    let bc2 = 1.0 - next.decay2.powi(t);

    let mut out = params.to_vec();
    for i in 0..params.len() {
        let g = grads[i];
        next.first_moment[i] = next.decay1 * state.first_moment[i] + (1.0 - next.decay1) * g;
        next.second_moment[i] = next.decay2 * state.second_moment[i] + (1.0 - next.decay2) * g * g;
        let m_hat = next.first_moment[i] / bc1;
        let v_hat = next.second_moment[i] / bc2;
        out[i] -= next.learning_rate * m_hat / (v_hat.sqrt() + next.stabilizer);
    }
    Ok((out, next))
}

/// Central-difference gradient estimate of a scalar function.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Numeric(format!(
                "finite_diff_grad: non-finite function value near coordinate {i}"
            )));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Counter-based pseudo-random generator (SplitMix64). Identical seeds give
/// identical streams on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        // Guard against log(0).
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// `n` uniform draws in [lo, hi).
pub fn rng_uniform(rng: &mut Rng, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "rng_uniform requires lo < hi, got [{lo}, {hi})"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("rng_uniform requires n >= 1".into()));
    }
    Ok((0..n).map(|_| lo + (hi - lo) * rng.next_f64()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let state = AdamState::new(3, 0.1);
        let params = [1.0, -2.0, 0.5];
        let (out, next) = adam_step(&params, &[0.0; 3], &state).unwrap();
        assert_eq!(out, params.to_vec());
        assert_eq!(next.step_count, 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // Bias correction makes the first step lr * sign(g) up to the stabilizer.
        let state = AdamState::new(1, 0.1);
        let (out, _) = adam_step(&[0.0], &[1.0], &state).unwrap();
        assert!((out[0] + 0.1).abs() < 1e-8, "got {}", out[0]);
    }

    #[test]
    fn adam_is_deterministic() {
        let state = AdamState::new(2, 0.01);
        let a = adam_step(&[1.0, 2.0], &[0.3, -0.4], &state).unwrap();
        let b = adam_step(&[1.0, 2.0], &[0.3, -0.4], &state).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.first_moment, b.1.first_moment);
    }

    #[test]
    fn adam_length_mismatch_errors() {
        let state = AdamState::new(2, 0.01);
        assert!(matches!(
            adam_step(&[1.0, 2.0], &[0.3], &state),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let c = [1.0, 2.0, -3.0];
        let mut x = vec![10.0, -5.0, 3.0];
        let mut state = AdamState::new(3, 0.05);
        for _ in 0..50_000 {
            let g: Vec<f64> = x.iter().zip(&c).map(|(xi, ci)| 2.0 * (xi - ci)).collect();
            let (nx, ns) = adam_step(&x, &g, &state).unwrap();
            x = nx;
            state = ns;
        }
        for (xi, ci) in x.iter().zip(&c) {
            assert!((xi - ci).abs() < 1e-3, "x={x:?}");
        }
    }

    #[test]
    fn finite_diff_matches_analytic_gradients() {
        let g = finite_diff_grad(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);

        let g = finite_diff_grad(|_| 7.5, &[0.3, -0.2, 9.0], 1e-5).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9));

        let c = [2.0, -1.0, 0.5];
        let g = finite_diff_grad(
            |x| x.iter().zip(&c).map(|(a, b)| a * b).sum(),
            &[1.0, 1.0, 1.0],
            1e-4,
        )
        .unwrap();
        for (gi, ci) in g.iter().zip(&c) {
            assert!((gi - ci).abs() < 1e-8);
        }
    }

    #[test]
    fn finite_diff_rejects_non_finite() {
        let r = finite_diff_grad(|x| 1.0 / (x[0] - x[0]), &[1.0], 1e-5);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn rng_stream_is_reproducible() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        let va = rng_uniform(&mut a, 0.0, 100.0, 5).unwrap();
        let vb = rng_uniform(&mut b, 0.0, 100.0, 5).unwrap();
        assert_eq!(va, vb);

        let mut c = Rng::new(8);
        let vc = rng_uniform(&mut c, 0.0, 100.0, 5).unwrap();
        assert_ne!(va, vc);
    }

    #[test]
    fn rng_uniform_respects_range() {
        let mut rng = Rng::new(42);
        for v in rng_uniform(&mut rng, -3.0, 2.0, 1000).unwrap() {
            assert!((-3.0..2.0).contains(&v));
        }
    }

    #[test]
    fn rng_uniform_rejects_bad_range() {
        let mut rng = Rng::new(1);
        assert!(rng_uniform(&mut rng, 1.0, 1.0, 3).is_err());
        assert!(rng_uniform(&mut rng, 2.0, 1.0, 3).is_err());
        assert!(rng_uniform(&mut rng, 0.0, 1.0, 0).is_err());
    }
}
