//! Hard ranking and its differentiable surrogate via Euclidean projection
//! onto the permutahedron, computed by sorting plus pool-adjacent-violators
//! isotonic regression.
//!
//! The surrogate rank of a score vector `s` at temperature `beta` is the
//! projection of `-s/beta` onto the convex hull of all permutations of
//! `(1, ..., N)`. For well-separated scores it coincides with the hard
//! descending rank; as `beta` grows it contracts towards the barycenter
//! `((N+1)/2, ..., (N+1)/2)`.

use std::ops::Range;

use crate::error::{Error, Result};

/// Descending ranks: rank 1 is the largest score. Ties broken by ascending
/// original index (stable sort).
pub fn hard_rank(scores: &[f64]) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("hard_rank requires N >= 1".into()));
    }
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("hard_rank: non-finite score at index {i}")));
    }
    let order = descending_order(scores);
    let mut ranks = vec![0usize; scores.len()];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    Ok(ranks)
}

/// Indices sorted by descending value; equal values keep index order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    order
}

/// Result of a soft-rank evaluation, retaining everything needed for its
/// vector-Jacobian product.
#[derive(Debug, Clone)]
pub struct SoftRankResult {
    /// Surrogate ranks, one per input score.
    pub values: Vec<f64>,
    pub beta: f64,
    /// Pooled segments of the isotonic solution, as ranges over sorted
    /// positions. They cover `0..N` disjointly.
    pub blocks: Vec<Range<usize>>,
    /// Descending sort permutation: `order[p]` is the original index of the
    /// score at sorted position `p`.
    pub order: Vec<usize>,
}

/// Projection output: the projected point, the pooled blocks over sorted
/// positions, and the descending sort permutation.
pub type ProjectionParts = (Vec<f64>, Vec<Range<usize>>, Vec<usize>);

/// Euclidean projection of `z` onto the permutahedron of `(1, ..., N)`.
///
/// Sorts `z` descending, runs non-increasing isotonic regression on the
/// sorted values minus `(N, N-1, ..., 1)`, and maps the residual back. The
/// pooled blocks of the isotonic fit are returned for downstream Jacobians.
pub fn permutahedron_project(z: &[f64]) -> Result<ProjectionParts> {
    let n = z.len();
    if n == 0 {
        return Err(Error::InvalidArgument("permutahedron_project requires N >= 1".into()));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "permutahedron_project: non-finite input at index {i}"
        )));
    }

    let order = descending_order(z);
    // Difference between the sorted input and the sorted weight vector.
    let diffs: Vec<f64> = order
        .iter()
        .enumerate()
        .map(|(pos, &idx)| z[idx] - (n - pos) as f64)
        .collect();

    let (fitted, blocks) = isotonic_non_increasing(&diffs);

    let mut out = vec![0.0; n];
    for (pos, &idx) in order.iter().enumerate() {
        out[idx] = z[idx] - fitted[pos];
    }
    Ok((out, blocks, order))
}

/// Pool-adjacent-violators for the non-increasing constraint
/// `v[0] >= v[1] >= ... >= v[n-1]`, least squares.
fn isotonic_non_increasing(d: &[f64]) -> (Vec<f64>, Vec<Range<usize>>) {
    // Stack of (start, count, sum); merge while a later block's mean exceeds
    // the one before it.
    let mut starts: Vec<usize> = Vec::with_capacity(d.len());
    let mut counts: Vec<usize> = Vec::with_capacity(d.len());
    let mut sums: Vec<f64> = Vec::with_capacity(d.len());

    for (i, &v) in d.iter().enumerate() {
        let mut start = i;
        let mut count = 1usize;
        let mut sum = v;
        while let (Some(&ps), Some(&pc), Some(&psum)) = (starts.last(), counts.last(), sums.last()) {
            if psum / (pc as f64) < sum / (count as f64) {
                start = ps;
                count += pc;
                sum += psum;
                starts.pop();
                counts.pop();
                sums.pop();
            } else {
                break;
            }
        }
        starts.push(start);
        counts.push(count);
        sums.push(sum);
    }

    let mut fitted = vec![0.0; d.len()];
    let mut blocks = Vec::with_capacity(starts.len());
    for ((&start, &count), &sum) in starts.iter().zip(&counts).zip(&sums) {
        let mean = sum / count as f64;
        for slot in &mut fitted[start..start + count] {
            *slot = mean;
        }
        blocks.push(start..start + count);
    }
    (fitted, blocks)
}

/// Differentiable surrogate of `hard_rank`: the projection of `-s/beta`.
pub fn soft_rank(scores: &[f64], beta: f64) -> Result<SoftRankResult> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("soft_rank: non-finite score at index {i}")));
    }
    let scaled: Vec<f64> = scores.iter().map(|&s| -s / beta).collect();
    let (values, blocks, order) = permutahedron_project(&scaled)?;
    Ok(SoftRankResult {
        values,
        beta,
        blocks,
        order,
    })
}

/// Vector-Jacobian product of `soft_rank`: given `upstream = dL/d(values)`,
/// returns `dL/d(scores)`.
///
/// In sorted coordinates the projection's Jacobian with respect to the scores
/// is `(-1/beta) * (I - A)` where `A` averages within each pooled block and
/// is zero across blocks; within a pooled block the surrogate tracks the
/// score exactly up to the block mean, and for singleton blocks (the
/// hard-rank regime) the output is locally constant so the product vanishes.
pub fn soft_rank_vjp(result: &SoftRankResult, upstream: &[f64]) -> Result<Vec<f64>> {
    let n = result.values.len();
    if upstream.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: upstream.len(),
        });
    }

    // Upstream in sorted coordinates.
    let sorted_up: Vec<f64> = result.order.iter().map(|&idx| upstream[idx]).collect();

    let mut out = vec![0.0; n];
    for block in &result.blocks {
        let len = (block.end - block.start) as f64;
        let mean: f64 = sorted_up[block.clone()].iter().sum::<f64>() / len;
        for pos in block.clone() {
            out[result.order[pos]] = -(sorted_up[pos] - mean) / result.beta;
        }
    }
    Ok(out)
}
