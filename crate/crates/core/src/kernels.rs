//! Numerical primitives shared by every classifier and metric.
//!
//! Inputs may be `f32` or `f64`; all accumulation happens in `f64` with a
//! fixed left-to-right order per row, so results do not depend on how rows
//! are partitioned across threads.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::{dot, Mat};

/// Floor applied to `q` entries inside [`kl_divergence`].
pub const KL_EPSILON: f64 = 1e-12;

/// Tolerance on `|sum - 1|` for a [`ProbabilityRow`].
pub const PROBABILITY_TOLERANCE: f64 = 1e-6;

/// `a · bᵀ` for row-normalized inputs, i.e. pairwise cosine similarities.
pub fn cosine_matrix<A, B>(a: &Mat<A>, b: &Mat<B>) -> Result<Mat<f64>>
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            context: "cosine_matrix feature dimension",
            left: a.cols(),
            right: b.cols(),
        });
    }
    let mut out = Vec::with_capacity(a.rows() * b.rows());
    for ra in a.iter_rows() {
        out.extend(b.iter_rows().map(|rb| dot(ra, rb)));
    }
    Mat::from_vec(a.rows(), b.rows(), out)
}

/// `exp(-beta * (1 - sim))` element-wise.
pub fn affinity(sim: &Mat<f64>, beta: f64) -> Result<Mat<f64>> {
    check_beta(beta)?;
    Ok(sim.map(|s| libm::exp(-beta * (1.0 - s))))
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid("beta", "must be a positive finite number"));
    }
    Ok(())
}

/// A borrowed, validated probability vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityRow<'a>(&'a [f64]);

impl<'a> ProbabilityRow<'a> {
    pub fn new(values: &'a [f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("probability row"));
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(invalid("probability row", "entries must be finite and non-negative"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(invalid("probability row", "entries must sum to 1"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &'a [f64] {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Rows of probabilities produced by [`softmax_rows`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(Mat<f64>);

impl ProbabilityMatrix {
    pub fn row(&self, r: usize) -> ProbabilityRow<'_> {
        ProbabilityRow(self.0.row(r))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.0
    }

    /// Wraps a matrix whose rows are already probability distributions.
    pub fn from_mat(m: Mat<f64>) -> Result<Self> {
        for r in m.iter_rows() {
            ProbabilityRow::new(r)?;
        }
        Ok(Self(m))
    }
}

/// Row-wise softmax with max-subtraction.
pub fn softmax_rows(logits: &Mat<f64>) -> Result<ProbabilityMatrix> {
    if logits.as_slice().iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("softmax input (NaN)"));
    }
    if logits.as_slice().iter().any(|v| v.is_infinite()) {
        return Err(Error::NonFinite("softmax input (infinite)"));
    }
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(ProbabilityMatrix(out))
}

/// `Σ p_i ln(p_i / max(q_i, epsilon))`, with `0 · ln(0/·) = 0`.
pub fn kl_divergence(p: ProbabilityRow<'_>, q: ProbabilityRow<'_>, epsilon: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context: "kl_divergence distribution length",
            left: p.len(),
            right: q.len(),
        });
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(invalid("epsilon", "must be positive"));
    }
    Ok(kl_unchecked(p.0, q.0, epsilon))
}

#[inline]
pub(crate) fn kl_unchecked(p: &[f64], q: &[f64], epsilon: f64) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            acc += pi * libm::log(pi / qi.max(epsilon));
        }
    }
    acc
}

/// Output of [`minmax_rescale`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub values: Mat<f64>,
    /// Set when the input was constant; every output entry is then the
    /// midpoint of the target range.
    pub degenerate: bool,
}

/// Affine map of the whole matrix onto `[target_min, target_max]` using the
/// global minimum and maximum of `values`.
pub fn minmax_rescale(values: &Mat<f64>, target_min: f64, target_max: f64) -> Result<Rescaled> {
    if !(target_min.is_finite() && target_max.is_finite() && target_min < target_max) {
        return Err(invalid("rescale target", "need finite target_min < target_max"));
    }
    let (lo, hi) = values.min_max().ok_or(Error::EmptyInput("minmax_rescale"))?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NonFinite("minmax_rescale input"));
    }
    if lo == hi {
        let mid = 0.5 * (target_min + target_max);
        return Ok(Rescaled {
            values: values.map(|_| mid),
            degenerate: true,
        });
    }
    let scale = (target_max - target_min) / (hi - lo);
    Ok(Rescaled {
        values: values.map(|v| {
            if v == hi {
                target_max
            } else {
                target_min + (v - lo) * scale
            }
        }),
        degenerate: false,
    })
}

/// Bin index of `v` among `bins` equal-width bins over `[lo, hi]`; values are
/// clamped into the range and `hi` itself falls into the last bin.
#[inline]
pub fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let v = v.clamp(lo, hi);
    let b = ((v - lo) / (hi - lo) * bins as f64) as usize;
    b.min(bins - 1)
}

/// Integer bin counts; see [`bin_index`] for the binning rule.
pub fn histogram_counts(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<u64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("histogram"));
    }
    if bins < 2 {
        return Err(invalid("bins", "need at least 2 bins"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid("histogram range", "need finite lo < hi"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("histogram input (NaN)"));
    }
    let mut counts = vec![0u64; bins];
    for &v in values {
        counts[bin_index(v, lo, hi, bins)] += 1;
    }
    Ok(counts)
}

/// Normalized frequencies (summing to 1) over `bins` equal-width bins.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    let counts = histogram_counts(values, lo, hi, bins)?;
    Ok(densities(&counts))
}

pub(crate) fn densities(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Echo of the parameters a rescale used, kept for auditability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleRange {
    pub target_min: f64,
    pub target_max: f64,
    pub degenerate: bool,
}
