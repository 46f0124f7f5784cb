//! Measurements over embedding sets: intra-modal overlap, Proxy-A-Distance,
//! per-channel variance and correlation.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{invalid, Error, Result};
use crate::kernels::{bin_index, densities};
use crate::matrix::{dot, Mat};
use crate::rng::SeededRng;

pub const DEFAULT_BINS: usize = 200;
pub const DEFAULT_PAIRS: usize = 10_000;
pub const DEFAULT_LOW_VARIANCE: f64 = 0.0005;

/// Overlap between same-class and different-class cosine similarity histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImoReport {
    pub paired_hist: Vec<f64>,
    pub unpaired_hist: Vec<f64>,
    /// `Σ_b min(paired_b, unpaired_b)`.
    pub intersection_area: f64,
    pub paired_pairs: usize,
    pub unpaired_pairs: usize,
    pub pairs_per_class: usize,
    pub bins: usize,
    pub seed: u64,
}

impl ImoReport {
    /// Center of every histogram bin over `[-1, 1]`.
    pub fn bin_centers(&self) -> Vec<f64> {
        let width = 2.0 / self.bins as f64;
        (0..self.bins).map(|b| -1.0 + width * (b as f64 + 0.5)).collect()
    }
}

/// Intersection area of the paired and unpaired similarity histograms.
///
/// For every class, up to `pairs_per_class` distinct same-class pairs are
/// drawn without replacement (all of them when the class has fewer). The same
/// total number of distinct different-class pairs is then drawn uniformly
/// from all different-class pairs. Histograms span `[-1, 1]` with `bins` bins.
pub fn imo_intersection(set: &EmbeddingSet, pairs_per_class: usize, bins: usize, seed: u64) -> Result<ImoReport> {
    set.require_normalized("embeddings for overlap measurement")?;
    if pairs_per_class == 0 {
        return Err(invalid("pairs_per_class", "must be at least 1"));
    }
    if bins < 2 {
        return Err(invalid("bins", "need at least 2 bins"));
    }
    let members = set.class_members();
    let mut rng = SeededRng::new(seed);
    let v = set.vectors();

    let mut paired = Vec::new();
    for class in &members {
        let n = class.len() as u64;
        if n < 2 {
            continue;
        }
        let total = n * (n - 1) / 2;
        let take = total.min(pairs_per_class as u64);
        for k in draw(&mut rng, total, take) {
            let (i, j) = triangular_pair(n, k);
            paired.push(dot(v.row(class[i as usize]), v.row(class[j as usize])));
        }
    }
    if paired.is_empty() {
        return Err(Error::NoPairs);
    }

    let nonempty: Vec<&Vec<usize>> = members.iter().filter(|m| !m.is_empty()).collect();
    let mut block_ends = Vec::new();
    let mut blocks = Vec::new();
    let mut acc = 0u64;
    for a in 0..nonempty.len() {
        for b in a + 1..nonempty.len() {
            acc += (nonempty[a].len() * nonempty[b].len()) as u64;
            block_ends.push(acc);
            blocks.push((a, b));
        }
    }
    if acc == 0 {
        return Err(Error::InvalidShape(
            "overlap measurement needs at least two non-empty classes".into(),
        ));
    }
    if (paired.len() as u64) > acc {
        let keep = draw(&mut rng, paired.len() as u64, acc);
        paired = keep.into_iter().map(|k| paired[k as usize]).collect();
    }
    let mut unpaired = Vec::with_capacity(paired.len());
    for k in draw(&mut rng, acc, paired.len() as u64) {
        let block = block_ends.partition_point(|&end| end <= k);
        let start = if block == 0 { 0 } else { block_ends[block - 1] };
        let (a, b) = blocks[block];
        let within = k - start;
        let width = nonempty[b].len() as u64;
        let i = nonempty[a][(within / width) as usize];
        let j = nonempty[b][(within % width) as usize];
        unpaired.push(dot(v.row(i), v.row(j)));
    }

    let paired_counts = counts(&paired, bins);
    let unpaired_counts = counts(&unpaired, bins);
    let paired_hist = densities(&paired_counts);
    let unpaired_hist = densities(&unpaired_counts);
    let intersection_area = paired_hist
        .iter()
        .zip(&unpaired_hist)
        .map(|(p, u)| p.min(*u))
        .sum();
    Ok(ImoReport {
        paired_hist,
        unpaired_hist,
        intersection_area,
        paired_pairs: paired.len(),
        unpaired_pairs: unpaired.len(),
        pairs_per_class,
        bins,
        seed,
    })
}

fn counts(values: &[f64], bins: usize) -> Vec<u64> {
    let mut c = alloc::vec![0u64; bins];
    for &v in values {
        c[bin_index(v, -1.0, 1.0, bins)] += 1;
    }
    c
}

/// All of `0..total` in order when `take == total`, else a seeded sample.
fn draw(rng: &mut SeededRng, total: u64, take: u64) -> Vec<u64> {
    if take >= total {
        (0..total).collect()
    } else {
        rng.sample_indices(total, take)
    }
}

/// The `k`-th pair `(i, j)`, `i < j < n`, in row-major order.
fn triangular_pair(n: u64, k: u64) -> (u64, u64) {
    let offset = |i: u64| i * (2 * n - i - 1) / 2;
    let b = (2 * n - 1) as f64;
    let mut i = ((b - libm::sqrt(b * b - 8.0 * k as f64)) / 2.0) as u64;
    i = i.min(n - 2);
    while i > 0 && offset(i) > k {
        i -= 1;
    }
    while i + 1 < n - 1 && offset(i + 1) <= k {
        i += 1;
    }
    (i, k - offset(i) + i + 1)
}

/// Loss of the linear domain classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainLoss {
    Logistic,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PadOptions {
    pub l2_reg: f64,
    pub iterations: usize,
    pub step: f64,
    pub loss: DomainLoss,
    /// Fraction of each domain used for training.
    pub train_fraction: f64,
}

impl Default for PadOptions {
    fn default() -> Self {
        Self {
            l2_reg: 1e-3,
            iterations: 500,
            step: 0.1,
            loss: DomainLoss::Logistic,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadReport {
    /// Held-out error of the domain classifier.
    pub epsilon: f64,
    /// `max(0, 2 (1 - 2 ε))`.
    pub pad: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub iterations: usize,
    pub loss: DomainLoss,
}

pub const PAD_MIN_ROWS: usize = 20;

pub fn proxy_a_distance(source: &EmbeddingSet, target: &EmbeddingSet, seed: u64) -> Result<PadReport> {
    proxy_a_distance_with(source, target, seed, &PadOptions::default())
}

/// Proxy-A-Distance from the held-out error of a linear domain classifier.
///
/// The larger domain is subsampled (seeded) to the size of the smaller one;
/// each domain is split `train_fraction` / rest; an L2-regularized linear
/// classifier with bias is trained by full-batch gradient descent from zero.
pub fn proxy_a_distance_with(
    source: &EmbeddingSet,
    target: &EmbeddingSet,
    seed: u64,
    opts: &PadOptions,
) -> Result<PadReport> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            context: "source vs target dimension",
            left: source.dim(),
            right: target.dim(),
        });
    }
    for (set, name) in [(source, "source"), (target, "target")] {
        if set.rows() < PAD_MIN_ROWS {
            return Err(invalid(
                "domain size",
                alloc::format!("{name} has {} rows, need at least {PAD_MIN_ROWS}", set.rows()),
            ));
        }
    }
    if !(opts.train_fraction > 0.0 && opts.train_fraction < 1.0) {
        return Err(invalid("train_fraction", "must lie in (0, 1)"));
    }
    if !(opts.step > 0.0 && opts.l2_reg >= 0.0) {
        return Err(invalid("pad optimizer", "need step > 0 and l2_reg >= 0"));
    }
    let n = source.rows().min(target.rows());
    let n_train = ((n as f64 * opts.train_fraction) as usize).clamp(1, n - 1);
    let mut rng = SeededRng::new(seed);
    let src = rng.sample_indices(source.rows() as u64, n as u64);
    let tgt = rng.sample_indices(target.rows() as u64, n as u64);

    let mut train = Vec::with_capacity(2 * n_train);
    let mut test = Vec::with_capacity(2 * (n - n_train));
    for (set, order, y) in [(source, &src, -1.0), (target, &tgt, 1.0)] {
        for (pos, &row) in order.iter().enumerate() {
            let sample = (set.vectors().row(row as usize), y);
            if pos < n_train {
                train.push(sample);
            } else {
                test.push(sample);
            }
        }
    }

    let model = train_linear(&train, source.dim(), opts);
    let errors = test
        .iter()
        .filter(|(x, y)| (model.decision(x) > 0.0) != (*y > 0.0))
        .count();
    let epsilon = errors as f64 / test.len() as f64;
    Ok(PadReport {
        epsilon,
        pad: pad_from_error(epsilon),
        train_size: train.len(),
        test_size: test.len(),
        seed,
        iterations: opts.iterations,
        loss: opts.loss,
    })
}

/// `2 (1 - 2 ε)`, clamped at zero.
pub fn pad_from_error(epsilon: f64) -> f64 {
    (2.0 * (1.0 - 2.0 * epsilon)).max(0.0)
}

#[derive(Debug, Clone)]
struct LinearModel {
    w: Vec<f64>,
    b: f64,
}

impl LinearModel {
    fn decision(&self, x: &[f32]) -> f64 {
        dot(x, &self.w) + self.b
    }
}

fn train_linear(data: &[(&[f32], f64)], dim: usize, opts: &PadOptions) -> LinearModel {
    let mut model = LinearModel {
        w: alloc::vec![0.0; dim],
        b: 0.0,
    };
    let inv_n = 1.0 / data.len() as f64;
    let mut grad = alloc::vec![0.0; dim];
    for _ in 0..opts.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for &(x, y) in data {
            let margin = y * model.decision(x);
            // d loss / d z
            let coef = match opts.loss {
                DomainLoss::Logistic => -y * sigmoid(-margin),
                DomainLoss::Hinge => {
                    if margin < 1.0 {
                        -y
                    } else {
                        0.0
                    }
                }
            };
            if coef != 0.0 {
                for (g, &xi) in grad.iter_mut().zip(x) {
                    *g += coef * f64::from(xi);
                }
                grad_b += coef;
            }
        }
        for (wi, g) in model.w.iter_mut().zip(&grad) {
            *wi -= opts.step * (g * inv_n + opts.l2_reg * *wi);
        }
        model.b -= opts.step * grad_b * inv_n;
    }
    model
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVariance {
    /// Population variance of every channel.
    pub variances: Vec<f64>,
    pub low_threshold: f64,
    /// Fraction of channels with variance below `low_threshold`.
    pub low_fraction: f64,
}

impl FeatureVariance {
    pub fn mean_variance(&self) -> f64 {
        self.variances.iter().sum::<f64>() / self.variances.len() as f64
    }
}

/// Per-channel population variance (Welford updates in row order).
pub fn feature_variance(set: &EmbeddingSet, low_threshold: f64) -> Result<FeatureVariance> {
    variance_of(set.vectors(), low_threshold)
}

pub(crate) fn variance_of(m: &Mat<f32>, low_threshold: f64) -> Result<FeatureVariance> {
    if m.rows() < 2 {
        return Err(invalid("rows", "feature variance needs at least 2 rows"));
    }
    let d = m.cols();
    let mut mean = alloc::vec![0.0f64; d];
    let mut m2 = alloc::vec![0.0f64; d];
    for (count, row) in m.iter_rows().enumerate() {
        let k = (count + 1) as f64;
        for ((mu, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(row) {
            let x = f64::from(x);
            let delta = x - *mu;
            *mu += delta / k;
            *s += delta * (x - *mu);
        }
    }
    let n = m.rows() as f64;
    let variances: Vec<f64> = m2.into_iter().map(|s| s / n).collect();
    let low = variances.iter().filter(|&&v| v < low_threshold).count();
    Ok(FeatureVariance {
        low_fraction: low as f64 / d as f64,
        variances,
        low_threshold,
    })
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let (sxx, syy, sxy) = centered_moments(x, y)?;
    if syy <= 0.0 {
        return Err(Error::ConstantInput("pearson y"));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Least-squares `(slope, intercept)` of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let (sxx, _, sxy) = centered_moments(x, y)?;
    let slope = sxy / sxx;
    let n = x.len() as f64;
    let intercept = y.iter().sum::<f64>() / n - slope * x.iter().sum::<f64>() / n;
    Ok((slope, intercept))
}

fn centered_moments(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "correlation inputs",
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(invalid("length", "correlation needs at least 3 points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::ConstantInput("pearson x"));
    }
    Ok((sxx, syy, sxy))
}
