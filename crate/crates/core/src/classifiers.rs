//! Training-free prediction rules over a few-shot cache.
//!
//! Every method is zero-shot logits plus optional cache terms:
//!
//! | method | logits |
//! |--------|--------|
//! | zero-shot | `T Wᵀ` |
//! | TA | `T Wᵀ + α A L` with `A = exp(-β(1 - T Fᵀ))` |
//! | TX | TA `+ γ φ(-M) L`, `M_ij = KL(softmax(T_i Wᵀ) ‖ softmax(F_j Wᵀ))` |
//! | TA++ / TX++ | as TA / TX with `A` replaced by `Y = exp(-β(1 - U Gᵀ))` from adapted embeddings |
//! | APE / APE++ | `T Wᵀ + α A' diag(w) L` over channel-refined features, `w_k = exp(γ_ape CE_k)` |
//!
//! `φ` maps `-M` affinely onto the global `[min, max]` of the affinity matrix
//! of the same batch. The zero-shot term and the KL bridge always use the
//! original (unadapted, unpruned) embeddings.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::{check_channels, CacheModel, EmbeddingSet, TextClassifier};
use crate::error::{invalid, Error, Result};
use crate::kernels::{
    affinity, check_beta, cosine_matrix, kl_unchecked, minmax_rescale, softmax_rows,
    ProbabilityMatrix, RescaleRange, KL_EPSILON,
};
use crate::matrix::Mat;

/// Floor on the predicted probability of the true class in APE weights.
pub const APE_PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "zero-shot")]
    ZeroShot,
    #[serde(rename = "ta")]
    TipAdapter,
    #[serde(rename = "ta++")]
    TipAdapterPlus,
    #[serde(rename = "tx")]
    TipX,
    #[serde(rename = "tx++")]
    TipXPlus,
    #[serde(rename = "ape")]
    Ape,
    #[serde(rename = "ape++")]
    ApePlus,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::ZeroShot,
        Method::TipAdapter,
        Method::TipAdapterPlus,
        Method::TipX,
        Method::TipXPlus,
        Method::Ape,
        Method::ApePlus,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::ZeroShot => "zero-shot",
            Method::TipAdapter => "ta",
            Method::TipAdapterPlus => "ta++",
            Method::TipX => "tx",
            Method::TipXPlus => "tx++",
            Method::Ape => "ape",
            Method::ApePlus => "ape++",
        }
    }

    /// Column header used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::ZeroShot => "Zero-Shot",
            Method::TipAdapter => "TA",
            Method::TipAdapterPlus => "TA++",
            Method::TipX => "TX",
            Method::TipXPlus => "TX++",
            Method::Ape => "APE",
            Method::ApePlus => "APE++",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag().eq_ignore_ascii_case(tag))
    }

    /// Whether the cache side uses adapted embeddings.
    pub fn is_plus(self) -> bool {
        matches!(self, Method::TipAdapterPlus | Method::TipXPlus | Method::ApePlus)
    }

    pub fn uses_cache(self) -> bool {
        self != Method::ZeroShot
    }

    pub fn uses_gamma(self) -> bool {
        matches!(self, Method::TipX | Method::TipXPlus)
    }

    pub fn uses_mask(self) -> bool {
        matches!(self, Method::Ape | Method::ApePlus)
    }

    /// The original-space method a `++` variant is compared against.
    pub fn baseline(self) -> Option<Method> {
        match self {
            Method::TipAdapterPlus => Some(Method::TipAdapter),
            Method::TipXPlus => Some(Method::TipX),
            Method::ApePlus => Some(Method::Ape),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Hyperparameters shared by all methods; each method reads the ones it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    /// Cache weight.
    pub alpha: f64,
    /// Affinity sharpness.
    pub beta: f64,
    /// Weight of the KL bridge.
    pub gamma: f64,
    /// APE weight smoothing.
    pub gamma_ape: f64,
    /// Channels kept by APE refinement; `None` keeps `ceil(0.7 d)`.
    pub channel_budget: Option<usize>,
    /// Mix between the variance (1.0) and inter-class similarity (0.0) criteria.
    pub lambda_mix: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 5.5,
            gamma: 0.5,
            gamma_ape: 1.0,
            channel_budget: None,
            lambda_mix: 0.7,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(invalid("alpha", "must be finite and non-negative"));
        }
        check_beta(self.beta)?;
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(invalid("gamma", "must be finite and non-negative"));
        }
        if !(self.gamma_ape.is_finite() && self.gamma_ape >= 0.0) {
            return Err(invalid("gamma_ape", "must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.lambda_mix) {
            return Err(invalid("lambda_mix", "must lie in [0, 1]"));
        }
        if self.channel_budget == Some(0) {
            return Err(invalid("channel_budget", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of channels APE keeps for feature dimension `dim`.
    pub fn budget_for(&self, dim: usize) -> usize {
        self.channel_budget
            .unwrap_or_else(|| libm::ceil(0.7 * dim as f64) as usize)
    }
}

/// The additive pieces of a logits matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub clip: Mat<f64>,
    /// `α` times the (weighted) affinity-label product.
    pub cache: Option<Mat<f64>>,
    /// `γ φ(-M) L`.
    pub kl_bridge: Option<Mat<f64>>,
}

impl Breakdown {
    pub fn total(&self) -> Mat<f64> {
        let mut out = self.clip.clone();
        for term in [&self.cache, &self.kl_bridge].into_iter().flatten() {
            for r in 0..out.rows() {
                for (o, t) in out.row_mut(r).iter_mut().zip(term.row(r)) {
                    *o += *t;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitsBundle {
    pub logits: Mat<f64>,
    pub method: Method,
    pub hyper: HyperParams,
    pub breakdown: Option<Breakdown>,
    /// Target range of the KL-bridge rescale (TX and TX++ only).
    pub rescale: Option<RescaleRange>,
    /// Per-cache-row APE weights (APE and APE++ only).
    pub ape_weights: Option<Vec<f64>>,
}

impl LogitsBundle {
    /// Predicted class per row; ties go to the lowest class index.
    pub fn predictions(&self) -> Vec<usize> {
        self.logits.iter_rows().map(crate::matrix::argmax).collect()
    }
}

/// Retained channels for APE refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMask {
    indices: Vec<usize>,
    scores: Vec<f64>,
}

impl ChannelMask {
    pub fn new(indices: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        check_channels(&indices, scores.len())?;
        Ok(Self { indices, scores })
    }

    /// Keeps every channel.
    pub fn identity(dim: usize) -> Self {
        Self {
            indices: (0..dim).collect(),
            scores: vec![0.0; dim],
        }
    }

    /// Retained channel indices, strictly increasing.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Score of every input channel.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn dim(&self) -> usize {
        self.scores.len()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.indices.len() == self.scores.len()
    }
}

/// Which `++` rule [`plusplus_logits`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlusPlusVariant {
    TipAdapter,
    TipX,
}

/// Row-aligned original and adapted encodings for the `++` methods.
#[derive(Debug, Clone, Copy)]
pub struct PlusPlusInputs<'a> {
    pub test_orig: &'a EmbeddingSet,
    pub test_adapted: &'a EmbeddingSet,
    /// Original-space cache; only the TX++ KL bridge reads it.
    pub cache_orig: Option<&'a CacheModel>,
    pub cache_adapted: &'a CacheModel,
}

/// Adapted-space counterparts used by APE++.
#[derive(Debug, Clone, Copy)]
pub struct Corrected<'a> {
    pub test_adapted: &'a EmbeddingSet,
    pub cache_adapted: &'a CacheModel,
}

/// Everything any method may need; unused fields may be `None`.
#[derive(Debug, Clone, Copy)]
pub struct MethodInputs<'a> {
    pub test: &'a EmbeddingSet,
    pub text: &'a TextClassifier,
    pub cache: Option<&'a CacheModel>,
    pub test_adapted: Option<&'a EmbeddingSet>,
    pub cache_adapted: Option<&'a CacheModel>,
    pub mask: Option<&'a ChannelMask>,
}

/// Zero-shot logits `T Wᵀ`.
pub fn clip_logits(test: &EmbeddingSet, w: &TextClassifier) -> Result<LogitsBundle> {
    let clip = clip_term(test, w)?;
    Ok(LogitsBundle {
        logits: clip.clone(),
        method: Method::ZeroShot,
        hyper: HyperParams::default(),
        breakdown: Some(Breakdown {
            clip,
            cache: None,
            kl_bridge: None,
        }),
        rescale: None,
        ape_weights: None,
    })
}

pub fn tip_adapter_logits(
    test: &EmbeddingSet,
    cache: &CacheModel,
    w: &TextClassifier,
    hp: &HyperParams,
) -> Result<LogitsBundle> {
    evaluate(
        Method::TipAdapter,
        &MethodInputs {
            test,
            text: w,
            cache: Some(cache),
            test_adapted: None,
            cache_adapted: None,
            mask: None,
        },
        hp,
    )
}

pub fn tip_x_logits(
    test: &EmbeddingSet,
    cache: &CacheModel,
    w: &TextClassifier,
    hp: &HyperParams,
) -> Result<LogitsBundle> {
    evaluate(
        Method::TipX,
        &MethodInputs {
            test,
            text: w,
            cache: Some(cache),
            test_adapted: None,
            cache_adapted: None,
            mask: None,
        },
        hp,
    )
}

/// TA++ or TX++: cache affinities from adapted embeddings, zero-shot term and
/// KL bridge from the original ones.
pub fn plusplus_logits(
    inputs: &PlusPlusInputs<'_>,
    w: &TextClassifier,
    hp: &HyperParams,
    variant: PlusPlusVariant,
) -> Result<LogitsBundle> {
    let method = match variant {
        PlusPlusVariant::TipAdapter => Method::TipAdapterPlus,
        PlusPlusVariant::TipX => Method::TipXPlus,
    };
    evaluate(
        method,
        &MethodInputs {
            test: inputs.test_orig,
            text: w,
            cache: inputs.cache_orig,
            test_adapted: Some(inputs.test_adapted),
            cache_adapted: Some(inputs.cache_adapted),
            mask: None,
        },
        hp,
    )
}

/// APE (or APE++ when `corrected` is given) over channel-refined features.
pub fn ape_logits(
    test: &EmbeddingSet,
    cache: &CacheModel,
    w: &TextClassifier,
    hp: &HyperParams,
    mask: &ChannelMask,
    corrected: Option<Corrected<'_>>,
) -> Result<LogitsBundle> {
    let method = if corrected.is_some() {
        Method::ApePlus
    } else {
        Method::Ape
    };
    evaluate(
        method,
        &MethodInputs {
            test,
            text: w,
            cache: Some(cache),
            test_adapted: corrected.map(|c| c.test_adapted),
            cache_adapted: corrected.map(|c| c.cache_adapted),
            mask: Some(mask),
        },
        hp,
    )
}

/// Evaluates any method on the given inputs.
pub fn evaluate(method: Method, inputs: &MethodInputs<'_>, hp: &HyperParams) -> Result<LogitsBundle> {
    hp.validate()?;
    let terms = UnitTerms::compute(method, inputs, hp)?;
    Ok(terms.bundle(method, hp))
}

/// β-dependent pieces of a method's logits, before α and γ are applied.
///
/// Grid search computes these once per β and recombines them for every
/// (α, γ); the public entry points go through the same [`UnitTerms::combine`].
#[derive(Debug, Clone)]
pub(crate) struct UnitTerms {
    clip: Mat<f64>,
    cache: Option<Mat<f64>>,
    bridge: Option<Mat<f64>>,
    rescale: Option<RescaleRange>,
    ape_weights: Option<Vec<f64>>,
}

impl UnitTerms {
    pub(crate) fn compute(method: Method, inputs: &MethodInputs<'_>, hp: &HyperParams) -> Result<Self> {
        let test = inputs.test;
        let w = inputs.text;
        let clip = clip_term(test, w)?;
        let mut terms = Self {
            clip,
            cache: None,
            bridge: None,
            rescale: None,
            ape_weights: None,
        };
        if method == Method::ZeroShot {
            return Ok(terms);
        }

        let name = method.tag();
        let cache_orig = inputs.cache;
        let (affinity_test, affinity_cache) = if method.is_plus() {
            let ta = inputs.test_adapted.ok_or(Error::MissingAdapted(name))?;
            let ca = inputs.cache_adapted.ok_or(Error::MissingAdapted(name))?;
            check_alignment(test, ta)?;
            if let Some(co) = cache_orig {
                if co.labels() != ca.labels() {
                    return Err(Error::InvalidShape(
                        "original and adapted caches are not row-aligned".into(),
                    ));
                }
            }
            (ta, ca)
        } else {
            let c = cache_orig.ok_or(invalid("cache", "method needs a cache"))?;
            (test, c)
        };
        check_cache(affinity_test, affinity_cache, w)?;

        match method {
            Method::ZeroShot => unreachable!(),
            Method::TipAdapter | Method::TipAdapterPlus | Method::TipX | Method::TipXPlus => {
                let a = affinity(
                    &cosine_matrix(affinity_test.vectors(), affinity_cache.keys())?,
                    hp.beta,
                )?;
                if method.uses_gamma() {
                    let bridge_cache = cache_orig.ok_or(invalid(
                        "cache_orig",
                        "the KL bridge needs the original-space cache",
                    ))?;
                    check_cache(test, bridge_cache, w)?;
                    let m = kl_bridge_matrix(test, bridge_cache, w)?;
                    let (phi, range) = rescale_bridge(&m, &a)?;
                    terms.bridge = Some(class_sums(&phi, bridge_cache.labels(), None, w.num_classes()));
                    terms.rescale = Some(range);
                }
                terms.cache = Some(class_sums(&a, affinity_cache.labels(), None, w.num_classes()));
            }
            Method::Ape | Method::ApePlus => {
                let mask = inputs.mask.ok_or(invalid("mask", "APE needs a channel mask"))?;
                let cache = cache_orig.ok_or(invalid("cache", "APE needs the original cache"))?;
                check_cache(test, cache, w)?;
                if mask.dim() != w.dim() {
                    return Err(Error::DimensionMismatch {
                        context: "channel mask vs feature dimension",
                        left: mask.dim(),
                        right: w.dim(),
                    });
                }
                let idx = mask.indices();
                let w_ref = w.refine(idx)?;
                let keys_ref = cache.refine(idx)?;
                let pred = softmax_rows(&cosine_matrix(keys_ref.keys(), w_ref.weights())?)?;
                let weights = ape_weights(&pred, cache.labels(), hp.gamma_ape)?;
                let test_ref = affinity_test.refine(idx)?;
                let aff_keys_ref = if method.is_plus() {
                    affinity_cache.refine(idx)?
                } else {
                    keys_ref
                };
                let a = affinity(&cosine_matrix(test_ref.vectors(), aff_keys_ref.keys())?, hp.beta)?;
                terms.cache = Some(class_sums(&a, cache.labels(), Some(&weights), w.num_classes()));
                terms.ape_weights = Some(weights);
            }
        }
        Ok(terms)
    }

    /// `clip + α·cache + γ·bridge`, in that order.
    pub(crate) fn combine(&self, alpha: f64, gamma: f64) -> Mat<f64> {
        let mut out = self.clip.clone();
        if let Some(cache) = &self.cache {
            add_scaled(&mut out, cache, alpha);
        }
        if let Some(bridge) = &self.bridge {
            add_scaled(&mut out, bridge, gamma);
        }
        out
    }

    fn bundle(self, method: Method, hp: &HyperParams) -> LogitsBundle {
        let logits = self.combine(hp.alpha, hp.gamma);
        let breakdown = Breakdown {
            cache: self.cache.as_ref().map(|c| c.map(|v| hp.alpha * v)),
            kl_bridge: self.bridge.as_ref().map(|b| b.map(|v| hp.gamma * v)),
            clip: self.clip,
        };
        LogitsBundle {
            logits,
            method,
            hyper: *hp,
            breakdown: Some(breakdown),
            rescale: self.rescale,
            ape_weights: self.ape_weights,
        }
    }
}

fn add_scaled(out: &mut Mat<f64>, term: &Mat<f64>, scale: f64) {
    for r in 0..out.rows() {
        for (o, t) in out.row_mut(r).iter_mut().zip(term.row(r)) {
            *o += scale * *t;
        }
    }
}

fn clip_term(test: &EmbeddingSet, w: &TextClassifier) -> Result<Mat<f64>> {
    test.require_normalized("test embeddings")?;
    if test.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            context: "test vs classifier dimension",
            left: test.dim(),
            right: w.dim(),
        });
    }
    if test.num_classes() != w.num_classes() {
        return Err(Error::DimensionMismatch {
            context: "test classes vs classifier classes",
            left: test.num_classes(),
            right: w.num_classes(),
        });
    }
    cosine_matrix(test.vectors(), w.weights())
}

fn check_cache(test: &EmbeddingSet, cache: &CacheModel, w: &TextClassifier) -> Result<()> {
    test.require_normalized("query embeddings")?;
    if cache.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            context: "cache vs query dimension",
            left: cache.dim(),
            right: test.dim(),
        });
    }
    if cache.num_classes() != w.num_classes() {
        return Err(Error::DimensionMismatch {
            context: "cache classes vs classifier classes",
            left: cache.num_classes(),
            right: w.num_classes(),
        });
    }
    Ok(())
}

fn check_alignment(orig: &EmbeddingSet, adapted: &EmbeddingSet) -> Result<()> {
    if orig.rows() != adapted.rows() {
        return Err(Error::DimensionMismatch {
            context: "original vs adapted test rows",
            left: orig.rows(),
            right: adapted.rows(),
        });
    }
    Ok(())
}

/// `out[i][c] = Σ_{k: label_k = c} weight_k · sim[i][k]`, summed in key order.
fn class_sums(sim: &Mat<f64>, labels: &[usize], weights: Option<&[f64]>, num_classes: usize) -> Mat<f64> {
    let mut out = Mat::zeros(sim.rows(), num_classes);
    for i in 0..sim.rows() {
        let src = sim.row(i);
        let dst = out.row_mut(i);
        match weights {
            Some(w) => {
                for ((&a, &label), &wk) in src.iter().zip(labels).zip(w) {
                    dst[label] += a * wk;
                }
            }
            None => {
                for (&a, &label) in src.iter().zip(labels) {
                    dst[label] += a;
                }
            }
        }
    }
    out
}

/// `M[i][j] = KL(softmax(T_i Wᵀ) ‖ softmax(F_j Wᵀ))`.
pub fn kl_bridge_matrix(test: &EmbeddingSet, cache: &CacheModel, w: &TextClassifier) -> Result<Mat<f64>> {
    let s_test = softmax_rows(&cosine_matrix(test.vectors(), w.weights())?)?;
    let s_train = softmax_rows(&cosine_matrix(cache.keys(), w.weights())?)?;
    let mut m = Mat::zeros(s_test.rows(), s_train.rows());
    for i in 0..s_test.rows() {
        let p = s_test.row(i).values();
        for j in 0..s_train.rows() {
            m.set(i, j, kl_unchecked(p, s_train.row(j).values(), KL_EPSILON));
        }
    }
    Ok(m)
}

/// `φ(-M)`: `-M` mapped onto the global range of the affinity matrix.
fn rescale_bridge(m: &Mat<f64>, affinity: &Mat<f64>) -> Result<(Mat<f64>, RescaleRange)> {
    let (lo, hi) = affinity.min_max().ok_or(Error::EmptyInput("affinity matrix"))?;
    let neg = m.map(|v| -v);
    if lo == hi {
        return Ok((
            neg.map(|_| lo),
            RescaleRange {
                target_min: lo,
                target_max: hi,
                degenerate: true,
            },
        ));
    }
    let r = minmax_rescale(&neg, lo, hi)?;
    Ok((
        r.values,
        RescaleRange {
            target_min: lo,
            target_max: hi,
            degenerate: r.degenerate,
        },
    ))
}

/// `w_k = exp(γ_ape · CE_k)` with `CE_k = -ln max(p_k[y_k], 1e-12)`.
pub fn ape_weights(pred: &ProbabilityMatrix, labels: &[usize], gamma_ape: f64) -> Result<Vec<f64>> {
    if pred.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "APE predictions vs cache labels",
            left: pred.rows(),
            right: labels.len(),
        });
    }
    labels
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let row = pred.row(k).values();
            let p = *row.get(y).ok_or(Error::LabelOutOfRange {
                row: k,
                label: y,
                num_classes: row.len(),
            })?;
            let ce = -libm::log(p.max(APE_PROB_FLOOR));
            Ok(libm::exp(gamma_ape * ce))
        })
        .collect()
}

/// Scores every channel of `W` and keeps the top `Q`.
///
/// `score_c = λ·z(var_c) − (1−λ)·z(sim_c)`, where `var_c` is the population
/// variance of column `c` across classes, `sim_c` the mean over ordered class
/// pairs `i ≠ j` of `W_ic·W_jc`, and `z` the population z-score across
/// channels (zero when the criterion is constant). Ties keep the lower index.
pub fn ape_refine(w: &TextClassifier, hp: &HyperParams) -> Result<ChannelMask> {
    let d = w.dim();
    let q = hp.budget_for(d);
    if q == 0 || q > d {
        return Err(invalid("channel_budget", alloc::format!("need 1 <= Q <= {d}, got {q}")));
    }
    if !(0.0..=1.0).contains(&hp.lambda_mix) {
        return Err(invalid("lambda_mix", "must lie in [0, 1]"));
    }
    let n = w.num_classes() as f64;
    let weights = w.weights();
    let mut var = Vec::with_capacity(d);
    let mut sim = Vec::with_capacity(d);
    for c in 0..d {
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for r in 0..w.num_classes() {
            let x = f64::from(weights.get(r, c));
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n;
        var.push((sum_sq / n - mean * mean).max(0.0));
        sim.push(if w.num_classes() > 1 {
            (sum * sum - sum_sq) / (n * (n - 1.0))
        } else {
            0.0
        });
    }
    let (zv, zs) = (z_scores(&var), z_scores(&sim));
    let lambda = hp.lambda_mix;
    let scores: Vec<f64> = zv
        .iter()
        .zip(&zs)
        .map(|(v, s)| lambda * v - (1.0 - lambda) * s)
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = order[..q].to_vec();
    keep.sort_unstable();
    ChannelMask::new(keep, scores)
}

fn z_scores(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    if sd <= f64::EPSILON * mean.abs().max(1.0) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / sd).collect()
}
