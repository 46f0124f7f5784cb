//! Seeded synthetic embedding datasets with controllable overlap.
//!
//! Class centers are unit vectors `normalize(ρ g_c + (1 − ρ) u)` around a
//! shared direction `u`, so small `ρ` packs the classes into a narrow cone.
//! Items are `normalize(center + z / κ)` with `z` standard normal per
//! coordinate; text rows are `normalize(center + τ z)`.
//!
//! Draw order is fixed: shared direction, class directions, text noise, then
//! the train, val and test items class by class. A paired generation reuses
//! each item's `z` for both concentrations, so row `i` of the original and
//! adapted sets is the same latent item.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embedding::{numbered_class_names, EmbeddingSet, TextClassifier};
use crate::error::{invalid, Result};
use crate::matrix::Mat;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub dim: usize,
    /// Intra-class concentration; larger means tighter clusters.
    pub kappa: f64,
    /// Class-center dispersion in `(0, 1]`.
    pub rho: f64,
    /// Text-alignment noise.
    pub tau: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 8,
            train_per_class: 16,
            val_per_class: 10,
            test_per_class: 50,
            dim: 32,
            kappa: 4.0,
            rho: 0.6,
            tau: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(invalid("num_classes", "need at least 2 classes"));
        }
        if self.dim < 2 {
            return Err(invalid("dim", "need at least 2 dimensions"));
        }
        if self.train_per_class == 0 || self.val_per_class == 0 || self.test_per_class == 0 {
            return Err(invalid("per_class", "every split needs at least one item per class"));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(invalid("kappa", "must be positive"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid("rho", "must lie in (0, 1]"));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(invalid("tau", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplits {
    pub train: EmbeddingSet,
    pub val: EmbeddingSet,
    pub test: EmbeddingSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub splits: SynthSplits,
    pub text: TextClassifier,
}

/// Original and adapted encodings of the same latent items.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub original: SynthData,
    pub adapted: SynthSplits,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let (original, _) = run(spec, None)?;
    Ok(original)
}

/// Same items encoded with concentrations `κ` and `kappa_adapted > κ`.
pub fn generate_pair(spec: &SynthSpec, kappa_adapted: f64) -> Result<SynthPair> {
    spec.validate()?;
    if !(kappa_adapted.is_finite() && kappa_adapted > spec.kappa) {
        return Err(invalid(
            "kappa_adapted",
            "must exceed kappa so adaptation tightens the clusters",
        ));
    }
    let (original, adapted) = run(spec, Some(kappa_adapted))?;
    Ok(SynthPair {
        original,
        adapted: adapted.expect("paired run yields adapted splits"),
    })
}

fn run(spec: &SynthSpec, kappa_adapted: Option<f64>) -> Result<(SynthData, Option<SynthSplits>)> {
    let d = spec.dim;
    let n = spec.num_classes;
    let mut rng = SeededRng::new(spec.seed);
    let shared = unit_gaussian(&mut rng, d);
    let centers: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let g = unit_gaussian(&mut rng, d);
            let mixed: Vec<f64> = g
                .iter()
                .zip(&shared)
                .map(|(gi, si)| spec.rho * gi + (1.0 - spec.rho) * si)
                .collect();
            normalized(&mixed)
        })
        .collect();
    let text_rows: Vec<Vec<f32>> = centers
        .iter()
        .map(|c| perturbed(c, &gaussian(&mut rng, d), spec.tau))
        .collect();
    let names = numbered_class_names(n);
    let text = TextClassifier::new(Mat::from_rows(&text_rows)?, names.clone())?;

    let mut orig_splits = Vec::with_capacity(3);
    let mut adapted_splits = Vec::with_capacity(3);
    for per_class in [spec.train_per_class, spec.val_per_class, spec.test_per_class] {
        let mut orig = Vec::with_capacity(n * per_class);
        let mut adapted = Vec::new();
        let mut labels = Vec::with_capacity(n * per_class);
        for (class, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                let z = gaussian(&mut rng, d);
                orig.push(perturbed(center, &z, 1.0 / spec.kappa));
                if let Some(ka) = kappa_adapted {
                    adapted.push(perturbed(center, &z, 1.0 / ka));
                }
                labels.push(class);
            }
        }
        orig_splits.push(EmbeddingSet::new(Mat::from_rows(&orig)?, labels.clone(), names.clone())?);
        if kappa_adapted.is_some() {
            adapted_splits.push(EmbeddingSet::new(Mat::from_rows(&adapted)?, labels, names.clone())?);
        }
    }
    let into_splits = |mut v: Vec<EmbeddingSet>| {
        let test = v.pop().expect("three splits");
        let val = v.pop().expect("three splits");
        let train = v.pop().expect("three splits");
        SynthSplits { train, val, test }
    };
    let adapted = kappa_adapted.map(|_| into_splits(adapted_splits));
    Ok((
        SynthData {
            splits: into_splits(orig_splits),
            text,
        },
        adapted,
    ))
}

fn gaussian(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.standard_normal()).collect()
}

fn unit_gaussian(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    loop {
        let g = gaussian(rng, d);
        if g.iter().any(|&x| x != 0.0) {
            return normalized(&g);
        }
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    v.iter().map(|x| x / norm).collect()
}

/// `normalize(center + scale * z)` as f32.
fn perturbed(center: &[f64], z: &[f64], scale: f64) -> Vec<f32> {
    let raw: Vec<f64> = center.iter().zip(z).map(|(c, zi)| c + scale * zi).collect();
    let norm = libm::sqrt(raw.iter().map(|x| x * x).sum::<f64>());
    if norm == 0.0 {
        return center.iter().map(|&c| c as f32).collect();
    }
    raw.iter().map(|x| (x / norm) as f32).collect()
}
