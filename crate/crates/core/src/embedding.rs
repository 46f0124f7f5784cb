//! Labeled embedding matrices, zero-shot text classifiers and few-shot caches.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{l2_norm, normalize_rows, Mat};

/// Maximum deviation of a row norm from 1 for the row to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-5;

/// A labeled matrix of embedding vectors.
///
/// `normalized` is derived from the data at construction and is true exactly
/// when every row has unit L2 norm within [`NORM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    vectors: Mat<f32>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    normalized: bool,
}

impl EmbeddingSet {
    pub fn new(vectors: Mat<f32>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if vectors.rows() == 0 || vectors.cols() == 0 {
            return Err(Error::InvalidShape(format!(
                "embedding set needs rows >= 1 and dim >= 1, got {}x{}",
                vectors.rows(),
                vectors.cols()
            )));
        }
        if labels.len() != vectors.rows() {
            return Err(Error::DimensionMismatch {
                context: "label count vs rows",
                left: labels.len(),
                right: vectors.rows(),
            });
        }
        check_class_names(&class_names)?;
        if let Some((row, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l >= class_names.len())
        {
            return Err(Error::LabelOutOfRange {
                row,
                label,
                num_classes: class_names.len(),
            });
        }
        if vectors.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vectors"));
        }
        let normalized = rows_are_unit(&vectors);
        Ok(Self {
            vectors,
            labels,
            class_names,
            normalized,
        })
    }

    /// Same as [`EmbeddingSet::new`] after L2-normalizing every row.
    pub fn new_normalized(
        vectors: Mat<f32>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        Self::new(normalize_rows(&vectors), labels, class_names)
    }

    pub fn vectors(&self) -> &Mat<f32> {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn rows(&self) -> usize {
        self.vectors.rows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn require_normalized(&self, what: &'static str) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized(what))
        }
    }

    /// Row indices of every class, ascending within each class.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_classes()];
        for (row, &label) in self.labels.iter().enumerate() {
            members[label].push(row);
        }
        members
    }

    /// Subset of rows, keeping the class table.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= self.rows()) {
            return Err(Error::IndexOutOfRange {
                index,
                rows: self.rows(),
            });
        }
        Self::new(
            self.vectors.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.class_names.clone(),
        )
    }

    /// Keeps only the given channels and re-normalizes every row.
    pub fn refine(&self, channels: &[usize]) -> Result<Self> {
        check_channels(channels, self.dim())?;
        Self::new(
            normalize_rows(&self.vectors.select_cols(channels)),
            self.labels.clone(),
            self.class_names.clone(),
        )
    }

    /// Same rows relabeled into another class vocabulary.
    pub fn relabel(&self, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        Self::new(self.vectors.clone(), labels, class_names)
    }
}

/// The `N x d` zero-shot weight matrix, one unit row per class prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct TextClassifier {
    weights: Mat<f32>,
    class_names: Vec<String>,
}

impl TextClassifier {
    pub fn new(weights: Mat<f32>, class_names: Vec<String>) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::InvalidShape("text classifier needs N >= 1 and d >= 1".into()));
        }
        if weights.rows() != class_names.len() {
            return Err(Error::DimensionMismatch {
                context: "classifier rows vs class names",
                left: weights.rows(),
                right: class_names.len(),
            });
        }
        check_class_names(&class_names)?;
        if weights.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("classifier weights"));
        }
        if !rows_are_unit(&weights) {
            return Err(Error::NotNormalized("text classifier rows"));
        }
        Ok(Self {
            weights,
            class_names,
        })
    }

    /// Interprets an embedding set with one row per class, row `i` labeled `i`.
    pub fn from_embedding_set(set: &EmbeddingSet) -> Result<Self> {
        if set.rows() != set.num_classes() {
            return Err(Error::DimensionMismatch {
                context: "text embedding rows vs class count",
                left: set.rows(),
                right: set.num_classes(),
            });
        }
        if let Some((row, &label)) = set.labels().iter().enumerate().find(|(i, &l)| *i != l) {
            return Err(Error::InvalidShape(format!(
                "text embedding row {row} carries label {label}; rows must be in class order"
            )));
        }
        Self::new(set.vectors().clone(), set.class_names().to_vec())
    }

    /// The classifier as an embedding set (row `i` labeled `i`).
    pub fn to_embedding_set(&self) -> EmbeddingSet {
        EmbeddingSet::new(
            self.weights.clone(),
            (0..self.num_classes()).collect(),
            self.class_names.clone(),
        )
        .expect("classifier invariants imply embedding-set invariants")
    }

    pub fn weights(&self) -> &Mat<f32> {
        &self.weights
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    /// Keeps only the given channels and re-normalizes every row.
    pub fn refine(&self, channels: &[usize]) -> Result<Self> {
        check_channels(channels, self.dim())?;
        Self::new(
            normalize_rows(&self.weights.select_cols(channels)),
            self.class_names.clone(),
        )
    }
}

/// Key-value cache of `N*K` few-shot embeddings and their one-hot labels.
///
/// Keys are ordered class-major; `values()` materializes the one-hot matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheModel {
    keys: Mat<f32>,
    labels: Vec<usize>,
    num_classes: usize,
    shots: usize,
}

impl CacheModel {
    pub fn keys(&self) -> &Mat<f32> {
        &self.keys
    }

    /// Class index of every key row.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn dim(&self) -> usize {
        self.keys.cols()
    }

    pub fn len(&self) -> usize {
        self.keys.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.rows() == 0
    }

    /// One-hot `N*K x N` value matrix.
    pub fn values(&self) -> Mat<f64> {
        let mut v = Mat::zeros(self.len(), self.num_classes);
        for (row, &label) in self.labels.iter().enumerate() {
            v.set(row, label, 1.0);
        }
        v
    }

    /// Keeps only the given key channels and re-normalizes every key.
    pub fn refine(&self, channels: &[usize]) -> Result<Self> {
        check_channels(channels, self.dim())?;
        Ok(Self {
            keys: normalize_rows(&self.keys.select_cols(channels)),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            shots: self.shots,
        })
    }
}

/// Builds the key-value cache from the selected training rows.
///
/// Keys are grouped by class (ascending); within a class they keep the order
/// in which they appear in `shot_indices`.
pub fn build_cache(train: &EmbeddingSet, shot_indices: &[usize]) -> Result<CacheModel> {
    train.require_normalized("training embeddings")?;
    let num_classes = train.num_classes();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    let mut seen = BTreeSet::new();
    for &index in shot_indices {
        if index >= train.rows() {
            return Err(Error::IndexOutOfRange {
                index,
                rows: train.rows(),
            });
        }
        if !seen.insert(index) {
            return Err(Error::DuplicateIndex(index));
        }
        per_class[train.labels()[index]].push(index);
    }
    let shots = per_class[0].len();
    if shots == 0 {
        return Err(Error::UnequalShots {
            class: 0,
            found: 0,
            expected: 1,
        });
    }
    if let Some((class, found)) = per_class
        .iter()
        .map(Vec::len)
        .enumerate()
        .find(|&(_, n)| n != shots)
    {
        return Err(Error::UnequalShots {
            class,
            found,
            expected: shots,
        });
    }
    let order: Vec<usize> = per_class.into_iter().flatten().collect();
    Ok(CacheModel {
        keys: train.vectors().select_rows(&order),
        labels: order.iter().map(|&i| train.labels()[i]).collect(),
        num_classes,
        shots,
    })
}

fn rows_are_unit(m: &Mat<f32>) -> bool {
    m.iter_rows()
        .all(|r| (l2_norm(r) - 1.0).abs() <= NORM_TOLERANCE)
}

fn check_class_names(names: &[String]) -> Result<()> {
    if names.is_empty() {
        return Err(Error::InvalidClassNames("no classes".into()));
    }
    let mut seen = BTreeSet::new();
    for name in names {
        if name.is_empty() {
            return Err(Error::InvalidClassNames("empty class name".into()));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::InvalidClassNames(format!("duplicate class name {name:?}")));
        }
    }
    Ok(())
}

pub(crate) fn check_channels(channels: &[usize], dim: usize) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::EmptyInput("channel selection"));
    }
    if channels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidShape(
            "channel indices must be strictly increasing".into(),
        ));
    }
    if let Some(&c) = channels.last().filter(|&&c| c >= dim) {
        return Err(Error::IndexOutOfRange { index: c, rows: dim });
    }
    Ok(())
}

/// Class names `class_000`, `class_001`, ...
pub fn numbered_class_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("class_{i:03}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_set(rows: &[[f32; 2]], labels: &[usize], classes: usize) -> EmbeddingSet {
        EmbeddingSet::new_normalized(
            Mat::from_rows(rows).unwrap(),
            labels.to_vec(),
            numbered_class_names(classes),
        )
        .unwrap()
    }

    #[test]
    fn label_out_of_range_rejected() {
        let err = EmbeddingSet::new(
            Mat::from_rows(&[[1.0f32, 0.0], [0.0, 1.0]]).unwrap(),
            vec![0, 2],
            numbered_class_names(2),
        )
        .unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { row: 1, label: 2, .. }));
    }

    #[test]
    fn class_names_must_be_unique_and_non_empty() {
        let m = Mat::from_rows(&[[1.0f32, 0.0]]).unwrap();
        assert!(EmbeddingSet::new(m.clone(), vec![0], vec!["a".into(), "a".into()]).is_err());
        assert!(EmbeddingSet::new(m, vec![0], vec![String::new()]).is_err());
    }

    #[test]
    fn normalized_flag_follows_data() {
        let unit = EmbeddingSet::new(
            Mat::from_rows(&[[0.6f32, 0.8]]).unwrap(),
            vec![0],
            numbered_class_names(1),
        )
        .unwrap();
        assert!(unit.is_normalized());
        let long = EmbeddingSet::new(
            Mat::from_rows(&[[2.0f32, 0.0]]).unwrap(),
            vec![0],
            numbered_class_names(1),
        )
        .unwrap();
        assert!(!long.is_normalized());
    }

    #[test]
    fn one_shot_two_classes_gives_identity_values() {
        let set = unit_set(
            &[[1.0, 0.0], [0.9, 0.1], [0.1, 0.9], [0.0, 1.0]],
            &[0, 0, 1, 1],
            2,
        );
        let cache = build_cache(&set, &[0, 3]).unwrap();
        assert_eq!(cache.values().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(cache.shots(), 1);
    }

    #[test]
    fn three_classes_two_shots_counts() {
        let rows: Vec<[f32; 2]> = (0..30).map(|i| [1.0, i as f32 * 0.1]).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let set = unit_set(&rows, &labels, 3);
        let cache = build_cache(&set, &[0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!((cache.keys().rows(), cache.keys().cols()), (6, 2));
        let v = cache.values();
        assert_eq!((v.rows(), v.cols()), (6, 3));
        for c in 0..3 {
            let col_sum: f64 = (0..6).map(|r| v.get(r, c)).sum();
            assert_eq!(col_sum, 2.0);
        }
        // class-major: rows 0,3 then 1,4 then 2,5
        assert_eq!(cache.labels(), &[0, 0, 1, 1, 2, 2]);
        assert_eq!(cache.keys().row(1), set.vectors().row(3));
    }

    #[test]
    fn duplicate_and_unequal_shots_rejected() {
        let set = unit_set(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], &[0, 1, 1], 2);
        assert_eq!(build_cache(&set, &[0, 0]).unwrap_err(), Error::DuplicateIndex(0));
        assert!(matches!(
            build_cache(&set, &[0, 1, 2]).unwrap_err(),
            Error::UnequalShots { class: 1, found: 2, expected: 1 }
        ));
        assert!(matches!(
            build_cache(&set, &[0, 7]).unwrap_err(),
            Error::IndexOutOfRange { index: 7, .. }
        ));
    }

    #[test]
    fn refine_renormalizes() {
        let set = unit_set(&[[0.6, 0.8]], &[0], 1);
        let wide = EmbeddingSet::new_normalized(
            Mat::from_rows(&[[0.5f32, 0.5, 0.5, 0.5]]).unwrap(),
            vec![0],
            numbered_class_names(1),
        )
        .unwrap();
        let r = wide.refine(&[0, 2]).unwrap();
        assert!(r.is_normalized());
        assert_eq!(r.dim(), 2);
        assert!(set.refine(&[1, 0]).is_err());
        assert!(set.refine(&[2]).is_err());
    }

    #[test]
    fn text_classifier_requires_unit_rows() {
        let m = Mat::from_rows(&[[2.0f32, 0.0]]).unwrap();
        assert_eq!(
            TextClassifier::new(m, numbered_class_names(1)).unwrap_err(),
            Error::NotNormalized("text classifier rows")
        );
    }
}
