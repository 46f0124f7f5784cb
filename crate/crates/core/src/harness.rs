//! Few-shot evaluation protocol over in-memory datasets.
//!
//! A run is split into groups, one per `(shots, method)`. A group samples the
//! shots for every seed, builds the original (and adapted) caches, tunes the
//! method once on the validation split and scores each seed on the test
//! split. Groups are independent; [`assemble_dataset_report`] merges them in a
//! fixed order so the report does not depend on evaluation order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifiers::{ape_refine, ChannelMask, HyperParams, Method, MethodInputs, UnitTerms};
use crate::embedding::{build_cache, CacheModel, EmbeddingSet, TextClassifier};
use crate::error::{invalid, Error, Result};
use crate::matrix::{argmax, Mat};
use crate::metrics::{imo_intersection, pearson, linear_fit, FeatureVariance, ImoReport, PadReport};
use crate::rng::SeededRng;

/// `K` row indices per class, class by class, ascending within each class.
pub fn sample_shots(train: &EmbeddingSet, shots: usize, seed: u64) -> Result<Vec<usize>> {
    if shots == 0 {
        return Err(invalid("shots", "must be at least 1"));
    }
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::with_capacity(shots * train.num_classes());
    for (class, members) in train.class_members().into_iter().enumerate() {
        if members.len() < shots {
            return Err(Error::InsufficientItems {
                class,
                available: members.len(),
                requested: shots,
            });
        }
        let mut pick: Vec<usize> = rng
            .sample_indices(members.len() as u64, shots as u64)
            .into_iter()
            .map(|i| members[i as usize])
            .collect();
        pick.sort_unstable();
        out.extend(pick);
    }
    Ok(out)
}

/// Number of rows whose argmax (lowest index on ties) equals the label.
pub fn correct_count(logits: &Mat<f64>, labels: &[usize]) -> Result<usize> {
    if logits.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "logit rows vs labels",
            left: logits.rows(),
            right: labels.len(),
        });
    }
    Ok(logits
        .iter_rows()
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count())
}

/// Percentage of rows classified correctly.
pub fn accuracy(logits: &Mat<f64>, labels: &[usize]) -> Result<f64> {
    let correct = correct_count(logits, labels)?;
    if labels.is_empty() {
        return Err(Error::EmptyInput("accuracy labels"));
    }
    Ok(100.0 * correct as f64 / labels.len() as f64)
}

/// Hyperparameter grid; each method searches only the axes it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            alpha: steps(0.0, 5.0, 0.25),
            beta: steps(1.0, 10.0, 0.5),
            gamma: steps(0.0, 5.0, 0.25),
        }
    }
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = libm::round((hi - lo) / step) as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

impl Grid {
    pub fn single(hp: &HyperParams) -> Self {
        Self {
            alpha: alloc::vec![hp.alpha],
            beta: alloc::vec![hp.beta],
            gamma: alloc::vec![hp.gamma],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, name) in [(&self.alpha, "alpha grid"), (&self.beta, "beta grid"), (&self.gamma, "gamma grid")] {
            if axis.is_empty() {
                return Err(Error::EmptyInput(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub hyper: HyperParams,
    pub val_accuracy: f64,
}

/// Exhaustive search maximizing validation accuracy.
///
/// Ties go to the lexicographically smallest `(α, β, γ)`. Axes a method does
/// not read keep the value from `base`.
pub fn grid_search(
    method: Method,
    val: &MethodInputs<'_>,
    base: &HyperParams,
    grid: &Grid,
) -> Result<SearchResult> {
    grid_search_joint(method, core::slice::from_ref(val), base, grid)
}

/// [`grid_search`] scoring each point by its correct count summed over
/// several validation inputs (one per seed's cache).
pub fn grid_search_joint(
    method: Method,
    vals: &[MethodInputs<'_>],
    base: &HyperParams,
    grid: &Grid,
) -> Result<SearchResult> {
    base.validate()?;
    if vals.is_empty() {
        return Err(Error::EmptyInput("validation inputs"));
    }
    let alphas: &[f64] = if method.uses_cache() { &grid.alpha } else { core::slice::from_ref(&base.alpha) };
    let betas: &[f64] = if method.uses_cache() { &grid.beta } else { core::slice::from_ref(&base.beta) };
    let gammas: &[f64] = if method.uses_gamma() { &grid.gamma } else { core::slice::from_ref(&base.gamma) };
    for (axis, name) in [(alphas, "alpha grid"), (betas, "beta grid"), (gammas, "gamma grid")] {
        if axis.is_empty() {
            return Err(Error::EmptyInput(name));
        }
    }
    let total: usize = vals.iter().map(|v| v.test.rows()).sum();
    let mut best: Option<(usize, HyperParams)> = None;
    for &beta in betas {
        let probe = HyperParams { beta, ..*base };
        probe.validate()?;
        let terms = vals
            .iter()
            .map(|v| UnitTerms::compute(method, v, &probe))
            .collect::<Result<Vec<_>>>()?;
        for &alpha in alphas {
            for &gamma in gammas {
                let hp = HyperParams { alpha, beta, gamma, ..*base };
                hp.validate()?;
                let mut correct = 0;
                for (t, v) in terms.iter().zip(vals) {
                    correct += correct_count(&t.combine(alpha, gamma), v.test.labels())?;
                }
                let better = match &best {
                    None => true,
                    Some((c, b)) => {
                        correct > *c
                            || (correct == *c && lex_less((alpha, beta, gamma), (b.alpha, b.beta, b.gamma)))
                    }
                };
                if better {
                    best = Some((correct, hp));
                }
            }
        }
    }
    let (correct, hyper) = best.expect("non-empty grid");
    Ok(SearchResult {
        hyper,
        val_accuracy: 100.0 * correct as f64 / total as f64,
    })
}

fn lex_less(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
    a.0.total_cmp(&b.0)
        .then(a.1.total_cmp(&b.1))
        .then(a.2.total_cmp(&b.2))
        .is_lt()
}

/// Adapted-encoder counterparts of a dataset's splits, row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedSplits {
    pub train: EmbeddingSet,
    pub val: Option<EmbeddingSet>,
    pub test: EmbeddingSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    pub train: EmbeddingSet,
    pub val: Option<EmbeddingSet>,
    pub test: EmbeddingSet,
    pub text: TextClassifier,
    pub adapted: Option<AdaptedSplits>,
}

impl DatasetBundle {
    fn check_alignment(&self) -> Result<()> {
        let Some(a) = &self.adapted else { return Ok(()) };
        let pairs = [
            (Some(&self.train), Some(&a.train), "train"),
            (self.val.as_ref(), a.val.as_ref(), "val"),
            (Some(&self.test), Some(&a.test), "test"),
        ];
        for (o, ad, split) in pairs {
            if let (Some(o), Some(ad)) = (o, ad) {
                if o.labels() != ad.labels() || o.class_names() != ad.class_names() {
                    return Err(Error::InvalidShape(format!(
                        "{}: original and adapted {split} splits are not row-aligned",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What to run over each dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub methods: Vec<Method>,
    pub shots: Vec<usize>,
    pub seeds: Vec<u64>,
    pub grid: Grid,
    /// Tune on the validation split; otherwise use `hyper` as is.
    pub search: bool,
    /// Fixed hyperparameters, and the source of `gamma_ape`,
    /// `channel_budget` and `lambda_mix` during search.
    pub hyper: HyperParams,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            shots: alloc::vec![1, 2, 4, 8, 16],
            seeds: alloc::vec![1, 2, 3],
            grid: Grid::default(),
            search: true,
            hyper: HyperParams::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::EmptyInput("methods"));
        }
        if self.shots.is_empty() || self.shots.contains(&0) {
            return Err(invalid("shots", "need a non-empty list of counts >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::EmptyInput("seeds"));
        }
        self.grid.validate()?;
        self.hyper.validate()
    }

    /// Fails before any computation when a dataset cannot support the plan.
    pub fn check_dataset(&self, data: &DatasetBundle) -> Result<()> {
        self.validate()?;
        data.check_alignment()?;
        let max_shots = *self.shots.iter().max().expect("validated non-empty");
        for (class, members) in data.train.class_members().iter().enumerate() {
            if members.len() < max_shots {
                return Err(Error::InsufficientItems {
                    class,
                    available: members.len(),
                    requested: max_shots,
                });
            }
        }
        for &m in &self.methods {
            if m.is_plus() {
                let a = data.adapted.as_ref().ok_or(Error::MissingAdapted(m.tag()))?;
                if self.search && a.val.is_none() {
                    return Err(Error::MissingAdapted(m.tag()));
                }
            }
        }
        if self.search && data.val.is_none() && self.methods.iter().any(|m| m.uses_cache()) {
            return Err(invalid("val", format!("{}: search needs a validation split", data.name)));
        }
        Ok(())
    }

    /// APE channel mask for a dataset, when any APE method is planned.
    pub fn mask_for(&self, data: &DatasetBundle) -> Result<Option<ChannelMask>> {
        if self.methods.iter().any(|m| m.uses_mask()) {
            ape_refine(&data.text, &self.hyper).map(Some)
        } else {
            Ok(None)
        }
    }
}

/// Accuracy of one method at one `(shots, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub shots: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub hyper: HyperParams,
    pub val_accuracy: Option<f64>,
}

/// A test split to score, with its adapted counterpart when available.
#[derive(Debug, Clone, Copy)]
pub struct EvalTarget<'a> {
    pub test: &'a EmbeddingSet,
    pub test_adapted: Option<&'a EmbeddingSet>,
}

/// Caches for one `(shots, seed)` draw.
struct Draw {
    seed: u64,
    cache: CacheModel,
    cache_adapted: Option<CacheModel>,
}

/// Runs one method at one shot count over every planned seed.
///
/// Hyperparameters are tuned once for the group, on validation correct
/// counts summed over the seeds, then applied to each seed's cache on every
/// target. Returns one result list per target, in seed order.
pub fn run_group(
    data: &DatasetBundle,
    plan: &ExperimentPlan,
    mask: Option<&ChannelMask>,
    method: Method,
    shots: usize,
    targets: &[EvalTarget<'_>],
) -> Result<Vec<Vec<CellResult>>> {
    let draws = plan
        .seeds
        .iter()
        .map(|&seed| {
            let indices = sample_shots(&data.train, shots, seed)?;
            let cache_adapted = match &data.adapted {
                Some(a) if method.is_plus() => Some(build_cache(&a.train, &indices)?),
                _ => None,
            };
            Ok(Draw {
                seed,
                cache: build_cache(&data.train, &indices)?,
                cache_adapted,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (hyper, val_accuracy) = if plan.search && method.uses_cache() {
        let val = data.val.as_ref().ok_or(invalid("val", "search needs a validation split"))?;
        let inputs: Vec<MethodInputs<'_>> = draws
            .iter()
            .map(|d| MethodInputs {
                test: val,
                text: &data.text,
                cache: Some(&d.cache),
                test_adapted: data.adapted.as_ref().and_then(|a| a.val.as_ref()),
                cache_adapted: d.cache_adapted.as_ref(),
                mask,
            })
            .collect();
        let r = grid_search_joint(method, &inputs, &plan.hyper, &plan.grid)?;
        (r.hyper, Some(r.val_accuracy))
    } else {
        (plan.hyper, None)
    };

    let mut out: Vec<Vec<CellResult>> = targets.iter().map(|_| Vec::with_capacity(draws.len())).collect();
    for d in &draws {
        for (target, results) in targets.iter().zip(out.iter_mut()) {
            let inputs = MethodInputs {
                test: target.test,
                text: &data.text,
                cache: Some(&d.cache),
                test_adapted: target.test_adapted,
                cache_adapted: d.cache_adapted.as_ref(),
                mask,
            };
            let logits = UnitTerms::compute(method, &inputs, &hyper)?.combine(hyper.alpha, hyper.gamma);
            results.push(CellResult {
                method,
                shots,
                seed: d.seed,
                accuracy: accuracy(&logits, target.test.labels())?,
                hyper,
                val_accuracy,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSummary {
    pub method: Method,
    pub shots: usize,
    /// Mean over seeds.
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Mean over shots of the per-shot means.
    pub mean_accuracy: f64,
}

/// `improved − baseline` accuracy, per shot and averaged over shots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub improved: Method,
    pub baseline: Method,
    pub per_shot: Vec<(usize, f64)>,
    pub overall: f64,
}

impl DeltaSummary {
    pub fn label(&self) -> String {
        format!("Δ({}, {})", self.improved.display_name(), self.baseline.display_name())
    }
}

/// The Δ columns of the result tables, in column order.
pub const DELTA_COLUMNS: [(Method, Method); 4] = [
    (Method::TipAdapterPlus, Method::TipAdapter),
    (Method::TipXPlus, Method::TipX),
    (Method::TipAdapterPlus, Method::TipX),
    (Method::ApePlus, Method::Ape),
];

/// Overlap of the original and (when present) adapted embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImoComparison {
    pub split: String,
    pub original: ImoReport,
    pub adapted: Option<ImoReport>,
}

impl ImoComparison {
    /// `area(original) − area(adapted)`.
    pub fn delta(&self) -> Option<f64> {
        self.adapted
            .as_ref()
            .map(|a| self.original.intersection_area - a.intersection_area)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSummary {
    pub split: String,
    pub original: FeatureVariance,
    pub adapted: Option<FeatureVariance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub name: String,
    pub cells: Vec<CellResult>,
    pub per_shot: Vec<ShotSummary>,
    pub overall: Vec<MethodSummary>,
    pub deltas: Vec<DeltaSummary>,
    pub imo: Option<ImoComparison>,
    pub pad: Option<PadReport>,
    pub variance: Option<VarianceSummary>,
}

impl DatasetReport {
    pub fn overall_of(&self, method: Method) -> Option<f64> {
        self.overall.iter().find(|s| s.method == method).map(|s| s.mean_accuracy)
    }

    pub fn shot_mean(&self, method: Method, shots: usize) -> Option<f64> {
        self.per_shot
            .iter()
            .find(|s| s.method == method && s.shots == shots)
            .map(|s| s.mean_accuracy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub files: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub plan: ExperimentPlan,
    /// Granularity at which hyperparameters were tuned.
    pub tuning: String,
    pub datasets: Vec<DatasetReport>,
    pub provenance: Option<Provenance>,
}

pub const TUNING_PER_DATASET_SHOT: &str = "per (dataset, shots): validation correct counts summed over seeds";
pub const TUNING_FIXED: &str = "fixed";

impl EvalReport {
    pub fn new(plan: &ExperimentPlan, datasets: Vec<DatasetReport>) -> Self {
        Self {
            tuning: String::from(if plan.search { TUNING_PER_DATASET_SHOT } else { TUNING_FIXED }),
            plan: plan.clone(),
            datasets,
            provenance: None,
        }
    }
}

/// Builds the aggregates of one dataset from its cells.
///
/// Cells are re-sorted into plan order (shots, seed, method) first, so any
/// evaluation order yields the same report.
pub fn assemble_dataset_report(name: &str, plan: &ExperimentPlan, mut cells: Vec<CellResult>) -> DatasetReport {
    let shot_pos = |s: usize| plan.shots.iter().position(|&x| x == s).unwrap_or(usize::MAX);
    let seed_pos = |s: u64| plan.seeds.iter().position(|&x| x == s).unwrap_or(usize::MAX);
    let method_pos = |m: Method| plan.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    cells.sort_by_key(|c| (shot_pos(c.shots), seed_pos(c.seed), method_pos(c.method)));

    let mut per_shot = Vec::new();
    let mut overall = Vec::new();
    for &method in &plan.methods {
        let mut shot_means = Vec::new();
        for &shots in &plan.shots {
            let accs: Vec<f64> = cells
                .iter()
                .filter(|c| c.method == method && c.shots == shots)
                .map(|c| c.accuracy)
                .collect();
            if accs.is_empty() {
                continue;
            }
            let mean = mean(&accs);
            shot_means.push(mean);
            per_shot.push(ShotSummary {
                method,
                shots,
                mean_accuracy: mean,
            });
        }
        if !shot_means.is_empty() {
            overall.push(MethodSummary {
                method,
                mean_accuracy: mean(&shot_means),
            });
        }
    }

    let lookup: BTreeMap<(Method, usize), f64> = per_shot.iter().map(|s| ((s.method, s.shots), s.mean_accuracy)).collect();
    let mut deltas = Vec::new();
    for (improved, baseline) in DELTA_COLUMNS {
        if !(plan.methods.contains(&improved) && plan.methods.contains(&baseline)) {
            continue;
        }
        let per: Vec<(usize, f64)> = plan
            .shots
            .iter()
            .filter_map(|&s| Some((s, lookup.get(&(improved, s))? - lookup.get(&(baseline, s))?)))
            .collect();
        let find = |m: Method| overall.iter().find(|x: &&MethodSummary| x.method == m).map(|x| x.mean_accuracy);
        if let (Some(a), Some(b)) = (find(improved), find(baseline)) {
            deltas.push(DeltaSummary {
                improved,
                baseline,
                per_shot: per,
                overall: a - b,
            });
        }
    }

    DatasetReport {
        name: String::from(name),
        cells,
        per_shot,
        overall,
        deltas,
        imo: None,
        pad: None,
        variance: None,
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Every `(shots, method)` group of a plan, in report order.
pub fn group_keys(plan: &ExperimentPlan) -> Vec<(usize, Method)> {
    plan.shots
        .iter()
        .flat_map(|&s| plan.methods.iter().map(move |&m| (s, m)))
        .collect()
}

/// Sequential run over in-memory datasets.
pub fn run_experiment(datasets: &[DatasetBundle], plan: &ExperimentPlan) -> Result<EvalReport> {
    for d in datasets {
        plan.check_dataset(d)?;
    }
    let mut reports = Vec::with_capacity(datasets.len());
    for d in datasets {
        let mask = plan.mask_for(d)?;
        let target = EvalTarget {
            test: &d.test,
            test_adapted: d.adapted.as_ref().map(|a| &a.test),
        };
        let mut cells = Vec::new();
        for (shots, method) in group_keys(plan) {
            let mut per_target = run_group(d, plan, mask.as_ref(), method, shots, &[target])?;
            cells.append(&mut per_target[0]);
        }
        reports.push(assemble_dataset_report(&d.name, plan, cells));
    }
    Ok(EvalReport::new(plan, reports))
}

/// A shifted test set for a robustness run, already in the source vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTarget {
    pub name: String,
    pub test: EmbeddingSet,
    pub test_adapted: Option<EmbeddingSet>,
}

/// Relabels `target` into the source vocabulary.
///
/// Each target class name is looked up in `mapping` (target → source) and
/// otherwise used verbatim.
pub fn map_to_source(
    target: &EmbeddingSet,
    source_classes: &[String],
    mapping: &BTreeMap<String, String>,
) -> Result<EmbeddingSet> {
    let index: BTreeMap<&str, usize> = source_classes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let class_map: Vec<usize> = target
        .class_names()
        .iter()
        .map(|name| {
            let source = mapping.get(name).unwrap_or(name);
            index
                .get(source.as_str())
                .copied()
                .ok_or_else(|| Error::UnmappableClass(name.clone()))
        })
        .collect::<Result<_>>()?;
    target.relabel(
        target.labels().iter().map(|&l| class_map[l]).collect(),
        source_classes.to_vec(),
    )
}

/// Tunes on the source and scores every method on each shifted target
/// without re-tuning; one dataset report per target.
pub fn robustness_run(source: &DatasetBundle, targets: &[ShiftTarget], plan: &ExperimentPlan) -> Result<EvalReport> {
    plan.check_dataset(source)?;
    for t in targets {
        if t.test.class_names() != source.text.class_names() {
            return Err(invalid("target", format!("{}: target is not in the source vocabulary", t.name)));
        }
        if plan.methods.iter().any(|m| m.is_plus()) && t.test_adapted.is_none() {
            return Err(Error::MissingAdapted("robustness target"));
        }
    }
    let mask = plan.mask_for(source)?;
    let eval_targets: Vec<EvalTarget<'_>> = targets
        .iter()
        .map(|t| EvalTarget {
            test: &t.test,
            test_adapted: t.test_adapted.as_ref(),
        })
        .collect();
    let mut cells: Vec<Vec<CellResult>> = targets.iter().map(|_| Vec::new()).collect();
    for (shots, method) in group_keys(plan) {
        let per_target = run_group(source, plan, mask.as_ref(), method, shots, &eval_targets)?;
        for (acc, mut c) in cells.iter_mut().zip(per_target) {
            acc.append(&mut c);
        }
    }
    let reports = targets
        .iter()
        .zip(cells)
        .map(|(t, c)| assemble_dataset_report(&t.name, plan, c))
        .collect();
    Ok(EvalReport::new(plan, reports))
}

/// Settings for overlap measurements inside a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImoSettings {
    pub pairs_per_class: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for ImoSettings {
    fn default() -> Self {
        Self {
            pairs_per_class: crate::metrics::DEFAULT_PAIRS,
            bins: crate::metrics::DEFAULT_BINS,
            seed: 0,
        }
    }
}

/// Overlap of the validation split (test split when there is none), for the
/// original and, when present, adapted encodings.
pub fn imo_comparison(data: &DatasetBundle, settings: &ImoSettings) -> Result<ImoComparison> {
    let (split, orig, adapted) = match &data.val {
        Some(v) => ("val", v, data.adapted.as_ref().and_then(|a| a.val.as_ref())),
        None => ("test", &data.test, data.adapted.as_ref().map(|a| &a.test)),
    };
    let measure = |s: &EmbeddingSet| imo_intersection(s, settings.pairs_per_class, settings.bins, settings.seed);
    Ok(ImoComparison {
        split: String::from(split),
        original: measure(orig)?,
        adapted: adapted.map(measure).transpose()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub name: String,
    pub imo_original: f64,
    pub imo_adapted: f64,
    /// `area(original) − area(adapted)`.
    pub delta_imo: f64,
    pub ta_accuracy: f64,
    pub ta_plus_accuracy: f64,
    /// Mean TA++ minus mean TA accuracy.
    pub delta_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub pearson: Option<f64>,
    /// Accuracy points gained per unit of overlap reduction.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Set when the correlation is undefined (constant ΔIMO or Δaccuracy).
    pub degenerate: bool,
}

/// Correlates overlap reduction with the TA++ over TA gain across datasets.
pub fn imo_performance_study(datasets: &[DatasetBundle], plan: &ExperimentPlan, imo: &ImoSettings) -> Result<StudyReport> {
    if datasets.len() < 3 {
        return Err(invalid("datasets", "the study needs at least 3 dataset pairs"));
    }
    let rows = datasets
        .iter()
        .map(|d| study_row(d, plan, imo))
        .collect::<Result<Vec<_>>>()?;
    Ok(correlate(rows))
}

/// One dataset's overlap reduction and TA++ over TA gain. The plan's method
/// list is replaced by TA and TA++.
pub fn study_row(data: &DatasetBundle, plan: &ExperimentPlan, imo: &ImoSettings) -> Result<StudyRow> {
    if data.adapted.is_none() {
        return Err(Error::MissingAdapted("imo study"));
    }
    let plan = ExperimentPlan {
        methods: alloc::vec![Method::TipAdapter, Method::TipAdapterPlus],
        ..plan.clone()
    };
    let cmp = imo_comparison(data, imo)?;
    let report = run_experiment(core::slice::from_ref(data), &plan)?;
    let ds = &report.datasets[0];
    let ta = ds.overall_of(Method::TipAdapter).expect("planned");
    let tapp = ds.overall_of(Method::TipAdapterPlus).expect("planned");
    let adapted_area = cmp.adapted.as_ref().expect("adapted present").intersection_area;
    Ok(StudyRow {
        name: data.name.clone(),
        imo_original: cmp.original.intersection_area,
        imo_adapted: adapted_area,
        delta_imo: cmp.original.intersection_area - adapted_area,
        ta_accuracy: ta,
        ta_plus_accuracy: tapp,
        delta_accuracy: tapp - ta,
    })
}

/// Pearson correlation and fitted slope of Δaccuracy on ΔIMO.
pub fn correlate(rows: Vec<StudyRow>) -> StudyReport {
    let x: Vec<f64> = rows.iter().map(|r| r.delta_imo).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.delta_accuracy).collect();
    match (pearson(&x, &y), linear_fit(&x, &y)) {
        (Ok(r), Ok((slope, intercept))) => StudyReport {
            rows,
            pearson: Some(r),
            slope: Some(slope),
            intercept: Some(intercept),
            degenerate: false,
        },
        _ => StudyReport {
            rows,
            pearson: None,
            slope: None,
            intercept: None,
            degenerate: true,
        },
    }
}
