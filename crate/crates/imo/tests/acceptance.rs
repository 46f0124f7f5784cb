//! Release acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.
//!
//! `IMO_BLESS=1 cargo test -p imo --test acceptance` rewrites the golden table.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::path::{Path, PathBuf};
use std::time::Instant;

use imo::config::{AnalysisConfig, ExperimentConfig, LoadedConfig};
use imo::report;
use imo::runner;
use imo::synth_io::{rebase, write_synth};
use imo_core::classifiers::ape_weights;
use imo_core::embedding::numbered_class_names;
use imo_core::harness::{correlate, study_row, DatasetBundle, AdaptedSplits, ExperimentPlan, Grid, ImoSettings, StudyRow};
use imo_core::kernels::{affinity, kl_divergence, softmax_rows, ProbabilityRow, KL_EPSILON};
use imo_core::matrix::normalize_rows;
use imo_core::metrics::{imo_intersection, proxy_a_distance};
use imo_core::rng::SeededRng;
use imo_core::synth::{generate_pair, SynthSpec};
use imo_core::{ape_refine, build_cache, evaluate, CacheModel, EmbeddingSet, HyperParams, Mat, Method, MethodInputs, TextClassifier};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn unit_rows(rng: &mut SeededRng, n: usize, d: usize) -> Mat<f32> {
    let raw: Vec<f32> = (0..n * d).map(|_| rng.standard_normal() as f32).collect();
    normalize_rows(&Mat::from_vec(n, d, raw).unwrap())
}

fn to_rows(m: &Mat<f32>) -> oracle::Rows {
    m.iter_rows().map(|r| r.iter().map(|&x| x as f64).collect()).collect()
}

fn to_rows64(m: &Mat<f64>) -> oracle::Rows {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

struct Instance {
    test: EmbeddingSet,
    test_adapted: EmbeddingSet,
    cache: CacheModel,
    cache_adapted: CacheModel,
    text: TextClassifier,
}

/// N <= 4 classes, K <= 3 shots, d <= 8 channels.
fn instance(seed: u64) -> Instance {
    let mut rng = SeededRng::new(seed);
    let n = 2 + rng.below(3) as usize;
    let k = 1 + rng.below(3) as usize;
    let d = 2 + rng.below(7) as usize;
    let rows = 1 + rng.below(6) as usize;
    let names = numbered_class_names(n);
    let labels: Vec<usize> = (0..n * k).map(|i| i / k).collect();
    let test_labels: Vec<usize> = (0..rows).map(|i| i % n).collect();
    let mk = |rng: &mut SeededRng, r: usize, l: Vec<usize>| EmbeddingSet::new(unit_rows(rng, r, d), l, names.clone()).unwrap();
    let train = mk(&mut rng, n * k, labels.clone());
    let train_a = mk(&mut rng, n * k, labels);
    let test = mk(&mut rng, rows, test_labels.clone());
    let test_adapted = mk(&mut rng, rows, test_labels);
    let text = TextClassifier::new(unit_rows(&mut rng, n, d), names.clone()).unwrap();
    let all: Vec<usize> = (0..n * k).collect();
    Instance {
        cache: build_cache(&train, &all).unwrap(),
        cache_adapted: build_cache(&train_a, &all).unwrap(),
        test,
        test_adapted,
        text,
    }
}

fn inputs<'a>(i: &'a Instance, mask: &'a imo_core::ChannelMask, same: bool) -> MethodInputs<'a> {
    MethodInputs {
        test: &i.test,
        text: &i.text,
        cache: Some(&i.cache),
        test_adapted: Some(if same { &i.test } else { &i.test_adapted }),
        cache_adapted: Some(if same { &i.cache } else { &i.cache_adapted }),
        mask: Some(mask),
    }
}

fn criterion_1() -> Outcome {
    let mut prng = SeededRng::new(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let inst = instance(10_000 + trial);
        let hp = HyperParams {
            alpha: prng.unit_f64() * 5.0,
            beta: 1.0 + prng.unit_f64() * 9.0,
            gamma: prng.unit_f64() * 5.0,
            gamma_ape: prng.unit_f64() * 2.0,
            ..HyperParams::default()
        };
        let mask = ape_refine(&inst.text, &hp).unwrap();
        let case = oracle::Case {
            test: to_rows(inst.test.vectors()),
            test_adapted: to_rows(inst.test_adapted.vectors()),
            keys: to_rows(inst.cache.keys()),
            keys_adapted: to_rows(inst.cache_adapted.keys()),
            key_labels: inst.cache.labels().to_vec(),
            text: to_rows(inst.text.weights()),
        };
        let p = oracle::Params { alpha: hp.alpha, beta: hp.beta, gamma: hp.gamma, gamma_ape: hp.gamma_ape };
        for (m, k) in [
            (Method::TipAdapter, oracle::Kind::Ta),
            (Method::TipX, oracle::Kind::Tx),
            (Method::TipAdapterPlus, oracle::Kind::TaPlus),
            (Method::TipXPlus, oracle::Kind::TxPlus),
            (Method::Ape, oracle::Kind::Ape),
            (Method::ApePlus, oracle::Kind::ApePlus),
        ] {
            let got = evaluate(m, &inputs(&inst, &mask, false), &hp).unwrap();
            let want = oracle::logits(k, &case, &p, mask.indices());
            worst = worst.max(oracle::max_abs_diff(&to_rows64(&got.logits), &want));
        }
    }
    outcome(worst <= 1e-6, format!("200 instances x 6 methods, max |vectorized - oracle| = {worst:.3e} (tol 1e-6)"))
}

fn criterion_2() -> Outcome {
    let mut fails = Vec::new();
    let mut worst_alpha: f64 = 0.0;
    for seed in 0..50 {
        let inst = instance(20_000 + seed);
        let d = inst.text.dim();
        let hp = HyperParams { alpha: 1.7, beta: 4.5, gamma: 0.8, ..HyperParams::default() };
        let mask = ape_refine(&inst.text, &hp).unwrap();
        let inp = inputs(&inst, &mask, false);
        let run = |m, h: &HyperParams| evaluate(m, &inp, h).unwrap().logits;
        let zs = run(Method::ZeroShot, &hp);

        // α = 0 (and γ = 0 for the KL-bridge methods)
        let off = HyperParams { alpha: 0.0, gamma: 0.0, ..hp };
        for m in Method::ALL.into_iter().filter(|m| m.uses_cache()) {
            worst_alpha = worst_alpha.max(run(m, &off).max_abs_diff(&zs).unwrap());
        }

        let g0 = HyperParams { gamma: 0.0, ..hp };
        if run(Method::TipX, &g0) != run(Method::TipAdapter, &g0) {
            fails.push(format!("seed {seed}: gamma=0 TX != TA"));
        }
        if run(Method::TipXPlus, &g0) != run(Method::TipAdapterPlus, &g0) {
            fails.push(format!("seed {seed}: gamma=0 TX++ != TA++"));
        }

        let same = inputs(&inst, &mask, true);
        for m in [Method::TipAdapterPlus, Method::ApePlus] {
            let plus = evaluate(m, &same, &hp).unwrap().logits;
            let base = evaluate(m.baseline().unwrap(), &same, &hp).unwrap().logits;
            if plus != base {
                fails.push(format!("seed {seed}: identical inputs {m} != baseline"));
            }
        }

        let w = ape_weights(
            &softmax_rows(&imo_core::kernels::cosine_matrix(inst.cache.keys(), inst.text.weights()).unwrap()).unwrap(),
            inst.cache.labels(),
            0.0,
        )
        .unwrap();
        let via_eval = evaluate(Method::Ape, &inp, &HyperParams { gamma_ape: 0.0, ..hp }).unwrap().ape_weights.unwrap();
        if w.iter().chain(&via_eval).any(|&x| x != 1.0) {
            fails.push(format!("seed {seed}: gamma_ape=0 weights not all 1"));
        }

        let full = ape_refine(&inst.text, &HyperParams { channel_budget: Some(d), ..hp }).unwrap();
        if !full.is_identity() {
            fails.push(format!("seed {seed}: Q=d mask is not the identity"));
        }
    }
    if worst_alpha > 1e-9 {
        fails.push(format!("alpha=0 max diff {worst_alpha:.3e}"));
    }
    let detail = if fails.is_empty() {
        format!("50 instances; alpha=0 max diff to zero-shot {worst_alpha:.3e} (tol 1e-9); gamma=0, identical-input, gamma_ape=0 and Q=d collapses exact")
    } else {
        fails.join("; ")
    };
    outcome(fails.is_empty(), detail)
}

fn hemisphere(seed: u64, n: usize, d: usize, sign: f32) -> EmbeddingSet {
    let mut rng = SeededRng::new(seed);
    let mut raw: Vec<f32> = (0..n * d).map(|_| rng.standard_normal() as f32).collect();
    for r in 0..n {
        raw[r * d] = sign * (raw[r * d].abs() + 1.0);
    }
    EmbeddingSet::new(normalize_rows(&Mat::from_vec(n, d, raw).unwrap()), vec![0; n], numbered_class_names(1)).unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = SeededRng::new(3);
    let (mut min_kl, mut max_self, mut max_shift, mut max_aff) = (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = 2 + rng.below(10) as usize;
        let a: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 4.0).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 4.0).collect();
        let shift = rng.standard_normal() * 50.0;
        let sa = softmax_rows(&Mat::from_vec(1, n, a.clone()).unwrap()).unwrap();
        let sb = softmax_rows(&Mat::from_vec(1, n, b).unwrap()).unwrap();
        let shifted = softmax_rows(&Mat::from_vec(1, n, a.iter().map(|x| x + shift).collect()).unwrap()).unwrap();
        max_shift = max_shift.max(sa.as_mat().max_abs_diff(shifted.as_mat()).unwrap());
        let p = ProbabilityRow::new(sa.row(0).values()).unwrap();
        let q = ProbabilityRow::new(sb.row(0).values()).unwrap();
        min_kl = min_kl.min(kl_divergence(p, q, KL_EPSILON).unwrap());
        max_self = max_self.max(kl_divergence(p, p, KL_EPSILON).unwrap().abs());
        let s = rng.unit_f64() * 2.0 - 1.0;
        let beta = 0.5 + rng.unit_f64() * 12.0;
        let got = affinity(&Mat::from_vec(1, 1, vec![s]).unwrap(), beta).unwrap().get(0, 0);
        max_aff = max_aff.max((got - (-beta * (1.0 - s)).exp()).abs());
    }
    let source = hemisphere(1, 600, 16, 1.0);
    let mut perm: Vec<usize> = (0..source.rows()).collect();
    SeededRng::new(4).shuffle(&mut perm);
    let copy = source.select(&perm).unwrap();
    let pad_same = proxy_a_distance(&source, &copy, 5).unwrap().pad;
    let pad_far = proxy_a_distance(&source, &hemisphere(2, 600, 16, -1.0), 5).unwrap().pad;
    let pass = min_kl >= -1e-9 && max_self <= 1e-12 && max_shift <= 1e-9 && max_aff <= 1e-6 && pad_same <= 0.2 && pad_far >= 1.8;
    outcome(
        pass,
        format!(
            "min KL {min_kl:.3e} (>= -1e-9), max |KL(p,p)| {max_self:.1e}, softmax shift {max_shift:.1e} (<= 1e-9), affinity {max_aff:.1e} (<= 1e-6), PAD copy {pad_same:.3} (<= 0.2), PAD hemispheres {pad_far:.3} (>= 1.8)"
        ),
    )
}

fn criterion_4() -> Outcome {
    let n = 40;
    let same = EmbeddingSet::new(
        Mat::from_vec(n, 4, (0..n).flat_map(|_| [0.0f32, 1.0, 0.0, 0.0]).collect()).unwrap(),
        (0..n).map(|i| i % 4).collect(),
        numbered_class_names(4),
    )
    .unwrap();
    let identical = imo_intersection(&same, 10_000, 200, 1).unwrap().intersection_area;

    let anti = EmbeddingSet::new(
        Mat::from_vec(n, 3, (0..n).flat_map(|i| if i % 2 == 0 { [1.0f32, 0.0, 0.0] } else { [-1.0, 0.0, 0.0] }).collect()).unwrap(),
        (0..n).map(|i| i % 2).collect(),
        numbered_class_names(2),
    )
    .unwrap();
    let antipodal = imo_intersection(&anti, 10_000, 200, 1).unwrap().intersection_area;

    // a signed permutation is orthogonal and exact in f32
    let spec = SynthSpec { num_classes: 6, test_per_class: 40, dim: 24, ..SynthSpec::default() };
    let set = imo_core::synth::generate(&spec).unwrap().splits.test;
    let mut rng = SeededRng::new(8);
    let mut perm: Vec<usize> = (0..spec.dim).collect();
    rng.shuffle(&mut perm);
    let signs: Vec<f32> = (0..spec.dim).map(|_| if rng.below(2) == 0 { 1.0 } else { -1.0 }).collect();
    let v = set.vectors();
    let rotated: Vec<f32> = v
        .iter_rows()
        .flat_map(|r| perm.iter().zip(&signs).map(|(&p, &s)| s * r[p]).collect::<Vec<_>>())
        .collect();
    let rotated = EmbeddingSet::new(Mat::from_vec(v.rows(), v.cols(), rotated).unwrap(), set.labels().to_vec(), set.class_names().to_vec()).unwrap();
    let a = imo_intersection(&set, 10_000, 200, 2).unwrap().intersection_area;
    let b = imo_intersection(&rotated, 10_000, 200, 2).unwrap().intersection_area;
    let rot = (a - b).abs();
    outcome(
        identical >= 0.999 && antipodal <= 0.001 && rot <= 1e-6,
        format!("identical {identical:.4} (>= 0.999), antipodal {antipodal:.4} (<= 0.001), rotation |Δarea| {rot:.1e} (<= 1e-6)"),
    )
}

fn criterion_5() -> Outcome {
    let kappa = 3.0;
    let gains = [3.5, 4.0, 5.0, 6.0, 8.0, 11.0, 15.0, 22.0];
    let plan = ExperimentPlan {
        shots: vec![1, 2, 4, 8],
        seeds: vec![1, 2, 3],
        grid: Grid {
            alpha: (0..=10).map(|i| i as f64 * 0.5).collect(),
            beta: (0..=9).map(|i| 1.0 + i as f64).collect(),
            gamma: vec![0.0],
        },
        ..ExperimentPlan::default()
    };
    let imo = ImoSettings { pairs_per_class: 2000, bins: 200, seed: 0 };
    let seeds = 5u64;
    let mut points: Vec<StudyRow> = Vec::new();
    for (i, &ka) in gains.iter().enumerate() {
        let (mut d_imo, mut d_acc) = (0.0, 0.0);
        for s in 0..seeds {
            let spec = SynthSpec {
                num_classes: 8,
                train_per_class: 16,
                val_per_class: 10,
                test_per_class: 40,
                dim: 32,
                kappa,
                seed: 100 * s + i as u64,
                ..SynthSpec::default()
            };
            let p = generate_pair(&spec, ka).unwrap();
            let bundle = DatasetBundle {
                name: format!("kappa_adapted={ka}"),
                train: p.original.splits.train,
                val: Some(p.original.splits.val),
                test: p.original.splits.test,
                text: p.original.text,
                adapted: Some(AdaptedSplits { train: p.adapted.train, val: Some(p.adapted.val), test: p.adapted.test }),
            };
            let row = study_row(&bundle, &plan, &imo).unwrap();
            d_imo += row.delta_imo;
            d_acc += row.delta_accuracy;
        }
        points.push(StudyRow {
            name: format!("{ka}"),
            imo_original: 0.0,
            imo_adapted: 0.0,
            delta_imo: d_imo / seeds as f64,
            ta_accuracy: 0.0,
            ta_plus_accuracy: 0.0,
            delta_accuracy: d_acc / seeds as f64,
        });
    }
    let last = points.last().unwrap().delta_accuracy;
    let study = correlate(points);
    let r = study.pearson.unwrap_or(f64::NAN);
    outcome(
        r > 0.3 && last > 0.0,
        format!(
            "{} kappa_adapted levels x {seeds} seeds: pearson(ΔIMO, Δ(TA++, TA)) = {r:.3} (> 0.3), Δ at largest gain = {last:+.2} points (> 0)",
            gains.len()
        ),
    )
}

fn fixture_config(dir: &Path) -> LoadedConfig {
    let mut datasets = Vec::new();
    for (i, (kappa, ka)) in [(3.0, 6.0), (4.0, 12.0), (2.5, 4.0)].into_iter().enumerate() {
        let spec = SynthSpec {
            num_classes: 6,
            train_per_class: 8,
            val_per_class: 8,
            test_per_class: 20,
            dim: 20,
            kappa,
            seed: 40 + i as u64,
            ..SynthSpec::default()
        };
        let sub = PathBuf::from(format!("set{i}"));
        let paths = write_synth(&dir.join(&sub), &format!("synthetic-{i}"), &spec, Some(ka)).unwrap();
        datasets.push(rebase(paths, &sub));
    }
    let config = ExperimentConfig {
        datasets,
        shots: vec![1, 2, 4],
        seeds: vec![1, 2],
        grid: Grid { alpha: vec![0.0, 1.0, 2.0, 4.0], beta: vec![1.0, 3.0, 5.5, 8.0], gamma: vec![0.0, 0.5, 1.0] },
        analysis: AnalysisConfig {
            imo: Some(ImoSettings { pairs_per_class: 500, bins: 100, seed: 0 }),
            ..AnalysisConfig::default()
        },
        ..ExperimentConfig::default()
    };
    LoadedConfig::new(config, dir).unwrap()
}

fn criterion_6(cfg: &LoadedConfig) -> Outcome {
    let json = |threads| report::to_json(&runner::run_experiment(cfg, Some(threads)).unwrap());
    let a = json(1);
    let b = json(1);
    let c = json(8);
    let d = json(8);
    let ok = a == b && a == c && c == d;
    outcome(ok, format!("EvalReport JSON ({} bytes) identical across 2 runs at 1 thread and 2 runs at 8 threads: {ok}", a.len()))
}

fn criterion_7(cfg: &LoadedConfig) -> Outcome {
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/summary_table.md");
    let table = report::summary_markdown(&runner::run_experiment(cfg, Some(2)).unwrap());
    if std::env::var_os("IMO_BLESS").is_some() {
        std::fs::create_dir_all(golden_path.parent().unwrap()).unwrap();
        std::fs::write(&golden_path, &table).unwrap();
    }
    let golden = std::fs::read_to_string(&golden_path).unwrap_or_default();
    let expected_header = "| Dataset | Zero-Shot | TA | TA++ | TX | TX++ | APE | APE++ | Δ(TA++, TA) | Δ(TX++, TX) | Δ(TA++, TX) | Δ(APE++, APE) |";
    let header_ok = table.lines().next() == Some(expected_header);
    let rows = table.lines().count();
    let ok = header_ok && rows == 6 && table == golden;
    outcome(
        ok,
        format!("3-dataset table: header matches {header_ok}, {rows} lines (header, rule, 3 datasets, average), identical to golden: {}", table == golden),
    )
}

fn main() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    let results = [
        ("1 oracle equivalence", criterion_1()),
        ("2 degeneracy suite", criterion_2()),
        ("3 kernel properties", criterion_3()),
        ("4 overlap metric", criterion_4()),
        ("5 overlap vs gain correlation", criterion_5()),
        ("6 determinism", criterion_6(&cfg)),
        ("7 table layout", criterion_7(&cfg)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} passed in {:.1}s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
