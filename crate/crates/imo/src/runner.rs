//! Loads a config's files and evaluates it on a thread pool.
//!
//! Work is split into independent `(dataset, shots, method)` groups. Results
//! are collected in job order and merged by the core report assembly, so the
//! report is identical for any thread count.

use std::collections::BTreeMap;
use std::path::Path;

use imo_core::harness::{
    assemble_dataset_report, correlate, group_keys, imo_comparison, map_to_source, run_group, study_row,
    AdaptedSplits, CellResult, DatasetBundle, EvalReport, EvalTarget, FileDigest, Provenance, ShiftTarget,
    StudyReport, VarianceSummary,
};
use imo_core::metrics::{feature_variance, proxy_a_distance_with};
use imo_core::{EmbeddingSet, Method, TextClassifier};
use rayon::prelude::*;

use crate::config::{read_mapping, DatasetPaths, LoadedConfig};
use crate::error::{core_in, Error, Result};
use crate::imoe::read_embedding_set;
use crate::manifest::{self, sha256_file, sidecar_path};

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Reads an IMOE file, checking it against its manifest when one exists.
pub fn load_set(path: &Path) -> Result<EmbeddingSet> {
    if sidecar_path(path).is_file() {
        manifest::verify(path)?;
    }
    read_embedding_set(path)
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub bundle: DatasetBundle,
    pub pad_target: Option<EmbeddingSet>,
}

pub fn load_dataset(cfg: &LoadedConfig, d: &DatasetPaths) -> Result<LoadedDataset> {
    let read = |p: &Path| load_set(&cfg.resolve(p));
    let read_opt = |p: &Option<std::path::PathBuf>| p.as_deref().map(read).transpose();
    let text_set = read(&d.text)?;
    let text = TextClassifier::from_embedding_set(&text_set).map_err(core_in(format!("{}: text", d.name)))?;
    let adapted = match &d.adapted {
        Some(a) => Some(AdaptedSplits {
            train: read(&a.train)?,
            val: read_opt(&a.val)?,
            test: read(&a.test)?,
        }),
        None => None,
    };
    Ok(LoadedDataset {
        bundle: DatasetBundle {
            name: d.name.clone(),
            train: read(&d.train)?,
            val: read_opt(&d.val)?,
            test: read(&d.test)?,
            text,
            adapted,
        },
        pad_target: read_opt(&d.pad_target)?,
    })
}

pub fn provenance(cfg: &LoadedConfig) -> Result<Provenance> {
    let files = cfg
        .referenced_files()
        .into_iter()
        .map(|p| {
            Ok(FileDigest {
                sha256: sha256_file(&cfg.resolve(&p))?,
                path: p.to_string_lossy().into_owned(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Provenance {
        config_sha256: cfg.sha256.clone(),
        files,
    })
}

/// Runs the full table protocol over every configured dataset.
pub fn run_experiment(cfg: &LoadedConfig, threads: Option<usize>) -> Result<EvalReport> {
    let pool = thread_pool(threads.or(cfg.config.threads))?;
    let plan = cfg.config.plan();
    let datasets: Vec<LoadedDataset> = cfg
        .config
        .datasets
        .iter()
        .map(|d| load_dataset(cfg, d))
        .collect::<Result<_>>()?;
    for d in &datasets {
        plan.check_dataset(&d.bundle).map_err(core_in(&d.bundle.name))?;
    }
    let masks = datasets
        .iter()
        .map(|d| plan.mask_for(&d.bundle).map_err(core_in(&d.bundle.name)))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize, Method)> = (0..datasets.len())
        .flat_map(|i| group_keys(&plan).into_iter().map(move |(s, m)| (i, s, m)))
        .collect();
    let (groups, extras) = pool.install(|| {
        let groups: Vec<Result<Vec<CellResult>>> = jobs
            .par_iter()
            .map(|&(i, shots, method)| {
                let b = &datasets[i].bundle;
                let target = EvalTarget {
                    test: &b.test,
                    test_adapted: b.adapted.as_ref().map(|a| &a.test),
                };
                let mut out = run_group(b, &plan, masks[i].as_ref(), method, shots, &[target])
                    .map_err(core_in(format!("{} ({shots} shots, {})", b.name, method.tag())))?;
                Ok(out.swap_remove(0))
            })
            .collect();
        let extras: Vec<Result<Extras>> = datasets.par_iter().map(|d| measure(d, cfg)).collect();
        (groups, extras)
    });

    let mut cells: Vec<Vec<CellResult>> = vec![Vec::new(); datasets.len()];
    for (&(i, _, _), g) in jobs.iter().zip(groups) {
        cells[i].extend(g?);
    }
    let mut reports = Vec::with_capacity(datasets.len());
    for ((d, c), extra) in datasets.iter().zip(cells).zip(extras) {
        let mut r = assemble_dataset_report(&d.bundle.name, &plan, c);
        let extra = extra?;
        r.imo = extra.imo;
        r.variance = extra.variance;
        r.pad = extra.pad;
        reports.push(r);
    }
    let mut report = EvalReport::new(&plan, reports);
    report.provenance = Some(provenance(cfg)?);
    Ok(report)
}

struct Extras {
    imo: Option<imo_core::harness::ImoComparison>,
    variance: Option<VarianceSummary>,
    pad: Option<imo_core::metrics::PadReport>,
}

fn measure(d: &LoadedDataset, cfg: &LoadedConfig) -> Result<Extras> {
    let a = &cfg.config.analysis;
    let b = &d.bundle;
    let ctx = |what: &str| core_in(format!("{}: {what}", b.name));
    let imo = a
        .imo
        .as_ref()
        .map(|s| imo_comparison(b, s))
        .transpose()
        .map_err(ctx("overlap"))?;
    let variance = match a.variance_threshold {
        Some(t) => {
            let (split, orig, adapted) = match &b.val {
                Some(v) => ("val", v, b.adapted.as_ref().and_then(|x| x.val.as_ref())),
                None => ("test", &b.test, b.adapted.as_ref().map(|x| &x.test)),
            };
            Some(VarianceSummary {
                split: split.into(),
                original: feature_variance(orig, t).map_err(ctx("variance"))?,
                adapted: adapted.map(|s| feature_variance(s, t)).transpose().map_err(ctx("variance"))?,
            })
        }
        None => None,
    };
    let pad = d
        .pad_target
        .as_ref()
        .map(|t| proxy_a_distance_with(&b.test, t, a.pad_seed, &a.pad))
        .transpose()
        .map_err(ctx("proxy-a-distance"))?;
    Ok(Extras { imo, variance, pad })
}

/// Tunes on the robustness source and scores every configured target.
pub fn run_robustness(cfg: &LoadedConfig, threads: Option<usize>) -> Result<EvalReport> {
    let rob = cfg
        .config
        .robustness
        .as_ref()
        .ok_or_else(|| Error::Config("no robustness section".into()))?;
    let pool = thread_pool(threads.or(cfg.config.threads))?;
    let plan = cfg.config.plan();
    let paths = cfg
        .config
        .datasets
        .iter()
        .find(|d| d.name == rob.source)
        .expect("validated source name");
    let source = load_dataset(cfg, paths)?.bundle;
    plan.check_dataset(&source).map_err(core_in(&source.name))?;
    let source_names = source.text.class_names().to_vec();

    let mut targets = Vec::with_capacity(rob.targets.len());
    for t in &rob.targets {
        let mapping = match &t.mapping {
            Some(p) => read_mapping(&cfg.resolve(p))?,
            None => BTreeMap::new(),
        };
        let map = |s: EmbeddingSet| map_to_source(&s, &source_names, &mapping).map_err(core_in(&t.name));
        targets.push(ShiftTarget {
            name: t.name.clone(),
            test: map(load_set(&cfg.resolve(&t.test))?)?,
            test_adapted: match &t.test_adapted {
                Some(p) => Some(map(load_set(&cfg.resolve(p))?)?),
                None => None,
            },
        });
    }
    if plan.methods.iter().any(|m| m.is_plus()) && targets.iter().any(|t| t.test_adapted.is_none()) {
        return Err(Error::Config("++ methods need test_adapted for every robustness target".into()));
    }
    let mask = plan.mask_for(&source).map_err(core_in(&source.name))?;
    let eval_targets: Vec<EvalTarget<'_>> = targets
        .iter()
        .map(|t| EvalTarget {
            test: &t.test,
            test_adapted: t.test_adapted.as_ref(),
        })
        .collect();
    let jobs = group_keys(&plan);
    let groups: Vec<Result<Vec<Vec<CellResult>>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(shots, method)| {
                run_group(&source, &plan, mask.as_ref(), method, shots, &eval_targets)
                    .map_err(core_in(format!("{} ({shots} shots, {})", source.name, method.tag())))
            })
            .collect()
    });
    let mut cells: Vec<Vec<CellResult>> = vec![Vec::new(); targets.len()];
    for g in groups {
        for (acc, c) in cells.iter_mut().zip(g?) {
            acc.extend(c);
        }
    }
    let reports = targets
        .iter()
        .zip(cells)
        .map(|(t, c)| assemble_dataset_report(&t.name, &plan, c))
        .collect();
    let mut report = EvalReport::new(&plan, reports);
    report.provenance = Some(provenance(cfg)?);
    Ok(report)
}

/// Overlap reduction against TA++ gain across every configured dataset.
pub fn run_study(cfg: &LoadedConfig, threads: Option<usize>) -> Result<StudyReport> {
    let pool = thread_pool(threads.or(cfg.config.threads))?;
    let plan = cfg.config.plan();
    let imo = cfg.config.analysis.imo.unwrap_or_default();
    if cfg.config.datasets.len() < 3 {
        return Err(Error::Config("the study needs at least 3 datasets".into()));
    }
    let datasets: Vec<DatasetBundle> = cfg
        .config
        .datasets
        .iter()
        .map(|d| load_dataset(cfg, d).map(|l| l.bundle))
        .collect::<Result<_>>()?;
    let rows: Vec<Result<_>> = pool.install(|| {
        datasets
            .par_iter()
            .map(|d| study_row(d, &plan, &imo).map_err(core_in(&d.name)))
            .collect()
    });
    Ok(correlate(rows.into_iter().collect::<Result<_>>()?))
}
