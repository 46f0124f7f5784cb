//! Writes synthetic datasets as IMOE files with manifests.

use std::fs;
use std::path::Path;

use imo_core::synth::{generate, generate_pair, SynthSpec};
use imo_core::EmbeddingSet;

use crate::config::{AdaptedPaths, DatasetPaths};
use crate::error::{core_in, io, Result};
use crate::manifest::{write_with_manifest, Encoder};

/// Generates into `dir` and returns config entries naming the files
/// relative to `dir`. With `kappa_adapted`, adapted splits are written too.
pub fn write_synth(dir: &Path, name: &str, spec: &SynthSpec, kappa_adapted: Option<f64>) -> Result<DatasetPaths> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let source = format!(
        "synthetic: classes={} dim={} kappa={} rho={} tau={} seed={}",
        spec.num_classes, spec.dim, spec.kappa, spec.rho, spec.tau, spec.seed
    );
    let put = |file: &str, set: &EmbeddingSet, enc: Encoder, src: &str| -> Result<std::path::PathBuf> {
        write_with_manifest(set, &dir.join(file), src, enc)?;
        Ok(file.into())
    };
    let (data, adapted) = match kappa_adapted {
        Some(k) => {
            let p = generate_pair(spec, k).map_err(core_in("gen-synth"))?;
            (p.original, Some((p.adapted, k)))
        }
        None => (generate(spec).map_err(core_in("gen-synth"))?, None),
    };
    let s = &data.splits;
    let orig = Encoder::Original;
    let mut paths = DatasetPaths {
        name: name.to_owned(),
        train: put("train.imoe", &s.train, orig, &source)?,
        val: Some(put("val.imoe", &s.val, orig, &source)?),
        test: put("test.imoe", &s.test, orig, &source)?,
        text: put("text.imoe", &data.text.to_embedding_set(), orig, &source)?,
        adapted: None,
        pad_target: None,
    };
    if let Some((a, k)) = adapted {
        let src = format!("{source} kappa_adapted={k}");
        let enc = Encoder::Adapted;
        paths.adapted = Some(AdaptedPaths {
            train: put("train_adapted.imoe", &a.train, enc, &src)?,
            val: Some(put("val_adapted.imoe", &a.val, enc, &src)?),
            test: put("test_adapted.imoe", &a.test, enc, &src)?,
        });
    }
    Ok(paths)
}

/// Prefixes every path in `d` with `prefix`.
pub fn rebase(mut d: DatasetPaths, prefix: &Path) -> DatasetPaths {
    let j = |p: &mut std::path::PathBuf| *p = prefix.join(&*p);
    j(&mut d.train);
    j(&mut d.test);
    j(&mut d.text);
    if let Some(v) = d.val.as_mut() {
        j(v);
    }
    if let Some(a) = d.adapted.as_mut() {
        j(&mut a.train);
        j(&mut a.test);
        if let Some(v) = a.val.as_mut() {
            j(v);
        }
    }
    if let Some(v) = d.pad_target.as_mut() {
        j(v);
    }
    d
}
