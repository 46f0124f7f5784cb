//! Experiment configuration (JSON).
//!
//! Relative paths resolve against the directory holding the config file.
//!
//! ```json
//! {
//!   "datasets": [{
//!     "name": "eurosat",
//!     "train": "eurosat/train.imoe", "val": "eurosat/val.imoe",
//!     "test": "eurosat/test.imoe", "text": "eurosat/text.imoe",
//!     "adapted": {"train": "...", "val": "...", "test": "..."}
//!   }],
//!   "methods": ["zero-shot", "ta", "ta++"],
//!   "shots": [1, 2, 4, 8, 16],
//!   "seeds": [1, 2, 3],
//!   "search": true
//! }
//! ```
//!
//! Omitted fields take the defaults of [`ExperimentPlan`] and [`Grid`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use imo_core::harness::{ExperimentPlan, Grid, ImoSettings};
use imo_core::metrics::{PadOptions, DEFAULT_LOW_VARIANCE};
use imo_core::{HyperParams, Method};
use serde::{Deserialize, Serialize};

use crate::error::{io, Error, Result};
use crate::manifest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptedPaths {
    pub train: PathBuf,
    #[serde(default)]
    pub val: Option<PathBuf>,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPaths {
    pub name: String,
    pub train: PathBuf,
    #[serde(default)]
    pub val: Option<PathBuf>,
    pub test: PathBuf,
    /// Class prompt embeddings; row `i` is class `i`.
    pub text: PathBuf,
    #[serde(default)]
    pub adapted: Option<AdaptedPaths>,
    /// Second domain for a Proxy-A-Distance against this dataset's test split.
    #[serde(default)]
    pub pad_target: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Attach overlap measurements of the validation (or test) split.
    pub imo: Option<ImoSettings>,
    /// Attach per-channel variance with this low-variance threshold.
    pub variance_threshold: Option<f64>,
    pub pad_seed: u64,
    pub pad: PadOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            imo: None,
            variance_threshold: Some(DEFAULT_LOW_VARIANCE),
            pad_seed: 0,
            pad: PadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetPaths {
    pub name: String,
    pub test: PathBuf,
    #[serde(default)]
    pub test_adapted: Option<PathBuf>,
    /// JSON object mapping target class names to source class names.
    #[serde(default)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    /// Name of the dataset in `datasets` that supplies shots and tuning.
    pub source: String,
    pub targets: Vec<TargetPaths>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetPaths>,
    pub methods: Vec<Method>,
    pub shots: Vec<usize>,
    pub seeds: Vec<u64>,
    pub grid: Grid,
    pub search: bool,
    pub hyper: HyperParams,
    pub analysis: AnalysisConfig,
    pub robustness: Option<RobustnessConfig>,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let plan = ExperimentPlan::default();
        Self {
            datasets: Vec::new(),
            methods: plan.methods,
            shots: plan.shots,
            seeds: plan.seeds,
            grid: plan.grid,
            search: plan.search,
            hyper: plan.hyper,
            analysis: AnalysisConfig::default(),
            robustness: None,
            threads: None,
        }
    }
}

/// A parsed config together with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub sha256: String,
}

impl ExperimentConfig {
    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            methods: self.methods.clone(),
            shots: self.shots.clone(),
            seeds: self.seeds.clone(),
            grid: self.grid.clone(),
            search: self.search,
            hyper: self.hyper,
        }
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let bytes = fs::read(path).map_err(io(path))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        let config = Self::from_json(text, path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = LoadedConfig {
            config,
            base_dir,
            sha256: sha256_hex(&bytes),
        };
        loaded.validate()?;
        Ok(loaded)
    }
}

impl LoadedConfig {
    /// In-memory config; relative paths resolve against `base_dir`.
    pub fn new(config: ExperimentConfig, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let json = serde_json::to_vec(&config).expect("config serializes");
        let loaded = Self {
            sha256: sha256_hex(&json),
            config,
            base_dir: base_dir.into(),
        };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Every file the config references, in declaration order.
    pub fn referenced_files(&self) -> Vec<PathBuf> {
        let c = &self.config;
        let mut out = Vec::new();
        for d in &c.datasets {
            out.extend([&d.train].into_iter().chain(d.val.as_ref()).chain([&d.test, &d.text]).cloned());
            if let Some(a) = &d.adapted {
                out.extend([&a.train].into_iter().chain(a.val.as_ref()).chain([&a.test]).cloned());
            }
            out.extend(d.pad_target.clone());
        }
        if let Some(r) = &c.robustness {
            for t in &r.targets {
                out.push(t.test.clone());
                out.extend(t.test_adapted.clone());
                out.extend(t.mapping.clone());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        if c.datasets.is_empty() {
            return Err(Error::Config("no datasets".into()));
        }
        let mut names = BTreeMap::new();
        for d in &c.datasets {
            if names.insert(d.name.as_str(), ()).is_some() {
                return Err(Error::Config(format!("duplicate dataset name {:?}", d.name)));
            }
        }
        c.plan()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if c.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if let Some(r) = &c.robustness {
            if !names.contains_key(r.source.as_str()) {
                return Err(Error::Config(format!("robustness source {:?} is not a dataset", r.source)));
            }
        }
        for f in self.referenced_files() {
            let path = self.resolve(&f);
            if !path.is_file() {
                return Err(Error::Config(format!("missing file {}", path.display())));
            }
        }
        Ok(())
    }
}

/// Reads a target → source class-name mapping.
pub fn read_mapping(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}
