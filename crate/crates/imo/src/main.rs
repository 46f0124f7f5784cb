use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use imo::config::ExperimentConfig;
use imo::manifest;
use imo::report;
use imo::runner::{self, load_set};
use imo::synth_io::write_synth;
use imo_core::metrics::{
    feature_variance, imo_intersection, proxy_a_distance_with, DomainLoss, PadOptions, DEFAULT_BINS, DEFAULT_LOW_VARIANCE,
    DEFAULT_PAIRS,
};
use imo_core::synth::SynthSpec;
use imo_core::{ape_refine, HyperParams, TextClassifier};

#[derive(Parser)]
#[command(name = "imo", version, about = "Training-free few-shot classification and intra-modal overlap tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset (optionally with adapted splits).
    GenSynth(GenSynth),
    /// Intersection area of same-class and different-class similarity histograms.
    ImoArea(ImoArea),
    /// Proxy-A-Distance between two embedding files.
    Pad(Pad),
    /// Per-channel variance of an embedding file.
    Variance(Variance),
    /// Run an experiment config and write report and tables.
    Run(RunArgs),
    /// Tune on the robustness source of a config and score its targets.
    Robustness(RunArgs),
    /// Correlate overlap reduction with the TA++ gain across the config's datasets.
    Study(RunArgs),
    /// Dump embeddings as CSV for external plotting.
    ExportFeatures(ExportFeatures),
    /// Check an IMOE file against its manifest.
    Verify { input: PathBuf },
}

#[derive(Args)]
struct GenSynth {
    #[arg(long, default_value_t = 8)]
    classes: usize,
    /// Training items per class.
    #[arg(long, default_value_t = 16)]
    per_class: usize,
    #[arg(long, default_value_t = 10)]
    val_per_class: usize,
    #[arg(long, default_value_t = 50)]
    test_per_class: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 4.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.6)]
    rho: f64,
    #[arg(long, default_value_t = 0.3)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write adapted splits at this concentration.
    #[arg(long)]
    kappa_adapted: Option<f64>,
    /// Dataset name recorded in the emitted config fragment.
    #[arg(long, default_value = "synthetic")]
    name: String,
}

#[derive(Args)]
struct ImoArea {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Pairs sampled per class.
    #[arg(long, default_value_t = DEFAULT_PAIRS)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Class prompt embeddings; when given, measure on APE-refined channels.
    #[arg(long)]
    text: Option<PathBuf>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0.7)]
    lambda: f64,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    hist_csv: Option<PathBuf>,
}

#[derive(Args)]
struct Pad {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hinge loss instead of logistic loss.
    #[arg(long)]
    hinge: bool,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct Variance {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LOW_VARIANCE)]
    threshold: f64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (defaults to the config, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportFeatures {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenSynth(a) => {
            let spec = SynthSpec {
                num_classes: a.classes,
                train_per_class: a.per_class,
                val_per_class: a.val_per_class,
                test_per_class: a.test_per_class,
                dim: a.dim,
                kappa: a.kappa,
                rho: a.rho,
                tau: a.tau,
                seed: a.seed,
            };
            let paths = write_synth(&a.out, &a.name, &spec, a.kappa_adapted)?;
            write(&a.out.join("dataset.json"), &report::to_json(&paths))?;
            println!("wrote {}", a.out.display());
        }
        Command::ImoArea(a) => {
            let mut set = load_set(&a.input)?;
            if let Some(t) = &a.text {
                let text = TextClassifier::from_embedding_set(&load_set(t)?)?;
                let hp = HyperParams {
                    channel_budget: a.budget,
                    lambda_mix: a.lambda,
                    ..HyperParams::default()
                };
                let mask = ape_refine(&text, &hp)?;
                set = set.refine(mask.indices())?;
            }
            let r = imo_intersection(&set, a.pairs, a.bins, a.seed)?;
            println!("intersection area {:.6} ({} paired, {} unpaired pairs)", r.intersection_area, r.paired_pairs, r.unpaired_pairs);
            if let Some(p) = &a.json {
                write(p, &report::to_json(&r))?;
            }
            if let Some(p) = &a.hist_csv {
                write(p, &report::histogram_csv(&r)?)?;
            }
        }
        Command::Pad(a) => {
            let opts = PadOptions {
                l2_reg: a.l2,
                iterations: a.iterations,
                step: a.step,
                loss: if a.hinge { DomainLoss::Hinge } else { DomainLoss::Logistic },
                ..PadOptions::default()
            };
            let r = proxy_a_distance_with(&load_set(&a.source)?, &load_set(&a.target)?, a.seed, &opts)?;
            println!("PAD {:.4} (error {:.4}, {} train / {} test rows)", r.pad, r.epsilon, r.train_size, r.test_size);
            if let Some(p) = &a.json {
                write(p, &report::to_json(&r))?;
            }
        }
        Command::Variance(a) => {
            let r = feature_variance(&load_set(&a.input)?, a.threshold)?;
            println!(
                "mean variance {:.6}, {:.2}% of channels below {}",
                r.mean_variance(),
                100.0 * r.low_fraction,
                r.low_threshold
            );
            if let Some(p) = &a.json {
                write(p, &report::to_json(&r))?;
            }
        }
        Command::Run(a) => {
            let cfg = ExperimentConfig::load(&a.config)?;
            let r = runner::run_experiment(&cfg, a.threads)?;
            fs::create_dir_all(&a.out)?;
            write(&a.out.join("report.json"), &report::to_json(&r))?;
            write(&a.out.join("summary.md"), &report::summary_markdown(&r))?;
            write(&a.out.join("shots.md"), &report::shots_markdown(&r))?;
            write(&a.out.join("summary.csv"), &report::summary_csv(&r)?)?;
            write(&a.out.join("shots.csv"), &report::shots_csv(&r)?)?;
            for d in &r.datasets {
                if let Some(imo) = &d.imo {
                    write(&a.out.join(format!("{}_imo_original.csv", d.name)), &report::histogram_csv(&imo.original)?)?;
                    if let Some(ad) = &imo.adapted {
                        write(&a.out.join(format!("{}_imo_adapted.csv", d.name)), &report::histogram_csv(ad)?)?;
                    }
                }
            }
            print!("{}", report::summary_markdown(&r));
        }
        Command::Robustness(a) => {
            let cfg = ExperimentConfig::load(&a.config)?;
            let r = runner::run_robustness(&cfg, a.threads)?;
            fs::create_dir_all(&a.out)?;
            write(&a.out.join("robustness.json"), &report::to_json(&r))?;
            write(&a.out.join("robustness.md"), &report::summary_markdown(&r))?;
            write(&a.out.join("robustness.csv"), &report::summary_csv(&r)?)?;
            print!("{}", report::summary_markdown(&r));
        }
        Command::Study(a) => {
            let cfg = ExperimentConfig::load(&a.config)?;
            let r = runner::run_study(&cfg, a.threads)?;
            fs::create_dir_all(&a.out)?;
            write(&a.out.join("study.json"), &report::to_json(&r))?;
            write(&a.out.join("study.md"), &report::study_markdown(&r))?;
            print!("{}", report::study_markdown(&r));
        }
        Command::ExportFeatures(a) => {
            write(&a.out, &report::features_csv(&load_set(&a.input)?)?)?;
        }
        Command::Verify { input } => {
            let m = manifest::verify(&input)?;
            imo::read_embedding_set(&input)?;
            println!("{}: ok ({}, {})", input.display(), m.sha256, m.source);
        }
    }
    Ok(())
}
