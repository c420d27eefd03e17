//! Command-line surface: `train`, `generate`, `evaluate`, `predict`.
//!
//! Configuration comes from an optional TOML file plus repeatable
//! `--set key.path=value` overrides (flags > file > defaults). Every error
//! family maps to a stable nonzero exit code; see `Error::exit_code`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use std::io::Write;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::generation::{self, GenerationMode, GenerationRequest, DEFAULT_TEMPLATE};
use crate::image_io::load_image;
use crate::pipeline::{run_benchmark, train_ours, Method, Session, TrainOptions};
use crate::stage1::predict_vocabulary;
use crate::stage2::{load_bundle, save_bundle, ConceptBundle};

#[derive(Parser)]
#[command(
    name = "cusconcept",
    version,
    about = "Decompose a single image into object and attribute concept tokens for text-to-image diffusion"
)]
pub struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config key, e.g. --set stage1.steps=100 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build vocabularies, run both training stages, save a concept bundle.
    Train {
        /// Input image (png/jpeg).
        image: PathBuf,
        /// Attribute axis name, repeatable (e.g. --axis age --axis mood).
        #[arg(long = "axis")]
        axes: Vec<String>,
        /// Bundle output directory (default: `bundles/<image-stem>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop after stage 1; the bundle carries the raw centroids.
        #[arg(long)]
        skip_refinement: bool,
        /// Build the attribute vocabulary from the tokenizer universe
        /// instead of axis queries.
        #[arg(long)]
        no_attribute_axes: bool,
    },
    /// Sample images from one or more saved bundles.
    Generate {
        /// Bundle directories.
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
        /// a_plus_o | a_only | o_only | recompose
        #[arg(long, default_value = "a_plus_o")]
        mode: String,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Recompose: bundle id supplying the attribute tokens.
        #[arg(long)]
        attr_from: Option<String>,
        /// Recompose: bundle id supplying the object token.
        #[arg(long)]
        obj_from: Option<String>,
        /// Prompt template with {attrs} and {obj} slots.
        #[arg(long)]
        template: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the benchmark over a dataset directory with one method.
    Evaluate {
        /// Dataset root containing manifest.jsonl and images.
        dataset: PathBuf,
        /// ours | ti_alpha | ti_beta | ours_wo_jcr | ours_wo_aa
        #[arg(long, default_value = "ours")]
        method: String,
        #[arg(long, default_value = "eval-out")]
        out: PathBuf,
    },
    /// Print the top predicted words stored in a bundle.
    Predict {
        bundle: PathBuf,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
}

/// Print to stdout, ignoring a closed pipe (e.g. `cusconcept ... | head`).
macro_rules! say {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stdout(), $($arg)*);
    };
}

pub fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Train { image, axes, out, skip_refinement, no_attribute_axes } => {
            cmd_train(config, &image, axes, out, skip_refinement, no_attribute_axes)
        }
        Command::Generate { bundles, mode, count, seed, attr_from, obj_from, template, out } => {
            cmd_generate(config, &bundles, &mode, count, seed, attr_from, obj_from, template, &out)
        }
        Command::Evaluate { dataset, method, out } => cmd_evaluate(config, &dataset, &method, &out),
        Command::Predict { bundle, top } => cmd_predict(config, &bundle, top),
    }
}

fn cmd_train(
    config: RunConfig,
    image_path: &Path,
    axes: Vec<String>,
    out: Option<PathBuf>,
    skip_refinement: bool,
    no_attribute_axes: bool,
) -> Result<()> {
    if axes.is_empty() && !no_attribute_axes {
        return Err(Error::InvalidRequest {
            reason: "at least one --axis is required (or pass --no-attribute-axes)".into(),
        });
    }
    let mut session = Session::new(config)?;
    let image = load_image(image_path, session.backend.image_geometry())?;
    let trained = train_ours(
        &mut session,
        &image,
        &TrainOptions { axes, skip_refinement, no_attribute_axes },
    )?;

    for (axis, words) in &trained.predictions {
        say!("{axis}:");
        for (word, weight) in words {
            say!("  {word:<16} {weight:+.5}");
        }
    }

    let stem = image_path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "image".into());
    let bundle_dir = out.unwrap_or_else(|| PathBuf::from("bundles").join(stem));
    save_bundle(&bundle_dir, &trained.bundle)?;
    say!(
        "bundle: {} (stage {}, {} tokens)",
        bundle_dir.display(),
        trained.bundle.manifest.stage,
        trained.bundle.manifest.tokens.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    config: RunConfig,
    bundle_dirs: &[PathBuf],
    mode: &str,
    count: usize,
    seed: u64,
    attr_from: Option<String>,
    obj_from: Option<String>,
    template: Option<String>,
    out: &Path,
) -> Result<()> {
    let mode: GenerationMode = mode.parse()?;
    let mut session = Session::new(config)?;

    let mut loaded: Vec<(String, ConceptBundle)> = Vec::with_capacity(bundle_dirs.len());
    for dir in bundle_dirs {
        let bundle = load_bundle(dir)?;
        if bundle.manifest.config_hash != session.config_hash {
            session.logger.event(&format!(
                "warning: bundle {} was produced under config {}, current is {}",
                dir.display(),
                bundle.manifest.config_hash,
                session.config_hash
            ));
        }
        let id = dir
            .file_name()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "bundle".into());
        loaded.push((id, bundle));
    }

    let mut space = session.space.fresh();
    let registered = generation::register_bundles(&mut space, &loaded)?;
    let request = GenerationRequest {
        mode,
        bundles: loaded.iter().map(|(id, _)| id.clone()).collect(),
        attr_from,
        obj_from,
        template: template.unwrap_or_else(|| DEFAULT_TEMPLATE.into()),
        count,
        seed,
        steps: session.config.backend.steps,
        config_hash: session.config_hash.clone(),
    };
    let paths = generation::generate(session.backend.as_ref(), &space, &registered, &request, out)?;
    for path in paths {
        say!("{}", path.display());
    }
    Ok(())
}

fn cmd_evaluate(config: RunConfig, dataset: &Path, method: &str, out: &Path) -> Result<()> {
    let method: Method = method.parse()?;
    let mut session = Session::new(config)?;
    let report = run_benchmark(&mut session, dataset, method, out)?;
    let a = &report.aggregates;
    say!(
        "method={} rows={} failures={} clip_i(a+o/a/o)={:.4}/{:.4}/{:.4} sim_emb(a/o)={:.4}/{:.4} acc(a/o)={:.4}/{:.4}",
        report.method,
        a.count,
        a.failures,
        a.clip_i_ao,
        a.clip_i_a,
        a.clip_i_o,
        a.sim_emb_a,
        a.sim_emb_o,
        a.acc_a,
        a.acc_o
    );
    say!("report: {}", out.join(format!("report_{}.csv", report.method)).display());
    Ok(())
}

fn cmd_predict(config: RunConfig, bundle_dir: &Path, top: usize) -> Result<()> {
    let session_hash = config.hash();
    let bundle = load_bundle(bundle_dir)?;
    if bundle.manifest.config_hash != session_hash {
        eprintln!(
            "warning: bundle was produced under config {}, current is {}",
            bundle.manifest.config_hash, session_hash
        );
    }
    let tables = bundle.weight_tables.as_ref().ok_or(Error::NotTrained)?;
    for table in tables {
        say!("{}:", table.axis);
        for (word, weight) in predict_vocabulary(table, top) {
            say!("  {word:<16} {weight:+.5}");
        }
    }
    Ok(())
}
