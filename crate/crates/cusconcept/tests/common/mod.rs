#![allow(dead_code)] // each integration target uses a different subset

//! Shared helpers for the integration suites: a small deterministic dataset
//! and a configuration sized for CPU smoke runs.

use std::path::{Path, PathBuf};

use cusconcept::config::RunConfig;
use cusconcept::diffusion::ImageTensor;
use cusconcept::eval::BenchmarkRecord;
use cusconcept::math::DetRng;

pub fn smoke_config(cache_dir: &Path) -> RunConfig {
    let mut config = RunConfig::default();
    config.encoder.dim = 16;
    config.backend.steps = 5;
    config.stage1.steps = 25;
    config.stage2.steps = 25;
    config.vocab.m_obj = 60;
    config.vocab.m_attr_open = 60;
    config.eval.images_per_mode = 2;
    config.log_every = 0;
    config.paths.cache_dir = Some(cache_dir.to_path_buf());
    config
}

pub fn write_smoke_config_toml(dir: &Path) -> PathBuf {
    let path = dir.join("smoke.toml");
    let cache = dir.join("cache");
    std::fs::write(
        &path,
        format!(
            "log_every = 0\n\
             [encoder]\ndim = 16\n\
             [backend]\nsteps = 4\n\
             [stage1]\nsteps = 10\n\
             [stage2]\nsteps = 10\n\
             [vocab]\nm_obj = 40\nm_attr_open = 40\n\
             [eval]\nimages_per_mode = 2\n\
             [paths]\ncache_dir = \"{}\"\n",
            cache.display()
        ),
    )
    .unwrap();
    path
}

pub fn synthetic_image(seed: u64) -> ImageTensor {
    let mut rng = DetRng::new(seed);
    let data: Vec<f64> = rng
        .uniform_vec(256, 1.0)
        .into_iter()
        .map(|v| (((v + 1.0) * 127.5).round()).clamp(0.0, 255.0) / 127.5 - 1.0)
        .collect();
    ImageTensor::new(4, 8, 8, data).unwrap()
}

pub fn write_smoke_dataset(root: &Path) -> Vec<BenchmarkRecord> {
    std::fs::create_dir_all(root.join("images")).unwrap();
    let records = vec![
        BenchmarkRecord {
            image: "images/young_woman.png".into(),
            object: "woman".into(),
            attribute: "young".into(),
            axis: "age".into(),
        },
        BenchmarkRecord {
            image: "images/old_house.png".into(),
            object: "house".into(),
            attribute: "old".into(),
            axis: "age".into(),
        },
    ];
    for (i, record) in records.iter().enumerate() {
        let tensor = synthetic_image(100 + i as u64);
        cusconcept::image_io::save_png(&root.join(&record.image), &tensor).unwrap();
    }
    let manifest: String = records
        .iter()
        .map(|r| serde_json::to_string(r).unwrap())
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(root.join("manifest.jsonl"), manifest).unwrap();
    records
}
