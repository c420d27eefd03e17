//! Run the benchmark harness on a small synthetic dataset, comparing the
//! full method against the two textual-inversion baselines and the two
//! ablations. Reports land under example-out/benchmark/.
//!
//!     cargo run --example benchmark

use cusconcept::config::RunConfig;
use cusconcept::eval::BenchmarkRecord;
use cusconcept::image_io::save_png;
use cusconcept::math::DetRng;
use cusconcept::pipeline::{run_benchmark, Method, Session};

fn write_dataset(root: &std::path::Path) -> cusconcept::Result<()> {
    std::fs::create_dir_all(root.join("images"))?;
    let records = [
        BenchmarkRecord {
            image: "images/young_woman.png".into(),
            object: "woman".into(),
            attribute: "young".into(),
            axis: "age".into(),
        },
        BenchmarkRecord {
            image: "images/wooden_chair.png".into(),
            object: "chair".into(),
            attribute: "wooden".into(),
            axis: "material".into(),
        },
    ];
    let mut manifest = String::new();
    for (i, record) in records.iter().enumerate() {
        let mut rng = DetRng::new(300 + i as u64);
        let image = cusconcept::diffusion::ImageTensor::new(4, 8, 8, rng.uniform_vec(256, 1.0))?;
        save_png(&root.join(&record.image), &image)?;
        manifest.push_str(&serde_json::to_string(record)?);
        manifest.push('\n');
    }
    std::fs::write(root.join("manifest.jsonl"), manifest)?;
    Ok(())
}

fn main() -> cusconcept::Result<()> {
    let out = std::path::PathBuf::from("example-out/benchmark");
    let data = out.join("data");
    write_dataset(&data)?;

    let mut config = RunConfig::default();
    config.encoder.dim = 32;
    config.stage1.steps = 60;
    config.stage2.steps = 60;
    config.vocab.m_obj = 100;
    config.vocab.m_attr_open = 100;
    config.eval.images_per_mode = 2;
    config.log_every = 0;
    config.paths.cache_dir = Some(out.join("cache"));

    println!("method        clip(a+o)  clip(a)  clip(o)  sim(a)   sim(o)   acc(a)  acc(o)");
    for method in [
        Method::Ours,
        Method::TiAlpha,
        Method::TiBeta,
        Method::OursWoJcr,
        Method::OursWoAa,
    ] {
        let mut session = Session::new(config.clone())?;
        let report = run_benchmark(&mut session, &data, method, &out.join(method.as_str()))?;
        let a = &report.aggregates;
        println!(
            "{:<13} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>7.2} {:>7.2}",
            report.method, a.clip_i_ao, a.clip_i_a, a.clip_i_o, a.sim_emb_a, a.sim_emb_o, a.acc_a, a.acc_o
        );
    }
    println!("\nper-row CSVs and aggregate JSON are under {}", out.display());
    Ok(())
}
