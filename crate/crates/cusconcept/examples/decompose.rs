//! Decompose one image into an object token plus attribute tokens along two
//! user-chosen axes, then save the result as a reusable concept bundle.
//!
//! Runs entirely offline on the tiny CPU backend:
//!
//!     cargo run --example decompose

use cusconcept::config::RunConfig;
use cusconcept::diffusion::ImageTensor;
use cusconcept::math::DetRng;
use cusconcept::pipeline::{train_ours, Session, TrainOptions};
use cusconcept::stage2::save_bundle;

fn main() -> cusconcept::Result<()> {
    let out = std::path::PathBuf::from("example-out/decompose");
    std::fs::create_dir_all(&out)?;

    let mut config = RunConfig::default();
    config.encoder.dim = 32;
    config.stage1.steps = 120;
    config.stage2.steps = 120;
    config.vocab.m_obj = 120;
    config.log_every = 30;
    config.paths.cache_dir = Some(out.join("cache"));

    let mut session = Session::new(config)?;

    // stand-in for a photo: any 8x8 RGBA image works with the tiny backend
    let mut rng = DetRng::new(7);
    let image = ImageTensor::new(4, 8, 8, rng.uniform_vec(256, 1.0))?;

    let trained = train_ours(
        &mut session,
        &image,
        &TrainOptions {
            axes: vec!["age".into(), "mood".into()],
            skip_refinement: false,
            no_attribute_axes: false,
        },
    )?;

    println!("\ntop predicted words per concept:");
    for (axis, words) in &trained.predictions {
        let list: Vec<String> = words.iter().map(|(w, s)| format!("{w} ({s:+.4})")).collect();
        println!("  {axis:<8} {}", list.join(", "));
    }

    let bundle_dir = out.join("bundle");
    save_bundle(&bundle_dir, &trained.bundle)?;
    println!(
        "\nsaved stage-{} bundle with {} tokens to {}",
        trained.bundle.manifest.stage,
        trained.bundle.manifest.tokens.len(),
        bundle_dir.display()
    );
    Ok(())
}
