//! Concept removal: once an image is decomposed, generating with the object
//! token alone strips the learned attribute information. This example trains
//! a bundle and samples all three single-bundle prompt modes.
//!
//!     cargo run --example concept_removal

use cusconcept::config::RunConfig;
use cusconcept::diffusion::ImageTensor;
use cusconcept::generation::{
    generate, register_bundles, GenerationMode, GenerationRequest, DEFAULT_TEMPLATE,
};
use cusconcept::math::DetRng;
use cusconcept::pipeline::{train_ours, Session, TrainOptions};

fn main() -> cusconcept::Result<()> {
    let out = std::path::PathBuf::from("example-out/concept_removal");
    std::fs::create_dir_all(&out)?;

    let mut config = RunConfig::default();
    config.encoder.dim = 32;
    config.stage1.steps = 80;
    config.stage2.steps = 80;
    config.vocab.m_obj = 120;
    config.log_every = 0;
    config.paths.cache_dir = Some(out.join("cache"));
    let mut session = Session::new(config)?;

    let mut rng = DetRng::new(21);
    let image = ImageTensor::new(4, 8, 8, rng.uniform_vec(256, 1.0))?;
    let trained = train_ours(
        &mut session,
        &image,
        &TrainOptions {
            axes: vec!["color".into()],
            skip_refinement: false,
            no_attribute_axes: false,
        },
    )?;

    let mut space = session.space.fresh();
    let registered = register_bundles(&mut space, &[("demo".into(), trained.bundle)])?;

    for mode in [GenerationMode::APlusO, GenerationMode::AOnly, GenerationMode::OOnly] {
        let request = GenerationRequest {
            mode,
            bundles: vec!["demo".into()],
            attr_from: None,
            obj_from: None,
            template: DEFAULT_TEMPLATE.into(),
            count: 3,
            seed: 11,
            steps: session.config.backend.steps,
            config_hash: session.config_hash.clone(),
        };
        let paths = generate(session.backend.as_ref(), &space, &registered, &request, &out)?;
        println!("{}:", mode.as_str());
        for p in paths {
            println!("  {}", p.display());
        }
    }
    println!("\no_only images are the concept-removal output (object without its attributes)");
    Ok(())
}
