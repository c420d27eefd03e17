//! Recomposition: learn concepts from two different images and generate with
//! the attribute tokens of one bound to the object token of the other.
//!
//!     cargo run --example recompose

use cusconcept::config::RunConfig;
use cusconcept::diffusion::ImageTensor;
use cusconcept::generation::{
    generate, register_bundles, GenerationMode, GenerationRequest, DEFAULT_TEMPLATE,
};
use cusconcept::math::DetRng;
use cusconcept::pipeline::{train_ours, Session, TrainOptions};

fn train_one(session: &mut Session, seed: u64, axis: &str) -> cusconcept::Result<cusconcept::stage2::ConceptBundle> {
    let mut rng = DetRng::new(seed);
    let image = ImageTensor::new(4, 8, 8, rng.uniform_vec(256, 1.0))?;
    Ok(train_ours(
        session,
        &image,
        &TrainOptions {
            axes: vec![axis.to_string()],
            skip_refinement: false,
            no_attribute_axes: false,
        },
    )?
    .bundle)
}

fn main() -> cusconcept::Result<()> {
    let out = std::path::PathBuf::from("example-out/recompose");
    std::fs::create_dir_all(&out)?;

    let mut config = RunConfig::default();
    config.encoder.dim = 32;
    config.stage1.steps = 80;
    config.stage2.steps = 80;
    config.vocab.m_obj = 120;
    config.log_every = 0;
    config.paths.cache_dir = Some(out.join("cache"));
    let mut session = Session::new(config)?;

    let first = train_one(&mut session, 31, "material")?;
    let second = train_one(&mut session, 32, "age")?;

    let mut space = session.space.fresh();
    let registered = register_bundles(
        &mut space,
        &[("first".into(), first), ("second".into(), second)],
    )?;

    // attributes of the first image on the object of the second
    let request = GenerationRequest {
        mode: GenerationMode::Recompose,
        bundles: vec!["first".into(), "second".into()],
        attr_from: Some("first".into()),
        obj_from: Some("second".into()),
        template: DEFAULT_TEMPLATE.into(),
        count: 4,
        seed: 5,
        steps: session.config.backend.steps,
        config_hash: session.config_hash.clone(),
    };
    let paths = generate(session.backend.as_ref(), &space, &registered, &request, &out)?;
    println!("recomposed images:");
    for p in paths {
        println!("  {}", p.display());
    }
    Ok(())
}
