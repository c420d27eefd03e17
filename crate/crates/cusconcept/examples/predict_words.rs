//! Vocabulary prediction as a byproduct: the per-word weights learned in the
//! decomposition stage rank the words that best describe the image along
//! each axis, with no refinement needed.
//!
//!     cargo run --example predict_words

use cusconcept::config::RunConfig;
use cusconcept::diffusion::ImageTensor;
use cusconcept::math::DetRng;
use cusconcept::pipeline::{train_ours, Session, TrainOptions};
use cusconcept::stage1::predict_vocabulary;

fn main() -> cusconcept::Result<()> {
    let out = std::path::PathBuf::from("example-out/predict_words");
    std::fs::create_dir_all(&out)?;

    let mut config = RunConfig::default();
    config.encoder.dim = 32;
    config.stage1.steps = 150;
    config.vocab.m_obj = 150;
    config.log_every = 50;
    config.paths.cache_dir = Some(out.join("cache"));
    let mut session = Session::new(config)?;

    let mut rng = DetRng::new(77);
    let image = ImageTensor::new(4, 8, 8, rng.uniform_vec(256, 1.0))?;

    // stage 1 only: the weights are what we are after here
    let trained = train_ours(
        &mut session,
        &image,
        &TrainOptions {
            axes: vec!["age".into(), "texture".into(), "size".into()],
            skip_refinement: true,
            no_attribute_axes: false,
        },
    )?;

    for table in trained.attr_tables.iter().chain(trained.object_table.as_ref()) {
        println!("{} (top 8 of {} words):", table.axis, table.words.len());
        for (word, weight) in predict_vocabulary(table, 8) {
            println!("  {word:<14} {weight:+.5}");
        }
        println!();
    }
    Ok(())
}
