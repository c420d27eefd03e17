//! Vocabulary acquisition on its own: query the offline fixture provider for
//! several attribute axes, and build an image-ranked object vocabulary from
//! the tokenizer's whole-word universe.
//!
//!     cargo run --example axis_vocabulary

use cusconcept::diffusion::ImageTensor;
use cusconcept::embedding::EmbeddingSpace;
use cusconcept::features::ProjectionScorer;
use cusconcept::math::DetRng;
use cusconcept::vocab::{
    build_object_vocabulary, query_axis_vocabulary, FixtureLlm, LexiconTagger, VocabCacheStore,
};

fn main() -> cusconcept::Result<()> {
    let out = std::path::PathBuf::from("example-out/axis_vocabulary");
    std::fs::create_dir_all(&out)?;

    let space = EmbeddingSpace::clip_synthetic(32, 0);
    let store = VocabCacheStore::new(out.join("cache"));
    let llm = FixtureLlm::bundled();

    for axis in ["age", "color", "material", "mood"] {
        let vocab = query_axis_vocabulary(axis, &llm, &space, 22, &store)?;
        println!("{axis} ({} words): {}", vocab.words.len(), vocab.words.join(", "));
    }

    let universe = space.token_universe();
    println!("\ntokenizer universe: {} whole words", universe.len());

    let mut rng = DetRng::new(5);
    let image = ImageTensor::new(4, 8, 8, rng.uniform_vec(256, 1.0))?;
    let scorer = ProjectionScorer::new(&space, 0);
    let tagger = LexiconTagger::bundled();
    let objects = build_object_vocabulary(&image, universe, &scorer, &tagger, 15)?;
    println!("top image-ranked nouns:");
    for (word, score) in objects.words.iter().zip(&objects.scores) {
        println!("  {word:<14} {score:+.4}");
    }
    Ok(())
}
