//! Axis-wise attribute vocabularies and the per-image object vocabulary.
//!
//! Attribute words come from a language-model query per user-specified axis;
//! object words come from ranking the tokenizer's whole-word universe by
//! image similarity and keeping nouns. Everything is normalized down to
//! lowercase single-token words and cached on disk, so warm runs are
//! deterministic and offline.

pub mod cache;
pub mod llm;
pub mod tagger;

use crate::diffusion::ImageTensor;
use crate::embedding::{EmbeddingSpace, TokenUniverse};
use crate::error::{Error, Result};
use crate::features::WordImageScorer;

pub use cache::{now_iso8601, VocabCacheStore, VocabularyCache};
pub use llm::{FixtureLlm, HttpLlm, LlmClient};
pub use tagger::{FnTagger, LexiconTagger, PosTagger};

/// A human-specified axis name plus its acquired vocabulary.
#[derive(Debug, Clone)]
pub struct AttributeAxis {
    pub name: String,
    pub words: Vec<String>,
    /// Set when fewer usable words than requested survived filtering.
    pub short: bool,
}

/// Noun list ranked by image relevance, scores non-increasing.
#[derive(Debug, Clone)]
pub struct ObjectVocabulary {
    pub words: Vec<String>,
    pub scores: Vec<f64>,
    pub short: bool,
}

/// The exact acquisition prompt sent for an axis.
pub fn axis_prompt(axis: &str) -> String {
    format!("Give me some simple English words that indicate {axis}")
}

/// Split a model response into word candidates: comma/semicolon/newline
/// separated, surrounding punctuation stripped, lowercased. Entries with
/// internal non-letter characters are dropped.
pub fn parse_word_list(raw: &str) -> Vec<String> {
    raw.split([',', ';', '\n'])
        .filter_map(|piece| {
            let trimmed: &str = piece
                .trim_matches(|c: char| !c.is_ascii_alphabetic());
            if trimmed.is_empty() || !trimmed.chars().all(|c| c.is_ascii_alphabetic()) {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

/// Dedup (case-folded, keep-first), drop words that are not a single token,
/// cap at `n`.
pub fn normalize_words(candidates: Vec<String>, space: &EmbeddingSpace, n: usize) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for word in candidates {
        if out.len() >= n {
            break;
        }
        if !seen.insert(word.clone()) {
            continue;
        }
        if space.embed_word(&word).is_ok() {
            out.push(word);
        }
    }
    out
}

/// Acquire (or replay) the vocabulary for one attribute axis.
///
/// Cache hits are returned verbatim with no provider call; a corrupt cache
/// entry falls through to a fresh query.
pub fn query_axis_vocabulary(
    axis: &str,
    llm: &dyn LlmClient,
    space: &EmbeddingSpace,
    n: usize,
    store: &VocabCacheStore,
) -> Result<AttributeAxis> {
    let prompt = axis_prompt(axis);
    let provider = llm.id();
    match store.load("attribute_axis", axis, &provider, &prompt) {
        Ok(Some(hit)) => {
            let short = hit.words.len() < n;
            return Ok(AttributeAxis { name: axis.to_string(), words: hit.words, short });
        }
        Ok(None) => {}
        Err(Error::CacheCorrupt { .. }) => {}
        Err(e) => return Err(e),
    }

    let response = llm.complete(&prompt).map_err(|e| Error::VocabularyUnavailable {
        what: format!("axis {axis:?}"),
        reason: e.to_string(),
    })?;
    let words = normalize_words(parse_word_list(&response), space, n);
    if words.is_empty() {
        return Err(Error::VocabularyUnavailable {
            what: format!("axis {axis:?}"),
            reason: "no usable words in provider response".into(),
        });
    }
    let short = words.len() < n;
    store.save(&VocabularyCache {
        kind: "attribute_axis".into(),
        key: axis.to_string(),
        provider,
        prompt,
        words: words.clone(),
        scores: None,
        created_at: now_iso8601(),
    })?;
    Ok(AttributeAxis { name: axis.to_string(), words, short })
}

/// Rank the universe by image similarity, scan downward keeping words the
/// predicate accepts, stop at `m`.
fn ranked_filtered(
    image: &ImageTensor,
    universe: &TokenUniverse,
    scorer: &dyn WordImageScorer,
    keep: &dyn Fn(&str) -> bool,
    m: usize,
) -> Result<(Vec<String>, Vec<f64>)> {
    if universe.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let words: Vec<String> = universe.words().map(|w| w.to_string()).collect();
    let scores = scorer.score_words(image, &words)?;
    if scores.len() != words.len() {
        return Err(Error::DimensionMismatch { expected: words.len(), got: scores.len() });
    }
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| words[a].cmp(&words[b]))
    });
    let mut out_words = Vec::with_capacity(m);
    let mut out_scores = Vec::with_capacity(m);
    for idx in order {
        if out_words.len() >= m {
            break;
        }
        if keep(&words[idx]) {
            out_words.push(words[idx].clone());
            out_scores.push(scores[idx]);
        }
    }
    Ok((out_words, out_scores))
}

/// Similarity-ranked, noun-filtered object vocabulary of (up to) `m` words.
pub fn build_object_vocabulary(
    image: &ImageTensor,
    universe: &TokenUniverse,
    scorer: &dyn WordImageScorer,
    tagger: &dyn PosTagger,
    m: usize,
) -> Result<ObjectVocabulary> {
    let (words, scores) = ranked_filtered(image, universe, scorer, &|w| tagger.is_noun(w), m)?;
    let short = words.len() < m;
    Ok(ObjectVocabulary { words, scores, short })
}

/// Open-set attribute vocabulary: like the object path but keeping
/// adjectives. Used when no attribute axes are specified.
pub fn build_openset_attribute_vocabulary(
    image: &ImageTensor,
    universe: &TokenUniverse,
    scorer: &dyn WordImageScorer,
    tagger: &dyn PosTagger,
    m: usize,
) -> Result<AttributeAxis> {
    let (words, _) = ranked_filtered(image, universe, scorer, &|w| tagger.is_adjective(w), m)?;
    let short = words.len() < m;
    Ok(AttributeAxis { name: "attribute".into(), words, short })
}
