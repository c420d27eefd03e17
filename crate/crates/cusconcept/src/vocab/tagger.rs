//! Part-of-speech tagging via lookup lexicons. A word may be both a noun and
//! an adjective; the two predicates are independent.

use std::collections::HashSet;
use std::path::Path;

use crate::error::Result;

pub trait PosTagger {
    fn id(&self) -> String;
    fn is_noun(&self, word: &str) -> bool;
    fn is_adjective(&self, word: &str) -> bool;
}

pub struct LexiconTagger {
    nouns: HashSet<String>,
    adjectives: HashSet<String>,
    id: String,
}

impl LexiconTagger {
    pub fn bundled() -> Self {
        LexiconTagger {
            nouns: parse_list(include_str!("../../data/lexicon/nouns.txt")),
            adjectives: parse_list(include_str!("../../data/lexicon/adjectives.txt")),
            id: "lexicon-bundled".into(),
        }
    }

    pub fn from_files(nouns: &Path, adjectives: &Path) -> Result<Self> {
        Ok(LexiconTagger {
            nouns: parse_list(&std::fs::read_to_string(nouns)?),
            adjectives: parse_list(&std::fs::read_to_string(adjectives)?),
            id: format!("lexicon:{}", nouns.display()),
        })
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.nouns.len(), self.adjectives.len())
    }
}

fn parse_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

impl PosTagger for LexiconTagger {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn is_noun(&self, word: &str) -> bool {
        self.nouns.contains(&word.to_lowercase())
    }

    fn is_adjective(&self, word: &str) -> bool {
        self.adjectives.contains(&word.to_lowercase())
    }
}

/// Predicate-backed tagger for tests and custom setups.
pub struct FnTagger<N, A>
where
    N: Fn(&str) -> bool,
    A: Fn(&str) -> bool,
{
    pub noun: N,
    pub adjective: A,
}

impl<N, A> PosTagger for FnTagger<N, A>
where
    N: Fn(&str) -> bool,
    A: Fn(&str) -> bool,
{
    fn id(&self) -> String {
        "fn-tagger".into()
    }

    fn is_noun(&self, word: &str) -> bool {
        (self.noun)(word)
    }

    fn is_adjective(&self, word: &str) -> bool {
        (self.adjective)(word)
    }
}
