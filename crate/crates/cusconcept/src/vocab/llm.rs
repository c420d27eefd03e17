//! Language-model clients used for axis-vocabulary acquisition.
//!
//! `FixtureLlm` answers from the frozen word lists shipped with the repo, so
//! the whole pipeline runs with no network access. `HttpLlm` talks to any
//! chat-completions-compatible endpoint; credentials come from the
//! environment only.

use std::path::PathBuf;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::vocab::cache::VocabularyCache;

pub trait LlmClient {
    /// Stable provider identifier used in cache keys.
    fn id(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<String>;
}

/// Frozen vocabulary fixtures for the eight benchmark axes.
const FIXTURES: &[&str] = &[
    include_str!("../../data/vocab_cache/age.json"),
    include_str!("../../data/vocab_cache/color.json"),
    include_str!("../../data/vocab_cache/material.json"),
    include_str!("../../data/vocab_cache/mood.json"),
    include_str!("../../data/vocab_cache/size.json"),
    include_str!("../../data/vocab_cache/shape.json"),
    include_str!("../../data/vocab_cache/texture.json"),
    include_str!("../../data/vocab_cache/state.json"),
];

/// Offline provider: replays stored word lists whose recorded prompt matches
/// the incoming one. An optional directory extends or overrides the bundled
/// fixtures.
pub struct FixtureLlm {
    pub dir: Option<PathBuf>,
}

impl FixtureLlm {
    pub fn bundled() -> Self {
        FixtureLlm { dir: None }
    }

    fn lookup(&self, prompt: &str) -> Option<Vec<String>> {
        if let Some(dir) = &self.dir {
            if let Ok(entries) = std::fs::read_dir(dir) {
                let mut paths: Vec<PathBuf> = entries
                    .flatten()
                    .map(|e| e.path())
                    .filter(|p| p.extension().is_some_and(|e| e == "json"))
                    .collect();
                paths.sort();
                for path in paths {
                    if let Ok(text) = std::fs::read_to_string(&path) {
                        if let Ok(entry) = serde_json::from_str::<VocabularyCache>(&text) {
                            if entry.prompt == prompt {
                                return Some(entry.words);
                            }
                        }
                    }
                }
            }
        }
        for fixture in FIXTURES {
            let entry: VocabularyCache =
                serde_json::from_str(fixture).expect("bundled fixture is valid");
            if entry.prompt == prompt {
                return Some(entry.words);
            }
        }
        None
    }
}

impl LlmClient for FixtureLlm {
    fn id(&self) -> String {
        "fixture".into()
    }

    fn complete(&self, prompt: &str) -> Result<String> {
        self.lookup(prompt)
            .map(|words| words.join(", "))
            .ok_or_else(|| Error::VocabularyUnavailable {
                what: prompt.to_string(),
                reason: "no fixture answers this prompt".into(),
            })
    }
}

/// Chat-completions client (single-turn).
pub struct HttpLlm {
    pub base_url: String,
    pub model: String,
    pub api_key: String,
}

impl HttpLlm {
    /// Reads the key from `CUSCONCEPT_LLM_API_KEY`, falling back to
    /// `OPENAI_API_KEY`.
    pub fn from_env(base_url: &str, model: &str) -> Result<Self> {
        let api_key = std::env::var("CUSCONCEPT_LLM_API_KEY")
            .or_else(|_| std::env::var("OPENAI_API_KEY"))
            .map_err(|_| Error::VocabularyUnavailable {
                what: "llm credentials".into(),
                reason: "set CUSCONCEPT_LLM_API_KEY or OPENAI_API_KEY".into(),
            })?;
        Ok(HttpLlm { base_url: base_url.trim_end_matches('/').to_string(), model: model.to_string(), api_key })
    }

    pub fn request_body(&self, prompt: &str) -> serde_json::Value {
        json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": prompt }],
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl LlmClient for HttpLlm {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, prompt: &str) -> Result<String> {
        let unavailable = |reason: String| Error::VocabularyUnavailable {
            what: prompt.to_string(),
            reason,
        };
        let mut response = ureq::post(format!("{}/chat/completions", self.base_url))
            .header("Authorization", format!("Bearer {}", self.api_key))
            .send_json(self.request_body(prompt))
            .map_err(|e| unavailable(format!("request failed: {e}")))?;
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| unavailable(format!("bad response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| unavailable("empty choices".into()))
    }
}
