//! Prompt template sets for the text-side metrics.
//!
//! The benchmark protocol needs one template set for attributes and one for
//! objects, eleven prompts each with a single slot. The exact upstream sets
//! are not published with the dataset, so this versioned stand-in ships as
//! the default; both lists are swappable from config without code changes.

use std::path::Path;

use crate::error::{Error, Result};

pub const TEMPLATE_SET_VERSION: &str = "standin-v1";

#[derive(Debug, Clone)]
pub struct PromptTemplateSet {
    pub version: String,
    pub attribute: Vec<String>,
    pub object: Vec<String>,
}

const ATTRIBUTE_TEMPLATES: [&str; 11] = [
    "a photo of a {} object",
    "an image of something {}",
    "a picture of a {} thing",
    "a {} item",
    "a photo of something very {}",
    "a cropped photo of a {} object",
    "a close-up of something {}",
    "a bright photo of a {} thing",
    "a rendering of a {} object",
    "a snapshot of something {}",
    "a detailed photo of a {} item",
];

const OBJECT_TEMPLATES: [&str; 11] = [
    "a photo of a {}",
    "an image of a {}",
    "a picture of a {}",
    "a photo of the {}",
    "a close-up photo of a {}",
    "a cropped photo of a {}",
    "a bright photo of a {}",
    "a rendering of a {}",
    "a snapshot of a {}",
    "a detailed photo of a {}",
    "a photo of one {}",
];

impl PromptTemplateSet {
    pub fn standin_v1() -> Self {
        PromptTemplateSet {
            version: TEMPLATE_SET_VERSION.into(),
            attribute: ATTRIBUTE_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            object: OBJECT_TEMPLATES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// One template per line; the version records the file provenance.
    pub fn from_files(attribute: &Path, object: &Path) -> Result<Self> {
        let read = |path: &Path| -> Result<Vec<String>> {
            Ok(std::fs::read_to_string(path)?
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect())
        };
        let set = PromptTemplateSet {
            version: format!("files:{}+{}", attribute.display(), object.display()),
            attribute: read(attribute)?,
            object: read(object)?,
        };
        set.validate()?;
        Ok(set)
    }

    /// Every template must contain exactly one slot.
    pub fn validate(&self) -> Result<()> {
        for t in self.attribute.iter().chain(&self.object) {
            if t.matches("{}").count() != 1 {
                return Err(Error::Config {
                    reason: format!("template {t:?} must contain exactly one {{}} slot"),
                });
            }
        }
        Ok(())
    }
}
