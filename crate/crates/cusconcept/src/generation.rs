//! Prompt composition and image sampling from learned concept tokens.
//!
//! Four modes: attribute+object, attribute-only, object-only (concept
//! removal), and cross-bundle recomposition. Loading several bundles never
//! mixes their vectors: colliding surfaces get a bundle-scoped suffix at
//! registration time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::{Condition, DiffusionBackend};
use crate::embedding::{EmbeddingSpace, TokenEmbedding};
use crate::error::{Error, Result};
use crate::stage2::{ConceptBundle, TokenRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    APlusO,
    AOnly,
    OOnly,
    Recompose,
}

impl GenerationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GenerationMode::APlusO => "a_plus_o",
            GenerationMode::AOnly => "a_only",
            GenerationMode::OOnly => "o_only",
            GenerationMode::Recompose => "recompose",
        }
    }
}

impl std::str::FromStr for GenerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a_plus_o" => Ok(GenerationMode::APlusO),
            "a_only" => Ok(GenerationMode::AOnly),
            "o_only" => Ok(GenerationMode::OOnly),
            "recompose" => Ok(GenerationMode::Recompose),
            other => Err(Error::InvalidRequest { reason: format!("unknown mode {other:?}") }),
        }
    }
}

pub const DEFAULT_TEMPLATE: &str = "a photo of {attrs} {obj}";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub mode: GenerationMode,
    /// Bundle ids in load order (directory names).
    pub bundles: Vec<String>,
    /// Recompose: which bundle supplies the attribute tokens / the object.
    pub attr_from: Option<String>,
    pub obj_from: Option<String>,
    pub template: String,
    pub count: usize,
    pub seed: u64,
    pub steps: usize,
    #[serde(default)]
    pub config_hash: String,
}

/// Tokens registered for one loaded bundle, with post-rename surfaces.
#[derive(Debug, Clone)]
pub struct RegisteredBundle {
    pub id: String,
    pub attr_surfaces: Vec<String>,
    pub object_surface: String,
}

/// Register every token of every bundle into the session space.
///
/// A surface already taken gets `@<bundle-id>` spliced in, so two bundles
/// trained with the same axis names stay distinct.
pub fn register_bundles(
    space: &mut EmbeddingSpace,
    bundles: &[(String, ConceptBundle)],
) -> Result<Vec<RegisteredBundle>> {
    let mut out = Vec::with_capacity(bundles.len());
    for (id, bundle) in bundles {
        if bundle.manifest.embed_dim != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: bundle.manifest.embed_dim,
            });
        }
        let mut attr_surfaces = Vec::new();
        let mut object_surface = None;
        for token in bundle.tokens() {
            let surface = if space.placeholder(&token.surface).is_none() {
                token.surface.clone()
            } else {
                scoped_surface(&token.surface, id)
            };
            space.register_placeholder(
                &surface,
                TokenEmbedding::new(token.values.clone())?,
                false,
            )?;
            match token.role {
                TokenRole::Attribute { .. } => attr_surfaces.push(surface),
                TokenRole::Object => object_surface = Some(surface),
            }
        }
        out.push(RegisteredBundle {
            id: id.clone(),
            attr_surfaces,
            object_surface: object_surface.ok_or_else(|| Error::CorruptBundle {
                path: id.clone(),
                reason: "bundle has no object token".into(),
            })?,
        });
    }
    Ok(out)
}

fn scoped_surface(surface: &str, bundle_id: &str) -> String {
    match surface.strip_suffix('>') {
        Some(stem) => format!("{stem}@{bundle_id}>"),
        None => format!("{surface}@{bundle_id}"),
    }
}

fn find<'a>(
    registered: &'a [RegisteredBundle],
    id: &str,
) -> Result<&'a RegisteredBundle> {
    registered
        .iter()
        .find(|b| b.id == id)
        .ok_or_else(|| Error::UnknownToken { surface: format!("bundle {id}") })
}

/// Deterministic token sequence for a request.
pub fn compose_prompt(
    space: &EmbeddingSpace,
    registered: &[RegisteredBundle],
    request: &GenerationRequest,
) -> Result<Condition> {
    let first = registered.first().ok_or_else(|| Error::InvalidRequest {
        reason: "no bundles loaded".into(),
    })?;
    let (attrs, obj): (Vec<&str>, Option<&str>) = match request.mode {
        GenerationMode::APlusO => (
            first.attr_surfaces.iter().map(|s| s.as_str()).collect(),
            Some(first.object_surface.as_str()),
        ),
        GenerationMode::AOnly => {
            (first.attr_surfaces.iter().map(|s| s.as_str()).collect(), None)
        }
        GenerationMode::OOnly => (Vec::new(), Some(first.object_surface.as_str())),
        GenerationMode::Recompose => {
            let distinct: std::collections::HashSet<&String> =
                registered.iter().map(|b| &b.id).collect();
            if distinct.len() < 2 {
                return Err(Error::InvalidRequest {
                    reason: "recompose needs at least two distinct bundles".into(),
                });
            }
            let attr_bundle = match &request.attr_from {
                Some(id) => find(registered, id)?,
                None => first,
            };
            let obj_bundle = match &request.obj_from {
                Some(id) => find(registered, id)?,
                None => &registered[1],
            };
            if attr_bundle.id == obj_bundle.id {
                return Err(Error::InvalidRequest {
                    reason: "recompose must cross bundles (attr-from == obj-from)".into(),
                });
            }
            (
                attr_bundle.attr_surfaces.iter().map(|s| s.as_str()).collect(),
                Some(obj_bundle.object_surface.as_str()),
            )
        }
    };
    let ids = space.assemble_prompt(&request.template, &attrs, obj)?;
    Ok(Condition::new(ids))
}

/// Sample `count` images and write them (plus a request sidecar) under
/// `out_dir/<bundles>/<mode>/`.
pub fn generate(
    backend: &dyn DiffusionBackend,
    space: &EmbeddingSpace,
    registered: &[RegisteredBundle],
    request: &GenerationRequest,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let condition = compose_prompt(space, registered, request)?;
    let rows = condition.resolve(space)?;
    let bundle_part = request.bundles.join("+");
    let dir = out_dir.join(&bundle_part).join(request.mode.as_str());
    std::fs::create_dir_all(&dir)?;

    let mut paths = Vec::with_capacity(request.count);
    for index in 0..request.count {
        let image = backend.sample(&rows, request.steps, request.seed + index as u64)?;
        let path = dir.join(format!("{}_{index}.png", request.seed));
        crate::image_io::save_png(&path, &image)?;
        paths.push(path);
    }
    std::fs::write(
        dir.join("request.json"),
        serde_json::to_string_pretty(request)?,
    )?;
    Ok(paths)
}
