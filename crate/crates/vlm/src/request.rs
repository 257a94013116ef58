use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The four prompts, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Part names and labels from the scene and the manual's front page.
    PartList,
    /// Roles added using all manual pages.
    PartRoles,
    /// Text step-by-step plan.
    Plan,
    /// Plan converted to a nested list.
    Tree,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::PartList, Stage::PartRoles, Stage::Plan, Stage::Tree];

    pub fn number(self) -> u8 {
        match self {
            Stage::PartList => 1,
            Stage::PartRoles => 2,
            Stage::Plan => 3,
            Stage::Tree => 4,
        }
    }

    pub fn from_number(n: u8) -> Option<Stage> {
        Stage::ALL.get((n as usize).wrapping_sub(1)).copied()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::PartList => "part_list",
            Stage::PartRoles => "part_roles",
            Stage::Plan => "plan",
            Stage::Tree => "tree",
        })
    }
}

/// Image bytes with their content hash.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageRef {
    pub name: String,
    pub media_type: String,
    pub sha256: String,
    pub bytes: Arc<Vec<u8>>,
}

impl fmt::Debug for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageRef")
            .field("name", &self.name)
            .field("sha256", &self.sha256)
            .field("len", &self.bytes.len())
            .finish()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn media_type_for(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("gif") => "image/gif",
        _ => "image/png",
    }
}

impl ImageRef {
    pub fn from_bytes(
        name: impl Into<String>,
        media_type: impl Into<String>,
        bytes: Vec<u8>,
    ) -> ImageRef {
        ImageRef {
            name: name.into(),
            media_type: media_type.into(),
            sha256: sha256_hex(&bytes),
            bytes: Arc::new(bytes),
        }
    }

    pub fn load(path: &Path) -> std::io::Result<ImageRef> {
        let bytes = std::fs::read(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(ImageRef::from_bytes(name, media_type_for(path), bytes))
    }
}

/// Manual pages and the labeled scene for one furniture item.
#[derive(Debug, Clone, PartialEq)]
pub struct ManualDocument {
    pub cover: ImageRef,
    /// All pages I_1..I_N in order.
    pub pages: Vec<ImageRef>,
    pub scene: ImageRef,
    /// Step pages cropped to the parts involved.
    pub cropped: Vec<ImageRef>,
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("manual has no pages")]
    NoPages,
    #[error("item has no scene image")]
    NoScene,
    #[error("cannot read image {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ManualDocument {
    /// Builds a document from image files. The first manual page doubles as
    /// the cover; without cropped pages the plan prompt gets the pages after
    /// the cover (or the only page).
    pub fn from_paths(
        scene: &Path,
        manual: &[PathBuf],
        cropped: &[PathBuf],
    ) -> Result<ManualDocument, DocumentError> {
        let load = |p: &Path| {
            ImageRef::load(p).map_err(|source| DocumentError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        if manual.is_empty() {
            return Err(DocumentError::NoPages);
        }
        let pages = manual
            .iter()
            .map(|p| load(p))
            .collect::<Result<Vec<_>, _>>()?;
        let cropped = cropped
            .iter()
            .map(|p| load(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ManualDocument {
            cover: pages[0].clone(),
            pages,
            scene: load(scene)?,
            cropped,
        })
    }

    /// Document for an item file; paths resolve against the item's directory.
    pub fn from_item(
        item: &assembly_core::item::LoadedItem,
    ) -> Result<ManualDocument, DocumentError> {
        let scene = item
            .item
            .scene_image
            .as_ref()
            .ok_or(DocumentError::NoScene)?;
        let all = |v: &[PathBuf]| v.iter().map(|p| item.resolve(p)).collect::<Vec<_>>();
        ManualDocument::from_paths(
            &item.resolve(scene),
            &all(&item.item.manual_images),
            &all(&item.item.cropped_pages),
        )
    }

    pub fn plan_pages(&self) -> Vec<ImageRef> {
        if !self.cropped.is_empty() {
            self.cropped.clone()
        } else if self.pages.len() > 1 {
            self.pages[1..].to_vec()
        } else {
            self.pages.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VlmRequest {
    pub stage: Stage,
    /// Index of the repeat this request belongs to.
    pub run: usize,
    pub model: String,
    pub temperature: f64,
    pub text: String,
    pub images: Vec<ImageRef>,
}

impl VlmRequest {
    /// Stable digest over model, temperature, text and image hashes.
    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.model.as_bytes());
        h.update([0]);
        h.update(format!("{:?}", self.temperature).as_bytes());
        h.update([0]);
        h.update(self.text.as_bytes());
        for img in &self.images {
            h.update([0]);
            h.update(img.sha256.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VlmResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
    #[serde(default)]
    pub latency_ms: u64,
}

impl VlmResponse {
    pub fn text(text: impl Into<String>) -> VlmResponse {
        VlmResponse {
            text: text.into(),
            usage: Usage::default(),
            latency_ms: 0,
        }
    }
}
