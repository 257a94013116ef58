//! Furniture item files: parts, connectivity, equivalences, ground-truth
//! tree and manual images.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{load_cloud, CloudIoError, PointCloud};
use crate::graph::{parse_tree, validate, AssemblyGraph, Connectivity, PartId, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPart {
    pub id: PartId,
    #[serde(default)]
    pub name: String,
    /// Point cloud file relative to the item file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<PathBuf>,
}

/// Nested-list tree stored either as a JSON array or as a string.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedList(pub Tree);

impl Serialize for NestedList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: serde_json::Value =
            serde_json::from_str(&self.0.to_string()).map_err(serde::ser::Error::custom)?;
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NestedList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let text = match v {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        parse_tree(&text)
            .map(NestedList)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnitureItem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub parts: Vec<ItemPart>,
    #[serde(default)]
    pub connectivity: Vec<(PartId, PartId)>,
    #[serde(default)]
    pub equivalences: Vec<(PartId, PartId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_tree: Option<NestedList>,
    /// Manual pages in order; the first is the front page.
    #[serde(default)]
    pub manual_images: Vec<PathBuf>,
    /// Labeled pre-assembly scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_image: Option<PathBuf>,
    /// Step pages cropped to the parts involved; the plan prompt falls back
    /// to the manual pages after the front page when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cropped_pages: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ItemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad item JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Cloud(#[from] CloudIoError),
    #[error("part {0} has no cloud file")]
    NoCloud(PartId),
    #[error("item has no ground-truth tree")]
    NoTree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemIssue {
    pub message: String,
}

impl fmt::Display for ItemIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// An item together with the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedItem {
    pub item: FurnitureItem,
    pub base: PathBuf,
}

impl FurnitureItem {
    pub fn load(path: &Path) -> Result<LoadedItem, ItemError> {
        let text = std::fs::read_to_string(path).map_err(|source| ItemError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let item = serde_json::from_str(&text).map_err(|source| ItemError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(LoadedItem {
            item,
            base: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        })
    }

    pub fn part_ids(&self) -> BTreeSet<PartId> {
        self.parts.iter().map(|p| p.id).collect()
    }

    /// Ground-truth graph with the item's equivalences attached.
    pub fn gt_graph(&self) -> Option<AssemblyGraph> {
        self.gt_tree
            .as_ref()
            .map(|t| AssemblyGraph::from_tree(&t.0, self.equivalences.iter().copied()))
    }

    pub fn connectivity(&self) -> Connectivity {
        Connectivity::from_edges(self.part_ids(), self.connectivity.iter().copied())
    }

    /// Consistency problems, empty for a valid item. File references are
    /// checked relative to `base`.
    pub fn check(&self, base: &Path) -> Vec<ItemIssue> {
        let mut out = Vec::new();
        let mut issue = |m: String| out.push(ItemIssue { message: m });
        let ids = self.part_ids();
        if ids.len() != self.parts.len() {
            issue("duplicate part ids".into());
        }
        if ids.len() < 2 {
            issue(format!(
                "an item needs at least 2 parts, found {}",
                ids.len()
            ));
        }
        for (a, b) in self.connectivity.iter().chain(&self.equivalences) {
            for p in [a, b] {
                if !ids.contains(p) {
                    issue(format!("pair ({a},{b}) names unknown part {p}"));
                }
            }
        }
        for p in &self.parts {
            if let Some(c) = &p.cloud {
                if !base.join(c).is_file() {
                    issue(format!(
                        "part {}: cloud file {} not found",
                        p.id,
                        c.display()
                    ));
                }
            }
        }
        for img in self
            .manual_images
            .iter()
            .chain(&self.cropped_pages)
            .chain(self.scene_image.iter())
        {
            if !base.join(img).is_file() {
                issue(format!("image {} not found", img.display()));
            }
        }
        match self.gt_graph() {
            None => issue("missing gt_tree".into()),
            Some(g) => {
                for v in validate(&g) {
                    issue(format!("gt_tree: {v}"));
                }
                let leaves = g.parts();
                let missing: Vec<String> = ids.difference(&leaves).map(|p| p.to_string()).collect();
                let extra: Vec<String> = leaves.difference(&ids).map(|p| p.to_string()).collect();
                if !missing.is_empty() {
                    issue(format!("gt_tree lacks parts {}", missing.join(",")));
                }
                if !extra.is_empty() {
                    issue(format!("gt_tree names unknown parts {}", extra.join(",")));
                }
            }
        }
        out
    }
}

impl LoadedItem {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    pub fn load_clouds(&self) -> Result<BTreeMap<PartId, PointCloud>, ItemError> {
        self.item
            .parts
            .iter()
            .map(|p| {
                let path = p.cloud.as_ref().ok_or(ItemError::NoCloud(p.id))?;
                Ok((p.id, load_cloud(&self.base.join(path), p.id)?))
            })
            .collect()
    }

    pub fn check(&self) -> Vec<ItemIssue> {
        self.item.check(&self.base)
    }
}
