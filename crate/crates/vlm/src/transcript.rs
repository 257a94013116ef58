//! JSON-lines transcripts: one record per request/response pair. Images
//! are stored by content hash; their bytes go to a sidecar blob directory.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::request::{ImageRef, Stage, VlmRequest, VlmResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub name: String,
    pub media_type: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub model: String,
    pub temperature: f64,
    pub text: String,
    pub images: Vec<ImageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub run: usize,
    pub stage: Stage,
    /// Digest of the request, see [`VlmRequest::key`].
    pub key: String,
    pub request: RequestRecord,
    pub response: VlmResponse,
}

impl TranscriptRecord {
    pub fn new(req: &VlmRequest, response: VlmResponse) -> TranscriptRecord {
        TranscriptRecord {
            run: req.run,
            stage: req.stage,
            key: req.key(),
            request: RequestRecord {
                model: req.model.clone(),
                temperature: req.temperature,
                text: req.text.clone(),
                images: req
                    .images
                    .iter()
                    .map(|i| ImageRecord {
                        name: i.name.clone(),
                        media_type: i.media_type.clone(),
                        sha256: i.sha256.clone(),
                    })
                    .collect(),
            },
            response,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

/// `chair.jsonl` keeps its images in `chair.blobs/`.
pub fn blob_dir(transcript: &Path) -> PathBuf {
    transcript.with_extension("blobs")
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>, TranscriptError> {
    let io = |source| TranscriptError::Io {
        path: path.to_path_buf(),
        source,
    };
    let f = std::fs::File::open(path).map_err(io)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| TranscriptError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

/// Writes the records and stores every referenced image not already in the
/// blob directory.
pub fn write_transcript(
    path: &Path,
    records: &[TranscriptRecord],
    images: &[ImageRef],
) -> Result<(), TranscriptError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| TranscriptError::Io { path: p, source }
    };
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("records serialize"));
        text.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(io(path))?;
    f.write_all(text.as_bytes()).map_err(io(path))?;

    let dir = blob_dir(path);
    let wanted: std::collections::BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.request.images.iter().map(|i| i.sha256.as_str()))
        .collect();
    if wanted.is_empty() {
        return Ok(());
    }
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    for img in images {
        if !wanted.contains(img.sha256.as_str()) {
            continue;
        }
        let p = dir.join(&img.sha256);
        if !p.exists() {
            std::fs::write(&p, img.bytes.as_slice()).map_err(io(&p))?;
        }
    }
    Ok(())
}

/// Loads an image back from the blob store.
pub fn load_blob(transcript: &Path, image: &ImageRecord) -> std::io::Result<ImageRef> {
    let bytes = std::fs::read(blob_dir(transcript).join(&image.sha256))?;
    Ok(ImageRef::from_bytes(
        image.name.clone(),
        image.media_type.clone(),
        bytes,
    ))
}
