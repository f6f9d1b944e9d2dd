//! Precomputed frame embeddings, version `kfgemb/1`.
//!
//! ```json
//! {
//!   "version": "kfgemb/1",
//!   "video_id": "cam1",
//!   "source": "precomputed",
//!   "dim": 3,
//!   "frames": [ { "frame_index": 0, "vector": [0.1, -2.0, 3.5] } ]
//! }
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use kfg_core::cluster::{EmbeddingSource, FrameEmbedding};
use serde::{Deserialize, Serialize};

use super::{check_version, from_value, parse_json, to_json_pretty};
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

pub const EMBEDDING_VERSION: &str = "kfgemb/1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub video_id: String,
    pub source: EmbeddingSource,
    pub dim: usize,
    pub embeddings: Vec<FrameEmbedding>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    frame_index: usize,
    vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    version: String,
    video_id: String,
    source: EmbeddingSource,
    dim: usize,
    frames: Vec<Row>,
}

impl EmbeddingTable {
    pub fn new(video_id: impl Into<String>, source: EmbeddingSource, embeddings: Vec<FrameEmbedding>) -> Self {
        let dim = embeddings.first().map_or(0, |e| e.vector.len());
        Self {
            video_id: video_id.into(),
            source,
            dim,
            embeddings,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, e) in self.embeddings.iter().enumerate() {
            if e.vector.len() != self.dim {
                return Err(Error::Schema {
                    path: format!("frames[{i}].vector"),
                    message: format!("length {} differs from dim {}", e.vector.len(), self.dim),
                });
            }
            if let Some(j) = e.vector.iter().position(|v| !v.is_finite()) {
                return Err(Error::Schema {
                    path: format!("frames[{i}].vector[{j}]"),
                    message: "entry is not finite".into(),
                });
            }
            if !seen.insert(e.frame_index) {
                return Err(Error::Schema {
                    path: format!("frames[{i}].frame_index"),
                    message: format!("frame {} appears twice", e.frame_index),
                });
            }
        }
        Ok(())
    }
}

pub fn parse_embedding_file(text: &str) -> Result<EmbeddingTable> {
    let value = parse_json(text)?;
    check_version(&value, EMBEDDING_VERSION)?;
    let wire: Wire = from_value(value)?;
    let table = EmbeddingTable {
        video_id: wire.video_id,
        source: wire.source,
        dim: wire.dim,
        embeddings: wire
            .frames
            .into_iter()
            .map(|r| FrameEmbedding {
                frame_index: r.frame_index,
                vector: r.vector,
                source: wire.source,
            })
            .collect(),
    };
    table.validate()?;
    Ok(table)
}

pub fn emit_embedding_file(table: &EmbeddingTable) -> String {
    to_json_pretty(&Wire {
        version: EMBEDDING_VERSION.into(),
        video_id: table.video_id.clone(),
        source: table.source,
        dim: table.dim,
        frames: table
            .embeddings
            .iter()
            .map(|e| Row {
                frame_index: e.frame_index,
                vector: e.vector.clone(),
            })
            .collect(),
    })
}

pub fn read_embedding_file(path: &Path) -> Result<EmbeddingTable> {
    parse_embedding_file(&read_to_string(path)?)
}

pub fn write_embedding_file(path: &Path, table: &EmbeddingTable) -> Result<()> {
    table.validate()?;
    write_atomic(path, emit_embedding_file(table).as_bytes())
}
