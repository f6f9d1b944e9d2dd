//! Review results exported by the review service, version `kfgcorr/1`.
//!
//! ```json
//! {
//!   "version": "kfgcorr/1",
//!   "video_id": "cam1",
//!   "corrections": [
//!     { "task_id": "cam1-000003", "frame_index": 3, "action": "corrected",
//!       "boxes": [ { "class_label": "person", "box": { "x": 1, "y": 2, "w": 3, "h": 4 } } ],
//!       "annotator_id": "ann-1", "timestamp": 1700000000 },
//!     { "task_id": "cam1-000007", "frame_index": 7, "action": "accepted",
//!       "boxes": [], "annotator_id": "ann-1", "timestamp": 1700000005 }
//!   ]
//! }
//! ```
//!
//! A `corrected` entry replaces the frame's boxes; an `accepted` entry keys
//! the frame with its proposed boxes unchanged.

use std::path::Path;

use kfg_core::pipeline::{CorrectedBox, FrameReview, ReviewAction};
use serde::{Deserialize, Serialize};

use super::{check_version, from_value, parse_json, to_json_pretty};
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

pub const CORRECTIONS_VERSION: &str = "kfgcorr/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub task_id: String,
    pub frame_index: usize,
    pub action: ReviewAction,
    #[serde(default)]
    pub boxes: Vec<CorrectedBox>,
    pub annotator_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionsFile {
    pub video_id: String,
    pub corrections: Vec<CorrectionRecord>,
}

impl CorrectionsFile {
    pub fn reviews(&self) -> Vec<FrameReview> {
        self.corrections
            .iter()
            .map(|c| FrameReview {
                frame_index: c.frame_index,
                action: c.action,
                boxes: c.boxes.clone(),
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    version: String,
    #[serde(flatten)]
    body: CorrectionsFile,
}

pub fn parse_corrections_file(text: &str) -> Result<CorrectionsFile> {
    let value = parse_json(text)?;
    check_version(&value, CORRECTIONS_VERSION)?;
    let wire: Wire = from_value(value)?;
    for (i, c) in wire.body.corrections.iter().enumerate() {
        if let Some(j) = c.boxes.iter().position(|b| !b.bbox.is_valid()) {
            return Err(Error::Schema {
                path: format!("corrections[{i}].boxes[{j}].box"),
                message: "box has negative or non-finite extent".into(),
            });
        }
    }
    Ok(wire.body)
}

pub fn emit_corrections_file(file: &CorrectionsFile) -> String {
    to_json_pretty(&Wire {
        version: CORRECTIONS_VERSION.into(),
        body: file.clone(),
    })
}

pub fn read_corrections_file(path: &Path) -> Result<CorrectionsFile> {
    parse_corrections_file(&read_to_string(path)?)
}

pub fn write_corrections_file(path: &Path, file: &CorrectionsFile) -> Result<()> {
    write_atomic(path, emit_corrections_file(file).as_bytes())
}
