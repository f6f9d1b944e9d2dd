//! Detection-record file, version `kfg/1`.
//!
//! ```json
//! {
//!   "version": "kfg/1",
//!   "video": { "video_id": "cam1", "frame_count": 300, "fps": 30.0, "width": 1920, "height": 1080 },
//!   "detector": { "name": "yolov8x", "imgsz": "640" },
//!   "records": [
//!     { "frame_index": 0, "class_label": "person", "confidence": 0.91,
//!       "box": { "x": 10.0, "y": 20.0, "w": 50.0, "h": 120.0 }, "track_id": 4 }
//!   ]
//! }
//! ```
//!
//! `frame_index` is 0-based, `detector` is free-form string metadata and
//! `track_id` is optional.

use std::collections::BTreeMap;
use std::path::Path;

use kfg_core::model::{Detection, DetectionSet, ModelError, VideoMeta};
use serde::{Deserialize, Serialize};

use super::{check_version, from_value, parse_json, to_json_pretty};
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

pub const DETECTION_VERSION: &str = "kfg/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    version: String,
    video: VideoMeta,
    #[serde(default)]
    detector: BTreeMap<String, String>,
    records: Vec<Detection>,
}

/// Rewrites a validation failure as a schema error at the offending path.
pub(crate) fn schema_error(err: ModelError, records: &str) -> Error {
    let (path, message) = match &err {
        ModelError::InvalidConfidence { index, .. } => (format!("{records}[{index}].confidence"), err.to_string()),
        ModelError::FrameOutOfRange { index, .. } => (format!("{records}[{index}].frame_index"), err.to_string()),
        ModelError::InvalidBox { index } => (format!("{records}[{index}].box"), err.to_string()),
        ModelError::InvalidVideo(msg) => (format!("video.{}", msg.split_whitespace().next().unwrap_or("")), err.to_string()),
        _ => (".".into(), err.to_string()),
    };
    Error::Schema { path, message }
}

pub fn parse_detection_file(text: &str) -> Result<DetectionSet> {
    let value = parse_json(text)?;
    check_version(&value, DETECTION_VERSION)?;
    let wire: Wire = from_value(value)?;
    let set = DetectionSet {
        video: wire.video,
        detector: wire.detector,
        detections: wire.records,
    };
    set.validate().map_err(|e| schema_error(e, "records"))?;
    Ok(set)
}

pub fn emit_detection_file(set: &DetectionSet) -> String {
    to_json_pretty(&Wire {
        version: DETECTION_VERSION.into(),
        video: set.video.clone(),
        detector: set.detector.clone(),
        records: set.detections.clone(),
    })
}

pub fn read_detection_file(path: &Path) -> Result<DetectionSet> {
    parse_detection_file(&read_to_string(path)?)
}

pub fn write_detection_file(path: &Path, set: &DetectionSet) -> Result<()> {
    set.validate().map_err(|e| schema_error(e, "records"))?;
    write_atomic(path, emit_detection_file(set).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use kfg_core::model::ClassLabel;
    use kfg_core::BoundingBox;

    fn video(frames: usize) -> VideoMeta {
        VideoMeta {
            video_id: "cam1".into(),
            frame_count: frames,
            fps: 30.0,
            width: 640,
            height: 480,
            frame_source: None,
        }
    }

    fn det(frame: usize, conf: f64) -> Detection {
        Detection {
            frame_index: frame,
            class_label: ClassLabel::Person,
            confidence: conf,
            bbox: BoundingBox::new(1.25, 2.0, 30.0, 60.5),
            track_id: None,
        }
    }

    #[test]
    fn minimal_round_trip() {
        let set = DetectionSet {
            video: video(1),
            detector: BTreeMap::new(),
            detections: vec![],
        };
        assert_eq!(parse_detection_file(&emit_detection_file(&set)).unwrap(), set);
    }

    #[test]
    fn three_records_round_trip() {
        let mut d = det(2, 0.123456789012345);
        d.track_id = Some(7);
        d.class_label = ClassLabel::Other("shopping cart".into());
        let set = DetectionSet {
            video: video(3),
            detector: BTreeMap::from([("name".into(), "stub".into())]),
            detections: vec![det(0, 0.9), det(1, 0.0), d],
        };
        let text = emit_detection_file(&set);
        assert_eq!(parse_detection_file(&text).unwrap(), set);
        assert_eq!(emit_detection_file(&parse_detection_file(&text).unwrap()), text);
    }

    #[test]
    fn bad_confidence_names_record() {
        let set = DetectionSet {
            video: video(3),
            detector: BTreeMap::new(),
            detections: vec![det(0, 0.9), det(1, 0.5), det(2, 1.5)],
        };
        let err = parse_detection_file(&emit_detection_file(&set)).unwrap_err();
        match err {
            Error::Schema { path, .. } => assert_eq!(path, "records[2].confidence"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn type_errors_name_path() {
        let text = r#"{"version":"kfg/1","video":{"video_id":"a","frame_count":2,"fps":1,"width":1,"height":1},
            "records":[{"frame_index":0,"class_label":"person","confidence":0.5,"box":{"x":0,"y":0,"w":"wide","h":1}}]}"#;
        match parse_detection_file(text).unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "records[0].box.w"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn version_is_required() {
        let text = r#"{"version":"kfg/2","video":{},"records":[]}"#;
        assert!(matches!(parse_detection_file(text), Err(Error::Version { .. })));
        assert!(matches!(parse_detection_file(r#"{"records":[]}"#), Err(Error::Schema { .. })));
    }

    #[test]
    fn frame_out_of_range() {
        let set = DetectionSet {
            video: video(2),
            detector: BTreeMap::new(),
            detections: vec![det(2, 0.5)],
        };
        match parse_detection_file(&emit_detection_file(&set)).unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "records[0].frame_index"),
            e => panic!("{e}"),
        }
    }
}
