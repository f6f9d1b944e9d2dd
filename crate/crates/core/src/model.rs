//! Shared domain types: boxes, detections, video metadata, tracks and thresholds.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Axis-aligned box in `(left, top, width, height)` form, sub-pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Finite coordinates and non-negative extent.
    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite() && self.w >= 0.0 && self.h >= 0.0
    }

    /// Intersects the box with `[0, width] x [0, height]`.
    pub fn clamp_to(&self, width: f64, height: f64) -> Self {
        let x0 = self.x.max(0.0).min(width);
        let y0 = self.y.max(0.0).min(height);
        let x1 = self.right().min(width).max(x0);
        let y1 = self.bottom().min(height).max(y0);
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// Intersection area over union area. Two zero-area boxes score 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let left = a.x.max(b.x);
    let top = a.y.max(b.y);
    let right = a.right().min(b.right());
    let bottom = a.bottom().min(b.bottom());
    let inter = if right > left && bottom > top {
        (right - left) * (bottom - top)
    } else {
        0.0
    };
    // Areas from corners so that iou(a, a) is exactly 1.
    let area = |r: &BoundingBox| (r.right() - r.x) * (r.bottom() - r.y);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Clips a box to the video's frame rectangle.
pub fn clamp_box(bbox: &BoundingBox, video: &VideoMeta) -> BoundingBox {
    bbox.clamp_to(f64::from(video.width), f64::from(video.height))
}

/// Object class. The three named classes cover the retail use case; anything
/// else a detector reports is carried through verbatim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum ClassLabel {
    Person,
    Animal,
    Vehicle,
    Other(String),
}

impl ClassLabel {
    pub fn as_str(&self) -> &str {
        match self {
            ClassLabel::Person => "person",
            ClassLabel::Animal => "animal",
            ClassLabel::Vehicle => "vehicle",
            ClassLabel::Other(s) => s.as_str(),
        }
    }
}

impl From<String> for ClassLabel {
    fn from(s: String) -> Self {
        match s.as_str() {
            "person" => ClassLabel::Person,
            "animal" => ClassLabel::Animal,
            "vehicle" => ClassLabel::Vehicle,
            _ => ClassLabel::Other(s),
        }
    }
}

impl From<ClassLabel> for String {
    fn from(c: ClassLabel) -> Self {
        c.as_str().to_string()
    }
}

impl FromStr for ClassLabel {
    type Err = core::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(ClassLabel::from(s.to_string()))
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One detected box on one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_index: usize,
    pub class_label: ClassLabel,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub frame_count: usize,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_source: Option<String>,
}

impl VideoMeta {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.frame_count == 0 {
            return Err(ModelError::InvalidVideo("frame_count must be at least 1"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(ModelError::InvalidVideo("fps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Human,
    Auto,
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyedBox {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub provenance: Provenance,
}

/// Per-object time series of boxes, keyed by 0-based frame index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTrack {
    pub track_id: u64,
    pub class_label: ClassLabel,
    pub boxes: BTreeMap<usize, KeyedBox>,
}

impl AnnotationTrack {
    pub fn new(track_id: u64, class_label: ClassLabel) -> Self {
        Self {
            track_id,
            class_label,
            boxes: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, frame: usize, bbox: BoundingBox, provenance: Provenance) {
        self.boxes.insert(frame, KeyedBox { bbox, provenance });
    }

    pub fn first_frame(&self) -> Option<usize> {
        self.boxes.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<usize> {
        self.boxes.keys().next_back().copied()
    }
}

/// Groups tracks into per-frame box lists, in track order.
pub fn boxes_by_frame(tracks: &[AnnotationTrack]) -> BTreeMap<usize, Vec<BoundingBox>> {
    let mut out: BTreeMap<usize, Vec<BoundingBox>> = BTreeMap::new();
    for t in tracks {
        for (&f, k) in &t.boxes {
            out.entry(f).or_default().push(k.bbox);
        }
    }
    out
}

/// Band boundaries for confidence banding plus the evaluation IOU cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Confidence at or above which a frame is auto-annotated.
    pub th1: f64,
    /// Confidence below which a frame is left to interpolation.
    pub th2: f64,
    pub iou_threshold: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            th1: 0.5,
            th2: 0.3,
            iou_threshold: 0.5,
        }
    }
}

impl ThresholdConfig {
    pub fn new(th1: f64, th2: f64, iou_threshold: f64) -> Result<Self, ModelError> {
        let cfg = Self { th1, th2, iou_threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Single-threshold mode: the VERIFY band is empty.
    pub fn single(th1: f64) -> Result<Self, ModelError> {
        Self::new(th1, th1, ThresholdConfig::default().iou_threshold)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.th1) && unit(self.th2) && self.th2 <= self.th1) {
            return Err(ModelError::InvalidThresholds {
                th1: self.th1,
                th2: self.th2,
            });
        }
        if !unit(self.iou_threshold) {
            return Err(ModelError::InvalidIouThreshold(self.iou_threshold));
        }
        Ok(())
    }
}

/// A video's detections as delivered by a detector, plus opaque detector metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub video: VideoMeta,
    #[serde(default)]
    pub detector: BTreeMap<String, String>,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.video.validate()?;
        for (index, d) in self.detections.iter().enumerate() {
            validate_detection(index, d, self.video.frame_count)?;
        }
        Ok(())
    }

    /// Detections bucketed by frame; the outer vector has one entry per frame.
    pub fn per_frame(&self) -> Vec<Vec<&Detection>> {
        let mut frames: Vec<Vec<&Detection>> = (0..self.video.frame_count).map(|_| Vec::new()).collect();
        for d in &self.detections {
            if let Some(slot) = frames.get_mut(d.frame_index) {
                slot.push(d);
            }
        }
        frames
    }
}

pub fn validate_detection(index: usize, d: &Detection, frame_count: usize) -> Result<(), ModelError> {
    if !(d.confidence.is_finite() && (0.0..=1.0).contains(&d.confidence)) {
        return Err(ModelError::InvalidConfidence {
            index,
            confidence: d.confidence,
        });
    }
    if d.frame_index >= frame_count {
        return Err(ModelError::FrameOutOfRange {
            index,
            frame: d.frame_index,
            frame_count,
        });
    }
    if !d.bbox.is_valid() {
        return Err(ModelError::InvalidBox { index });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid video metadata: {0}")]
    InvalidVideo(&'static str),
    #[error("record {index}: confidence {confidence} outside [0, 1]")]
    InvalidConfidence { index: usize, confidence: f64 },
    #[error("record {index}: frame {frame} outside video of {frame_count} frames")]
    FrameOutOfRange { index: usize, frame: usize, frame_count: usize },
    #[error("record {index}: box has negative or non-finite extent")]
    InvalidBox { index: usize },
    #[error("thresholds must satisfy 0 <= th2 <= th1 <= 1 (got th1={th1}, th2={th2})")]
    InvalidThresholds { th1: f64, th2: f64 },
    #[error("iou threshold {0} outside [0, 1]")]
    InvalidIouThreshold(f64),
}
