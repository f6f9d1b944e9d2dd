//! Core algorithms for key-frame generation (KFG) video annotation.
//!
//! Frames are banded by detection confidence into auto-annotated, review and
//! interpolated sets; sparse key-frame boxes are linked into tracks and
//! interpolated; the result is scored against ground truth by mean IOU.
//! Two comparison baselines (frame differencing and embedding clustering)
//! and the annotation cost arithmetic live here too.
//!
//! The crate is `no_std` and needs only `alloc`; file formats, image decoding,
//! the detector bridge and the review service live in the `kfg` crate.
#![no_std]

extern crate alloc;

pub mod cluster;
pub mod cost;
pub mod eval;
pub mod framediff;
pub mod interpolate;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod policy;
pub mod spline;

pub use model::{
    clamp_box, iou, AnnotationTrack, BoundingBox, ClassLabel, Detection, DetectionSet, Provenance, ThresholdConfig, VideoMeta,
};
