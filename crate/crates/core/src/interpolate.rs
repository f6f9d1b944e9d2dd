//! Turning sparse key-frame boxes into dense per-object tracks.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{iou, AnnotationTrack, BoundingBox, ClassLabel, Detection, Provenance, VideoMeta};
use crate::spline::NaturalCubicSpline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationMode {
    #[default]
    Linear,
    CubicSpline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Association {
    ByTrackId,
    #[default]
    GreedyIou,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterpolationConfig {
    pub mode: InterpolationMode,
    pub association: Association,
    pub min_association_iou: f64,
    pub clamp_to_frame: bool,
}

impl Default for InterpolationConfig {
    fn default() -> Self {
        Self {
            mode: InterpolationMode::Linear,
            association: Association::GreedyIou,
            min_association_iou: 0.1,
            clamp_to_frame: true,
        }
    }
}

impl InterpolationConfig {
    pub fn validate(&self) -> Result<(), InterpolationError> {
        if !(0.0..=1.0).contains(&self.min_association_iou) {
            return Err(InterpolationError::InvalidMinIou(self.min_association_iou));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpolationError {
    #[error("frame {frame}: detection without track id; use greedy_iou association")]
    MissingTrackId { frame: usize },
    #[error("min_association_iou {0} outside [0, 1]")]
    InvalidMinIou(f64),
}

/// Boxes accepted on one key frame, with where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub frame_index: usize,
    pub provenance: Provenance,
    pub detections: Vec<Detection>,
}

/// Links key-frame boxes into tracks. Returned tracks hold keyed boxes only;
/// track ids are the detector's ids (`ByTrackId`) or sequential from 1.
pub fn associate(keyframes: &[Keyframe], cfg: &InterpolationConfig) -> Result<Vec<AnnotationTrack>, InterpolationError> {
    let mut ordered: Vec<&Keyframe> = keyframes.iter().collect();
    ordered.sort_by_key(|k| k.frame_index);
    match cfg.association {
        Association::ByTrackId => by_track_id(&ordered),
        Association::GreedyIou => Ok(greedy_iou(&ordered, cfg.min_association_iou)),
    }
}

fn by_track_id(keyframes: &[&Keyframe]) -> Result<Vec<AnnotationTrack>, InterpolationError> {
    let mut tracks: BTreeMap<u64, (AnnotationTrack, BTreeMap<usize, f64>)> = BTreeMap::new();
    for kf in keyframes {
        for d in &kf.detections {
            let id = d.track_id.ok_or(InterpolationError::MissingTrackId { frame: kf.frame_index })?;
            let (track, conf) = tracks
                .entry(id)
                .or_insert_with(|| (AnnotationTrack::new(id, d.class_label.clone()), BTreeMap::new()));
            // Duplicate ids on one frame: the most confident box wins.
            let best = conf.entry(kf.frame_index).or_insert(f64::NEG_INFINITY);
            if d.confidence > *best {
                *best = d.confidence;
                track.insert(kf.frame_index, d.bbox, kf.provenance);
            }
        }
    }
    Ok(tracks.into_values().map(|(t, _)| t).collect())
}

fn greedy_iou(keyframes: &[&Keyframe], min_iou: f64) -> Vec<AnnotationTrack> {
    let mut tracks: Vec<AnnotationTrack> = Vec::new();
    // Track index of each box on the previous key frame.
    let mut active: Vec<(usize, BoundingBox, ClassLabel)> = Vec::new();
    for kf in keyframes {
        let dets = &kf.detections;
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (a, (_, prev, class)) in active.iter().enumerate() {
            for (b, d) in dets.iter().enumerate() {
                if &d.class_label != class {
                    continue;
                }
                let v = iou(prev, &d.bbox);
                if v > 0.0 && v >= min_iou {
                    candidates.push((v, a, b));
                }
            }
        }
        candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut prev_used = alloc::vec![false; active.len()];
        let mut link: Vec<Option<usize>> = alloc::vec![None; dets.len()];
        for (_, a, b) in candidates {
            if !prev_used[a] && link[b].is_none() {
                prev_used[a] = true;
                link[b] = Some(active[a].0);
            }
        }
        let mut next_active = Vec::with_capacity(dets.len());
        for (b, d) in dets.iter().enumerate() {
            let t = match link[b] {
                Some(t) => t,
                None => {
                    tracks.push(AnnotationTrack::new(tracks.len() as u64 + 1, d.class_label.clone()));
                    tracks.len() - 1
                }
            };
            tracks[t].insert(kf.frame_index, d.bbox, kf.provenance);
            next_active.push((t, d.bbox, d.class_label.clone()));
        }
        active = next_active;
    }
    tracks
}

/// Fills every frame between the track's first and last key. Keyed frames
/// keep their boxes bit-for-bit; nothing is extrapolated.
pub fn interpolate_track(track: &AnnotationTrack, cfg: &InterpolationConfig, video: &VideoMeta) -> AnnotationTrack {
    let mut out = track.clone();
    let keys: Vec<(usize, BoundingBox)> = track.boxes.iter().map(|(&f, k)| (f, k.bbox)).collect();
    if keys.len() < 2 {
        return out;
    }
    let use_spline = cfg.mode == InterpolationMode::CubicSpline && keys.len() >= 3;
    let splines = if use_spline {
        let xs: Vec<f64> = keys.iter().map(|(f, _)| *f as f64).collect();
        let coord = |sel: fn(&BoundingBox) -> f64| {
            let ys: Vec<f64> = keys.iter().map(|(_, b)| sel(b)).collect();
            NaturalCubicSpline::fit(&xs, &ys)
        };
        match (coord(|b| b.x), coord(|b| b.y), coord(|b| b.w), coord(|b| b.h)) {
            (Some(x), Some(y), Some(w), Some(h)) => Some([x, y, w, h]),
            _ => None,
        }
    } else {
        None
    };

    for pair in keys.windows(2) {
        let (f0, b0) = pair[0];
        let (f1, b1) = pair[1];
        for f in f0 + 1..f1 {
            let mut b = match &splines {
                Some([sx, sy, sw, sh]) => {
                    let t = f as f64;
                    BoundingBox::new(sx.eval(t), sy.eval(t), sw.eval(t).max(0.0), sh.eval(t).max(0.0))
                }
                None => lerp_box(&b0, &b1, (f - f0) as f64 / (f1 - f0) as f64),
            };
            if cfg.clamp_to_frame {
                b = crate::model::clamp_box(&b, video);
            }
            out.insert(f, b, Provenance::Interpolated);
        }
    }
    out
}

fn lerp_box(a: &BoundingBox, b: &BoundingBox, t: f64) -> BoundingBox {
    let l = |p: f64, q: f64| p + (q - p) * t;
    BoundingBox::new(l(a.x, b.x), l(a.y, b.y), l(a.w, b.w), l(a.h, b.h))
}
