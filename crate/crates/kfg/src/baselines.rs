//! Baselines over image sequences on disk.

use std::collections::BTreeMap;

use kfg_core::cluster::{EmbeddingSource, FrameEmbedding};
use kfg_core::eval::{score_video, VideoScore};
use kfg_core::framediff::{pixel_embedding, DiffMetric, FrameDiffSelector};
use kfg_core::interpolate::{associate, interpolate_track, Association, InterpolationConfig, Keyframe};
use kfg_core::model::{clamp_box, AnnotationTrack, Detection, Provenance, VideoMeta};
use kfg_core::pipeline::PipelineError;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frames::FrameSequence;

/// Frame-difference keyframes, decoding one frame at a time.
pub fn framediff_sequence(seq: &FrameSequence, metric: DiffMetric, threshold: f64) -> Result<Vec<usize>> {
    let mut sel = FrameDiffSelector::new(metric, threshold);
    for i in 0..seq.len() {
        let frame = seq.load(i)?;
        sel.push(&frame).map_err(|e| Error::Image {
            frame: i,
            message: e.to_string(),
        })?;
    }
    Ok(sel.finish())
}

/// 32x32 grayscale embeddings for every frame, in frame order.
pub fn pixel_embeddings(seq: &FrameSequence) -> Result<Vec<FrameEmbedding>> {
    (0..seq.len())
        .into_par_iter()
        .map(|i| {
            let frame = seq.load(i)?;
            Ok(FrameEmbedding {
                frame_index: i,
                vector: pixel_embedding(&frame),
                source: EmbeddingSource::PixelBaseline,
            })
        })
        .collect()
}

/// Scores a keyframe set as if a human annotated exactly those frames: GT boxes
/// are taken as the human annotation of each keyframe and interpolated.
pub fn score_keyframe_set(
    gt: &[AnnotationTrack],
    keyframes: &[usize],
    video: &VideoMeta,
    icfg: &InterpolationConfig,
) -> Result<VideoScore> {
    let per_frame = gt_detections_by_frame(gt);
    let keys: Vec<Keyframe> = keyframes
        .iter()
        .map(|&f| Keyframe {
            frame_index: f,
            provenance: Provenance::Human,
            detections: per_frame.get(&f).cloned().unwrap_or_default(),
        })
        .collect();
    let cfg = InterpolationConfig {
        association: Association::ByTrackId,
        ..*icfg
    };
    let linked = associate(&keys, &cfg).map_err(PipelineError::from)?;
    let dense: Vec<AnnotationTrack> = linked
        .iter()
        .map(|t| {
            let mut d = interpolate_track(t, &cfg, video);
            if cfg.clamp_to_frame {
                for k in d.boxes.values_mut() {
                    k.bbox = clamp_box(&k.bbox, video);
                }
            }
            d
        })
        .collect();
    Ok(score_video(gt, &dense).map_err(PipelineError::from)?)
}

fn gt_detections_by_frame(gt: &[AnnotationTrack]) -> BTreeMap<usize, Vec<Detection>> {
    let mut out: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    for t in gt {
        for (&f, kb) in &t.boxes {
            out.entry(f).or_default().push(Detection {
                frame_index: f,
                class_label: t.class_label.clone(),
                confidence: 1.0,
                bbox: kb.bbox,
                track_id: Some(t.track_id),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{linear_motion_gt, video_meta};

    #[test]
    fn endpoints_of_linear_motion_reconstruct_everything() {
        let gt = linear_motion_gt(21, 2);
        let video = video_meta("v", 21, 2000, 2000);
        let s = score_keyframe_set(&gt, &[0, 20], &video, &InterpolationConfig::default()).unwrap();
        assert!(s.mean_iou > 1.0 - 1e-9);
        let s = score_keyframe_set(&gt, &[0, 10], &video, &InterpolationConfig::default()).unwrap();
        assert!((s.mean_iou - 11.0 / 21.0).abs() < 1e-9);
    }
}
