//! Scoring produced annotations against ground truth.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{boxes_by_frame, iou, AnnotationTrack, BoundingBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no ground truth")]
    NoGroundTruth,
    #[error("sweep needs at least one video")]
    NoVideos,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatch {
    /// `(gt index, pred index, iou)` in the order they were matched.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

/// Greedy one-to-one matching in descending IOU order. Pairs that do not
/// overlap are never matched.
pub fn match_frame(gt: &[BoundingBox], pred: &[BoundingBox]) -> FrameMatch {
    let mut cands: Vec<(f64, usize, usize)> = Vec::with_capacity(gt.len() * pred.len());
    for (g, gb) in gt.iter().enumerate() {
        for (p, pb) in pred.iter().enumerate() {
            let v = iou(gb, pb);
            if v > 0.0 {
                cands.push((v, g, p));
            }
        }
    }
    greedy_pairs(cands, gt.len(), pred.len())
}

/// Greedy matching over a precomputed score matrix (`scores[g][p]`).
pub fn match_scores(scores: &[Vec<f64>], n_pred: usize) -> FrameMatch {
    let mut cands = Vec::new();
    for (g, row) in scores.iter().enumerate() {
        for (p, &v) in row.iter().enumerate() {
            if v > 0.0 {
                cands.push((v, g, p));
            }
        }
    }
    greedy_pairs(cands, scores.len(), n_pred)
}

fn greedy_pairs(mut cands: Vec<(f64, usize, usize)>, n_gt: usize, n_pred: usize) -> FrameMatch {
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = alloc::vec![false; n_gt];
    let mut pred_used = alloc::vec![false; n_pred];
    let mut pairs = Vec::new();
    for (v, g, p) in cands {
        if !gt_used[g] && !pred_used[p] {
            gt_used[g] = true;
            pred_used[p] = true;
            pairs.push((g, p, v));
        }
    }
    FrameMatch {
        pairs,
        unmatched_gt: (0..n_gt).filter(|g| !gt_used[*g]).collect(),
        unmatched_pred: (0..n_pred).filter(|p| !pred_used[*p]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub frame_index: usize,
    pub gt_boxes: usize,
    /// Matched IOU sum over the frame's GT box count.
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub mean_iou: f64,
    pub gt_boxes: usize,
    pub matched: usize,
    pub unmatched_gt: usize,
    pub false_positives: usize,
    pub per_frame: Vec<FrameScore>,
}

/// Mean IOU over ground-truth boxes: every GT box scores the IOU of its match
/// or 0. Frames without GT are skipped; extra predictions are only counted.
pub fn score_video(gt: &[AnnotationTrack], produced: &[AnnotationTrack]) -> Result<VideoScore, EvalError> {
    let gt_frames = boxes_by_frame(gt);
    let pred_frames = boxes_by_frame(produced);
    let empty = Vec::new();
    let mut total = 0.0;
    let mut gt_boxes = 0;
    let mut matched = 0;
    let mut false_positives = 0;
    let mut per_frame = Vec::with_capacity(gt_frames.len());
    for (&f, gts) in &gt_frames {
        if gts.is_empty() {
            continue;
        }
        let preds = pred_frames.get(&f).unwrap_or(&empty);
        let m = match_frame(gts, preds);
        let sum: f64 = m.pairs.iter().map(|p| p.2).sum();
        total += sum;
        gt_boxes += gts.len();
        matched += m.pairs.len();
        false_positives += m.unmatched_pred.len();
        per_frame.push(FrameScore {
            frame_index: f,
            gt_boxes: gts.len(),
            iou: sum / gts.len() as f64,
        });
    }
    false_positives += pred_frames
        .iter()
        .filter(|(f, _)| !gt_frames.contains_key(f))
        .map(|(_, p)| p.len())
        .sum::<usize>();
    if gt_boxes == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    Ok(VideoScore {
        mean_iou: (total / gt_boxes as f64).clamp(0.0, 1.0),
        gt_boxes,
        matched,
        unmatched_gt: gt_boxes - matched,
        false_positives,
        per_frame,
    })
}

pub fn video_mean_iou(gt: &[AnnotationTrack], produced: &[AnnotationTrack]) -> Result<f64, EvalError> {
    score_video(gt, produced).map(|s| s.mean_iou)
}

/// IOU cut points used for the "videos above threshold" columns.
pub const IOU_CUTS: [f64; 8] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Median with the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Counts how many of `values` exceed each cut (strictly).
pub fn count_above(values: &[f64], cuts: &[f64]) -> BTreeMap<u32, usize> {
    cuts.iter()
        .map(|c| (libm::round(c * 100.0) as u32, values.iter().filter(|v| **v > *c).count()))
        .collect()
}
