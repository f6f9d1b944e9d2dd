//! End-to-end annotation: band the frames, keep AUTO boxes, merge human
//! review results, link and interpolate, then optionally score.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{count_above, median, score_video, EvalError, FrameScore, IOU_CUTS};
use crate::interpolate::{associate, interpolate_track, InterpolationConfig, InterpolationError, Keyframe};
use crate::model::{
    clamp_box, AnnotationTrack, BoundingBox, ClassLabel, Detection, DetectionSet, ModelError, Provenance, ThresholdConfig, VideoMeta,
};
use crate::policy::{build_plan, video_verdict, Aggregation, Band, KeyframePlan, VideoVerdict};
use alloc::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Interpolation(#[from] InterpolationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewAction {
    /// The reviewer replaced the frame's boxes.
    Corrected,
    /// The proposed boxes were confirmed unchanged.
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedBox {
    pub class_label: ClassLabel,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u64>,
}

/// A reviewed frame. Corrections replace the frame's full box list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReview {
    pub frame_index: usize,
    pub action: ReviewAction,
    #[serde(default)]
    pub boxes: Vec<CorrectedBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub class_label: ClassLabel,
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub interpolation: InterpolationConfig,
}

impl PipelineConfig {
    pub fn new(class_label: ClassLabel, thresholds: ThresholdConfig) -> Self {
        Self {
            class_label,
            thresholds,
            aggregation: Aggregation::Max,
            interpolation: InterpolationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub plan: KeyframePlan,
    pub verdict: VideoVerdict,
    /// Frames that ended up keyed (AUTO plus reviewed).
    pub keyed_frames: Vec<usize>,
    pub tracks: Vec<AnnotationTrack>,
}

/// Boxes kept from a banded frame: target-class detections at or above th2.
pub fn proposed_boxes(plan: &KeyframePlan, frame: usize) -> Vec<Detection> {
    plan.dispositions
        .get(frame)
        .map(|d| {
            d.detections
                .iter()
                .filter(|x| x.confidence >= plan.thresholds.th2)
                .cloned()
                .collect()
        })
        .unwrap_or_default()
}

pub fn keyframes_from_plan(plan: &KeyframePlan, reviews: &[FrameReview]) -> Vec<Keyframe> {
    let mut reviewed: BTreeMap<usize, &FrameReview> = BTreeMap::new();
    for r in reviews {
        reviewed.insert(r.frame_index, r);
    }
    let mut out = Vec::new();
    for d in &plan.dispositions {
        let f = d.frame_index;
        match (d.band, reviewed.get(&f)) {
            (Band::Auto, _) => out.push(Keyframe {
                frame_index: f,
                provenance: Provenance::Auto,
                detections: proposed_boxes(plan, f),
            }),
            (_, Some(r)) => {
                let detections = match r.action {
                    ReviewAction::Accepted => proposed_boxes(plan, f),
                    ReviewAction::Corrected => r
                        .boxes
                        .iter()
                        .filter(|b| b.class_label == plan.class_label)
                        .map(|b| Detection {
                            frame_index: f,
                            class_label: b.class_label.clone(),
                            confidence: 1.0,
                            bbox: b.bbox,
                            track_id: b.track_id,
                        })
                        .collect(),
                };
                out.push(Keyframe {
                    frame_index: f,
                    provenance: Provenance::Human,
                    detections,
                });
            }
            _ => {}
        }
    }
    out
}

/// Links the plan's keyed frames (AUTO plus reviewed) into tracks and fills
/// the gaps. Returns the keyed frame indices and the dense tracks.
pub fn annotate_plan(
    plan: &KeyframePlan,
    video: &VideoMeta,
    icfg: &InterpolationConfig,
    reviews: &[FrameReview],
) -> Result<(Vec<usize>, Vec<AnnotationTrack>), PipelineError> {
    icfg.validate()?;
    let keyframes = keyframes_from_plan(plan, reviews);
    let keyed_frames = keyframes.iter().map(|k| k.frame_index).collect();
    let linked = associate(&keyframes, icfg)?;
    let tracks = linked
        .iter()
        .map(|t| {
            let mut dense = interpolate_track(t, icfg, video);
            if icfg.clamp_to_frame {
                for k in dense.boxes.values_mut() {
                    k.bbox = clamp_box(&k.bbox, video);
                }
            }
            dense
        })
        .collect();
    Ok((keyed_frames, tracks))
}

pub fn run_pipeline(set: &DetectionSet, cfg: &PipelineConfig, reviews: &[FrameReview]) -> Result<PipelineOutput, PipelineError> {
    set.validate()?;
    cfg.thresholds.validate()?;
    let plan = build_plan(set, &cfg.class_label, &cfg.thresholds, cfg.aggregation);
    let verdict = video_verdict(&plan);
    let (keyed_frames, tracks) = annotate_plan(&plan, &set.video, &cfg.interpolation, reviews)?;
    Ok(PipelineOutput {
        plan,
        verdict,
        keyed_frames,
        tracks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub video_id: String,
    pub mean_iou: f64,
    pub per_frame: Vec<FrameScore>,
    pub gt_boxes: usize,
    pub matched_gt: usize,
    pub unmatched_gt: usize,
    pub false_positives: usize,
    pub frame_count: usize,
    pub keyframes: usize,
    pub keyframe_rate: f64,
    pub auto_frames: usize,
    pub verify_frames: usize,
    pub reviewed_frames: usize,
    pub verdict: VideoVerdict,
    pub config: PipelineConfig,
}

pub fn run_pipeline_eval(
    set: &DetectionSet,
    gt: &[AnnotationTrack],
    cfg: &PipelineConfig,
    reviews: &[FrameReview],
) -> Result<EvalReport, PipelineError> {
    let out = run_pipeline(set, cfg, reviews)?;
    score_output(&out, gt, cfg)
}

/// Scores pipeline output (or any tracks paired with their plan) against ground truth.
pub fn score_output(out: &PipelineOutput, gt: &[AnnotationTrack], cfg: &PipelineConfig) -> Result<EvalReport, PipelineError> {
    let score = score_video(gt, &out.tracks)?;
    let reviewed = out
        .keyed_frames
        .iter()
        .filter(|f| out.plan.dispositions.get(**f).is_some_and(|d| d.band != Band::Auto))
        .count();
    Ok(EvalReport {
        video_id: out.plan.video_id.clone(),
        mean_iou: score.mean_iou,
        per_frame: score.per_frame,
        gt_boxes: score.gt_boxes,
        matched_gt: score.matched,
        unmatched_gt: score.unmatched_gt,
        false_positives: score.false_positives,
        frame_count: out.plan.frame_count,
        keyframes: out.plan.keyframe_count(),
        keyframe_rate: out.plan.detection_rate,
        auto_frames: out.plan.count(Band::Auto),
        verify_frames: out.plan.count(Band::Verify),
        reviewed_frames: reviewed,
        verdict: out.verdict.clone(),
        config: cfg.clone(),
    })
}

/// One video's outcome at one sweep threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub video_id: String,
    pub keyframes: usize,
    pub frame_count: usize,
    pub mean_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub th1: f64,
    pub median_keyframe_rate_pct: f64,
    pub videos_with_keyframes: usize,
    pub mean_iou: f64,
    /// Videos whose IOU exceeds each cut, keyed by the cut in hundredths.
    pub videos_above: BTreeMap<u32, usize>,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub total_videos: usize,
    pub rows: Vec<SweepRow>,
}

/// Scores one video at single-threshold `th1` (VERIFY band empty).
pub fn sweep_cell(set: &DetectionSet, gt: &[AnnotationTrack], base: &PipelineConfig, th1: f64) -> Result<SweepCell, PipelineError> {
    let mut cfg = base.clone();
    cfg.thresholds = ThresholdConfig::new(th1, th1, base.thresholds.iou_threshold)?;
    let r = run_pipeline_eval(set, gt, &cfg, &[])?;
    Ok(SweepCell {
        video_id: r.video_id,
        keyframes: r.keyframes,
        frame_count: r.frame_count,
        mean_iou: r.mean_iou,
    })
}

/// Folds per-video results for one threshold into a row; cells are sorted by video id.
pub fn assemble_row(th1: f64, mut cells: Vec<SweepCell>) -> SweepRow {
    cells.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let rates: Vec<f64> = cells.iter().map(|c| 100.0 * c.keyframes as f64 / c.frame_count as f64).collect();
    let ious: Vec<f64> = cells.iter().map(|c| c.mean_iou).collect();
    SweepRow {
        th1,
        median_keyframe_rate_pct: median(&rates),
        videos_with_keyframes: cells.iter().filter(|c| c.keyframes > 0).count(),
        mean_iou: if ious.is_empty() {
            0.0
        } else {
            ious.iter().sum::<f64>() / ious.len() as f64
        },
        videos_above: count_above(&ious, &IOU_CUTS),
        cells,
    }
}

pub fn sweep(
    videos: &[(DetectionSet, Vec<AnnotationTrack>)],
    th1_list: &[f64],
    base: &PipelineConfig,
) -> Result<SweepReport, PipelineError> {
    if videos.is_empty() {
        return Err(EvalError::NoVideos.into());
    }
    let mut ths = th1_list.to_vec();
    ths.sort_by(|a, b| a.total_cmp(b));
    let mut rows = Vec::with_capacity(ths.len());
    for th in ths {
        let cells = videos
            .iter()
            .map(|(set, gt)| sweep_cell(set, gt, base, th))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(assemble_row(th, cells));
    }
    Ok(SweepReport {
        total_videos: videos.len(),
        rows,
    })
}
