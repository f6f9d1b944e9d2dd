//! Three-band confidence policy: which frames are auto-annotated, which go to
//! human review, and which are filled by interpolation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{ClassLabel, Detection, DetectionSet, ThresholdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Auto,
    Verify,
    Interpolate,
}

/// How a frame's detections of the target class collapse into one confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

/// Frame-level confidence, `None` when the frame has no target-class detection.
pub fn frame_confidence<'a, I>(dets: I, class: &ClassLabel, agg: Aggregation) -> Option<f64>
where
    I: IntoIterator<Item = &'a Detection>,
{
    let mut n = 0usize;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for d in dets.into_iter().filter(|d| &d.class_label == class) {
        n += 1;
        max = max.max(d.confidence);
        sum += d.confidence;
    }
    if n == 0 {
        return None;
    }
    Some(match agg {
        Aggregation::Max => max,
        Aggregation::Mean => sum / n as f64,
    })
}

/// Half-open banding: `p >= th1` is AUTO, `th2 <= p < th1` is VERIFY, the
/// rest INTERPOLATE. A frame without target-class detections has nothing to
/// verify and always interpolates.
pub fn band_for(confidence: Option<f64>, cfg: &ThresholdConfig) -> Band {
    match confidence {
        Some(p) if p >= cfg.th1 => Band::Auto,
        Some(p) if p >= cfg.th2 => Band::Verify,
        _ => Band::Interpolate,
    }
}

pub fn classify_frame(dets: &[Detection], class: &ClassLabel, cfg: &ThresholdConfig) -> Band {
    band_for(frame_confidence(dets, class, Aggregation::Max), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDisposition {
    pub frame_index: usize,
    pub band: Band,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Target-class detections on the frame.
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframePlan {
    pub video_id: String,
    pub frame_count: usize,
    pub class_label: ClassLabel,
    pub thresholds: ThresholdConfig,
    pub aggregation: Aggregation,
    pub dispositions: Vec<FrameDisposition>,
    /// Key frames over total frames.
    pub detection_rate: f64,
}

impl KeyframePlan {
    pub fn keyframes(&self) -> Vec<usize> {
        self.dispositions
            .iter()
            .filter(|d| d.band != Band::Interpolate)
            .map(|d| d.frame_index)
            .collect()
    }

    pub fn frames_in(&self, band: Band) -> Vec<usize> {
        self.dispositions.iter().filter(|d| d.band == band).map(|d| d.frame_index).collect()
    }

    pub fn count(&self, band: Band) -> usize {
        self.dispositions.iter().filter(|d| d.band == band).count()
    }

    pub fn keyframe_count(&self) -> usize {
        self.frame_count - self.count(Band::Interpolate)
    }
}

pub fn build_plan(set: &DetectionSet, class: &ClassLabel, cfg: &ThresholdConfig, agg: Aggregation) -> KeyframePlan {
    let dispositions: Vec<FrameDisposition> = set
        .per_frame()
        .into_iter()
        .enumerate()
        .map(|(frame_index, dets)| {
            let confidence = frame_confidence(dets.iter().copied(), class, agg);
            FrameDisposition {
                frame_index,
                band: band_for(confidence, cfg),
                confidence,
                detections: dets.into_iter().filter(|d| &d.class_label == class).cloned().collect(),
            }
        })
        .collect();
    let frame_count = set.video.frame_count;
    let keyframes = dispositions.iter().filter(|d| d.band != Band::Interpolate).count();
    KeyframePlan {
        video_id: set.video.video_id.clone(),
        frame_count,
        class_label: class.clone(),
        thresholds: *cfg,
        aggregation: agg,
        dispositions,
        detection_rate: keyframes as f64 / frame_count as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictStatus {
    AutoAnnotated,
    NeedsHuman,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::AutoAnnotated => "AUTO_ANNOTATED",
            VerdictStatus::NeedsHuman => "NEEDS_HUMAN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoVerdict {
    pub video_id: String,
    pub status: VerdictStatus,
    pub reason: String,
}

pub fn video_verdict(plan: &KeyframePlan) -> VideoVerdict {
    let auto = plan.count(Band::Auto);
    let (status, reason) = if auto == 0 {
        (
            VerdictStatus::NeedsHuman,
            format!("no frame reaches th1={} for class {}", plan.thresholds.th1, plan.class_label),
        )
    } else {
        (
            VerdictStatus::AutoAnnotated,
            format!("{auto} of {} frames auto-annotated", plan.frame_count),
        )
    };
    VideoVerdict {
        video_id: plan.video_id.clone(),
        status,
        reason,
    }
}

/// Percentages of videos auto-annotated and needing humans.
pub fn verdict_split(verdicts: &[VideoVerdict]) -> (f64, f64) {
    if verdicts.is_empty() {
        return (0.0, 0.0);
    }
    let human = verdicts.iter().filter(|v| v.status == VerdictStatus::NeedsHuman).count();
    let total = verdicts.len() as f64;
    let human_pct = 100.0 * human as f64 / total;
    (100.0 * (verdicts.len() - human) as f64 / total, human_pct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, VideoMeta};
    use alloc::collections::BTreeMap;
    use alloc::vec;
    use proptest::prelude::*;

    fn det(frame: usize, conf: f64) -> Detection {
        Detection {
            frame_index: frame,
            class_label: ClassLabel::Person,
            confidence: conf,
            bbox: BoundingBox::new(0.0, 0.0, 10.0, 10.0),
            track_id: None,
        }
    }

    fn set_from(confs: &[Option<f64>]) -> DetectionSet {
        DetectionSet {
            video: VideoMeta {
                video_id: "v".into(),
                frame_count: confs.len(),
                fps: 10.0,
                width: 100,
                height: 100,
                frame_source: None,
            },
            detector: BTreeMap::new(),
            detections: confs.iter().enumerate().filter_map(|(i, c)| c.map(|c| det(i, c))).collect(),
        }
    }

    const CFG: ThresholdConfig = ThresholdConfig {
        th1: 0.5,
        th2: 0.3,
        iou_threshold: 0.5,
    };

    #[test]
    fn three_bands() {
        let p = ClassLabel::Person;
        assert_eq!(classify_frame(&[det(0, 0.7)], &p, &CFG), Band::Auto);
        assert_eq!(classify_frame(&[det(0, 0.4)], &p, &CFG), Band::Verify);
        assert_eq!(classify_frame(&[det(0, 0.2)], &p, &CFG), Band::Interpolate);
        assert_eq!(classify_frame(&[], &p, &CFG), Band::Interpolate);
    }

    #[test]
    fn boundaries_are_half_open() {
        let p = ClassLabel::Person;
        assert_eq!(classify_frame(&[det(0, 0.5)], &p, &CFG), Band::Auto);
        assert_eq!(classify_frame(&[det(0, 0.3)], &p, &CFG), Band::Verify);
    }

    #[test]
    fn other_classes_ignored_and_max_wins() {
        let mut car = det(0, 0.99);
        car.class_label = ClassLabel::Vehicle;
        let dets = [car, det(0, 0.1), det(0, 0.45)];
        assert_eq!(classify_frame(&dets, &ClassLabel::Person, &CFG), Band::Verify);
        assert_eq!(frame_confidence(dets.iter(), &ClassLabel::Person, Aggregation::Mean), Some(0.275));
    }

    #[test]
    fn plan_all_high_and_all_low() {
        let set = set_from(&[Some(0.9); 10]);
        let plan = build_plan(&set, &ClassLabel::Person, &CFG, Aggregation::Max);
        assert_eq!(plan.count(Band::Auto), 10);
        assert_eq!(plan.detection_rate, 1.0);

        let set = set_from(&[Some(0.1); 10]);
        let plan = build_plan(&set, &ClassLabel::Person, &CFG, Aggregation::Max);
        assert!(plan.keyframes().is_empty());
        assert_eq!(plan.detection_rate, 0.0);
        assert_eq!(video_verdict(&plan).status, VerdictStatus::NeedsHuman);
    }

    #[test]
    fn verdicts() {
        let plan = build_plan(
            &set_from(&[Some(0.9), None, Some(0.4)]),
            &ClassLabel::Person,
            &CFG,
            Aggregation::Max,
        );
        assert_eq!(video_verdict(&plan).status, VerdictStatus::AutoAnnotated);
        let plan = build_plan(
            &set_from(&[Some(0.4), None, Some(0.2)]),
            &ClassLabel::Person,
            &CFG,
            Aggregation::Max,
        );
        assert_eq!(video_verdict(&plan).status, VerdictStatus::NeedsHuman);
    }

    #[test]
    fn verdict_split_counts() {
        let mk = |status| VideoVerdict {
            video_id: String::new(),
            status,
            reason: String::new(),
        };
        let mut vs = vec![mk(VerdictStatus::AutoAnnotated); 316];
        vs.extend(vec![mk(VerdictStatus::NeedsHuman); 14]);
        let (auto, human) = verdict_split(&vs);
        // 316/330 and 14/330 by direct counting
        assert!((auto - 95.757_575_757_575_76).abs() < 1e-9);
        assert!((human - 4.242_424_242_424_242).abs() < 1e-9);
    }

    fn confs() -> impl Strategy<Value = Vec<Option<f64>>> {
        proptest::collection::vec(proptest::option::weighted(0.8, 0.0..=1.0f64), 1..60)
    }

    proptest! {
        #[test]
        fn plan_is_total(c in confs(), th2 in 0.0..0.5f64, d in 0.0..0.5f64) {
            let cfg = ThresholdConfig::new(th2 + d, th2, 0.5).unwrap();
            let plan = build_plan(&set_from(&c), &ClassLabel::Person, &cfg, Aggregation::Max);
            prop_assert_eq!(plan.dispositions.len(), c.len());
            for (i, d) in plan.dispositions.iter().enumerate() {
                prop_assert_eq!(d.frame_index, i);
            }
            let total = plan.count(Band::Auto) + plan.count(Band::Verify) + plan.count(Band::Interpolate);
            prop_assert_eq!(total, c.len());
            prop_assert!((0.0..=1.0).contains(&plan.detection_rate));
        }
    }
}
