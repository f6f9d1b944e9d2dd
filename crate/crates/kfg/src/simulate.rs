//! Seeded simulated detector and synthetic fixtures.
//!
//! The simulator turns ground-truth tracks into detections: each GT box is
//! dropped with `miss_rate`, otherwise emitted with a drawn confidence and
//! Gaussian jitter on position and size proportional to the box size.

use std::collections::BTreeMap;

use kfg_core::model::{clamp_box, AnnotationTrack, ClassLabel, Detection, DetectionSet, Provenance, VideoMeta};
use kfg_core::BoundingBox;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfidenceModel {
    Fixed { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Beta { alpha: f64, beta: f64 },
}

impl ConfidenceModel {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let v = match *self {
            ConfidenceModel::Fixed { value } => value,
            ConfidenceModel::Uniform { lo, hi } => {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }
            ConfidenceModel::Beta { alpha, beta } => Beta::new(alpha, beta).map_or(0.5, |d| d.sample(rng)),
        };
        v.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatedDetector {
    pub class_label: ClassLabel,
    pub confidence: ConfidenceModel,
    /// Standard deviation of position and size noise, as a fraction of the box size.
    pub jitter: f64,
    pub miss_rate: f64,
    /// Only frames divisible by the stride get detections.
    pub frame_stride: usize,
    pub emit_track_ids: bool,
}

impl Default for SimulatedDetector {
    fn default() -> Self {
        Self::jittered()
    }
}

impl SimulatedDetector {
    /// Detections equal to GT at confidence 0.9.
    pub fn noise_free() -> Self {
        Self {
            class_label: ClassLabel::Person,
            confidence: ConfidenceModel::Fixed { value: 0.9 },
            jitter: 0.0,
            miss_rate: 0.0,
            frame_stride: 1,
            emit_track_ids: false,
        }
    }

    /// The noisy detector used for end-to-end runs.
    pub fn jittered() -> Self {
        Self {
            class_label: ClassLabel::Person,
            confidence: ConfidenceModel::Beta { alpha: 6.0, beta: 2.0 },
            jitter: 0.08,
            miss_rate: 0.15,
            frame_stride: 1,
            emit_track_ids: false,
        }
    }

    pub fn detect(&self, gt: &[AnnotationTrack], video: &VideoMeta, seed: u64) -> DetectionSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_frame: BTreeMap<usize, Vec<(u64, BoundingBox)>> = BTreeMap::new();
        for t in gt {
            for (&f, kb) in &t.boxes {
                by_frame.entry(f).or_default().push((t.track_id, kb.bbox));
            }
        }
        let noise = Normal::new(0.0, 1.0).expect("unit normal");
        let stride = self.frame_stride.max(1);
        let mut detections = Vec::new();
        for (f, boxes) in by_frame {
            if f >= video.frame_count || f % stride != 0 {
                continue;
            }
            for (id, b) in boxes {
                if rng.random::<f64>() < self.miss_rate {
                    continue;
                }
                let confidence = self.confidence.draw(&mut rng);
                let bbox = if self.jitter > 0.0 {
                    let j = self.jitter;
                    let mut n = || noise.sample(&mut rng);
                    let w = (b.w * (1.0 + j * n())).max(1.0);
                    let h = (b.h * (1.0 + j * n())).max(1.0);
                    let cx = b.x + b.w / 2.0 + j * b.w * n();
                    let cy = b.y + b.h / 2.0 + j * b.h * n();
                    clamp_box(&BoundingBox::new(cx - w / 2.0, cy - h / 2.0, w, h), video)
                } else {
                    b
                };
                detections.push(Detection {
                    frame_index: f,
                    class_label: self.class_label.clone(),
                    confidence,
                    bbox,
                    track_id: self.emit_track_ids.then_some(id),
                });
            }
        }
        let mut detector = BTreeMap::new();
        detector.insert("name".into(), "simulated".into());
        detector.insert("seed".into(), seed.to_string());
        DetectionSet {
            video: video.clone(),
            detector,
            detections,
        }
    }
}

pub fn video_meta(video_id: &str, frame_count: usize, width: u32, height: u32) -> VideoMeta {
    VideoMeta {
        video_id: video_id.into(),
        frame_count,
        fps: 25.0,
        width,
        height,
        frame_source: None,
    }
}

/// Objects moving at constant velocity across every frame.
pub fn linear_motion_gt(frames: usize, objects: usize) -> Vec<AnnotationTrack> {
    (0..objects)
        .map(|k| {
            let mut t = AnnotationTrack::new(k as u64 + 1, ClassLabel::Person);
            let x0 = 20.0 + 150.0 * k as f64;
            let y0 = 30.0 + 40.0 * k as f64;
            let (vx, vy) = (1.5 + 0.25 * k as f64, 0.75 - 0.5 * k as f64);
            for f in 0..frames {
                let s = f as f64;
                t.insert(
                    f,
                    BoundingBox::new(x0 + vx * s, y0 + vy * s, 40.0 + k as f64, 90.0),
                    Provenance::Human,
                );
            }
            t
        })
        .collect()
}

/// Pedestrian-like tracks: each object walks a straight line with a slow
/// sway, entering and leaving at random frames.
pub fn synthetic_sequence(frames: usize, objects: usize, width: u32, height: u32, seed: u64) -> Vec<AnnotationTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fw, fh) = (f64::from(width), f64::from(height));
    (0..objects)
        .map(|k| {
            let mut t = AnnotationTrack::new(k as u64 + 1, ClassLabel::Person);
            let h = rng.random_range(0.25..0.5) * fh;
            let w = h * rng.random_range(0.35..0.5);
            let start = rng.random_range(0..frames / 3);
            let len = rng.random_range(frames / 3..=frames - start);
            let x0 = rng.random_range(0.0..fw - w);
            let y0 = rng.random_range(0.0..fh - h);
            let vx = rng.random_range(-2.0..2.0);
            let vy = rng.random_range(-0.3..0.3);
            let amp = rng.random_range(2.0..8.0);
            let period = rng.random_range(20.0..60.0);
            for f in start..start + len {
                let s = (f - start) as f64;
                let x = (x0 + vx * s + amp * (s / period * std::f64::consts::TAU).sin()).clamp(0.0, fw - w);
                let y = (y0 + vy * s).clamp(0.0, fh - h);
                t.insert(f, BoundingBox::new(x, y, w, h), Provenance::Human);
            }
            t
        })
        .collect()
}

/// Per-threshold confidence quotas for [`sparse_confidence_fixture`]: this
/// many frames get a confidence inside each half-open interval.
pub const SPARSE_QUOTAS: [(f64, f64, usize); 4] = [(0.8, 0.9, 4), (0.7, 0.8, 23), (0.6, 0.7, 18), (0.5, 0.6, 13)];
pub const SPARSE_FRAMES: usize = 335;

/// A 335-frame single-person video whose frame confidences are placed so
/// that exactly 58, 45, 27 and 4 frames reach 0.5, 0.6, 0.7 and 0.8. The
/// remaining frames either carry a low-confidence box or none.
pub fn sparse_confidence_fixture(seed: u64) -> (DetectionSet, Vec<AnnotationTrack>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let video = video_meta("sparse-335", SPARSE_FRAMES, 640, 480);
    let mut gt = AnnotationTrack::new(1, ClassLabel::Person);
    for f in 0..SPARSE_FRAMES {
        let s = f as f64 / SPARSE_FRAMES as f64;
        let x = 40.0 + 480.0 * s + 30.0 * (s * 9.0).sin();
        let y = 120.0 + 90.0 * (s * 5.0).sin();
        let h = 160.0 - 60.0 * s;
        gt.insert(f, BoundingBox::new(x, y, h * 0.4, h), Provenance::Human);
    }
    let mut order: Vec<usize> = (0..SPARSE_FRAMES).collect();
    order.shuffle(&mut rng);
    let mut confs: Vec<Option<f64>> = vec![None; SPARSE_FRAMES];
    let mut next = order.into_iter();
    for (lo, hi, n) in SPARSE_QUOTAS {
        for _ in 0..n {
            let f = next.next().expect("enough frames");
            confs[f] = Some(rng.random_range(lo + 0.005..hi - 0.005));
        }
    }
    for f in next {
        if rng.random::<bool>() {
            confs[f] = Some(rng.random_range(0.05..0.45));
        }
    }
    let noise = Normal::new(0.0, 2.0).expect("normal");
    let detections = confs
        .iter()
        .enumerate()
        .filter_map(|(f, c)| {
            let c = (*c)?;
            let b = gt.boxes[&f].bbox;
            let bbox = clamp_box(
                &BoundingBox::new(b.x + noise.sample(&mut rng), b.y + noise.sample(&mut rng), b.w, b.h),
                &video,
            );
            Some(Detection {
                frame_index: f,
                class_label: ClassLabel::Person,
                confidence: c,
                bbox,
                track_id: None,
            })
        })
        .collect();
    let mut detector = BTreeMap::new();
    detector.insert("name".into(), "sparse-fixture".into());
    detector.insert("seed".into(), seed.to_string());
    (
        DetectionSet {
            video,
            detector,
            detections,
        },
        vec![gt],
    )
}
