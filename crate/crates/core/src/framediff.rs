//! Pixel-level frame features: grayscale conversion, frame differences,
//! colour histograms, the frame-difference key-frame rule and the 32x32
//! pixel embedding.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub const HISTOGRAM_BINS: usize = 64;
pub const EMBEDDING_SIDE: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    SizeMismatch {
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("pixel buffer holds {got} bytes, expected {want}")]
    BadBuffer { want: usize, got: usize },
    #[error("frame has zero area")]
    Empty,
}

/// Packed 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::Empty);
        }
        if data.len() != width * height * 3 {
            return Err(FrameError::BadBuffer {
                want: width * height * 3,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    /// Rec. 601 luma, unrounded.
    pub fn gray(&self) -> GrayFrame {
        let pixels = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
            .collect();
        GrayFrame {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// 64-bin histogram per channel (R, G, B concatenated), each normalised to sum 1.
    pub fn histogram(&self) -> Vec<f64> {
        let mut h = vec![0.0; 3 * HISTOGRAM_BINS];
        let per_bin = 256 / HISTOGRAM_BINS;
        for p in self.data.chunks_exact(3) {
            for (c, &v) in p.iter().enumerate() {
                h[c * HISTOGRAM_BINS + usize::from(v) / per_bin] += 1.0;
            }
        }
        let n = (self.width * self.height) as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayFrame {
    /// Area-averaged resample to `out_w x out_h`; every output cell is the
    /// coverage-weighted mean of the source pixels under it.
    pub fn downscale(&self, out_w: usize, out_h: usize) -> Vec<f64> {
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let spans = |len: usize, scale: f64, out: usize| -> Vec<Vec<(usize, f64)>> {
            (0..out)
                .map(|o| {
                    let start = o as f64 * scale;
                    let end = (o + 1) as f64 * scale;
                    let first = libm::floor(start) as usize;
                    let last = (libm::ceil(end) as usize).min(len);
                    (first..last)
                        .filter_map(|i| {
                            let w = (end.min((i + 1) as f64) - start.max(i as f64)).max(0.0);
                            (w > 0.0).then_some((i, w))
                        })
                        .collect()
                })
                .collect()
        };
        let xs = spans(self.width, sx, out_w);
        let ys = spans(self.height, sy, out_h);
        let mut out = Vec::with_capacity(out_w * out_h);
        for ycov in &ys {
            for xcov in &xs {
                let mut acc = 0.0;
                let mut total = 0.0;
                for &(y, wy) in ycov {
                    for &(x, wx) in xcov {
                        acc += self.pixels[y * self.width + x] * wx * wy;
                        total += wx * wy;
                    }
                }
                out.push(if total > 0.0 { acc / total } else { 0.0 });
            }
        }
        out
    }
}

pub fn mean_abs_diff(a: &GrayFrame, b: &GrayFrame) -> Result<f64, FrameError> {
    if a.width != b.width || a.height != b.height {
        return Err(FrameError::SizeMismatch {
            want_w: a.width,
            want_h: a.height,
            got_w: b.width,
            got_h: b.height,
        });
    }
    let sum: f64 = a.pixels.iter().zip(&b.pixels).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.pixels.len().max(1) as f64)
}

pub fn histogram_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Distance used by the frame-difference rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffMetric {
    /// Mean absolute grayscale difference, in gray levels.
    MeanAbsGray,
    /// L1 distance between per-channel normalised histograms.
    Histogram,
}

enum Features {
    Gray(GrayFrame),
    Hist(Vec<f64>),
}

/// Streaming frame-difference selector: frame 0 is always a key frame, and a
/// later frame becomes one when its distance to the last key frame exceeds
/// the threshold. Only the last key frame's features are retained.
pub struct FrameDiffSelector {
    metric: DiffMetric,
    threshold: f64,
    last_key: Option<Features>,
    next_index: usize,
    keyframes: Vec<usize>,
}

impl FrameDiffSelector {
    pub fn new(metric: DiffMetric, threshold: f64) -> Self {
        Self {
            metric,
            threshold,
            last_key: None,
            next_index: 0,
            keyframes: Vec::new(),
        }
    }

    fn features(&self, frame: &RgbFrame) -> Features {
        match self.metric {
            DiffMetric::MeanAbsGray => Features::Gray(frame.gray()),
            DiffMetric::Histogram => Features::Hist(frame.histogram()),
        }
    }

    /// Feeds the next frame; returns whether it became a key frame.
    pub fn push(&mut self, frame: &RgbFrame) -> Result<bool, FrameError> {
        let feats = self.features(frame);
        let is_key = match (&self.last_key, &feats) {
            (None, _) => true,
            (Some(Features::Gray(k)), Features::Gray(f)) => mean_abs_diff(k, f)? > self.threshold,
            (Some(Features::Hist(k)), Features::Hist(f)) => histogram_distance(k, f) > self.threshold,
            _ => unreachable!("metric is fixed per selector"),
        };
        if is_key {
            self.keyframes.push(self.next_index);
            self.last_key = Some(feats);
        }
        self.next_index += 1;
        Ok(is_key)
    }

    pub fn finish(self) -> Vec<usize> {
        self.keyframes
    }
}

pub fn framediff_keyframes(frames: &[RgbFrame], metric: DiffMetric, threshold: f64) -> Result<Vec<usize>, FrameError> {
    let mut sel = FrameDiffSelector::new(metric, threshold);
    for f in frames {
        sel.push(f)?;
    }
    Ok(sel.finish())
}

/// 32x32 area-averaged grayscale, flattened row-major to 1024 values.
pub fn pixel_embedding(frame: &RgbFrame) -> Vec<f64> {
    frame.gray().downscale(EMBEDDING_SIDE, EMBEDDING_SIDE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_video_has_one_keyframe() {
        let frames = vec![RgbFrame::filled(8, 8, [40, 90, 200]); 12];
        assert_eq!(framediff_keyframes(&frames, DiffMetric::MeanAbsGray, 1.0).unwrap(), vec![0]);
        assert_eq!(framediff_keyframes(&frames, DiffMetric::Histogram, 0.1).unwrap(), vec![0]);
    }

    #[test]
    fn alternating_black_white() {
        let frames: Vec<RgbFrame> = (0..10)
            .map(|i| RgbFrame::filled(4, 4, if i % 2 == 0 { [0; 3] } else { [255; 3] }))
            .collect();
        let all: Vec<usize> = (0..10).collect();
        assert_eq!(framediff_keyframes(&frames, DiffMetric::MeanAbsGray, 10.0).unwrap(), all);
        // histograms move all mass between bins: distance 2 per channel
        assert_eq!(framediff_keyframes(&frames, DiffMetric::Histogram, 1.0).unwrap(), all);
    }

    #[test]
    fn histogram_sums_to_one_per_channel() {
        let f = RgbFrame::new(2, 1, vec![0, 128, 255, 10, 128, 3]).unwrap();
        let h = f.histogram();
        for c in 0..3 {
            let s: f64 = h[c * HISTOGRAM_BINS..(c + 1) * HISTOGRAM_BINS].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(h[0], 0.5);
        assert_eq!(h[HISTOGRAM_BINS + 32], 1.0);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let frames = [RgbFrame::filled(4, 4, [0; 3]), RgbFrame::filled(5, 4, [0; 3])];
        assert!(framediff_keyframes(&frames, DiffMetric::MeanAbsGray, 1.0).is_err());
    }

    #[test]
    fn embedding_of_black_is_zero() {
        let e = pixel_embedding(&RgbFrame::filled(100, 60, [0; 3]));
        assert_eq!(e.len(), 1024);
        assert!(e.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn checkerboard_averages_to_mid_gray() {
        let mut data = Vec::new();
        for y in 0..64 {
            for x in 0..64 {
                let v = if (x + y) % 2 == 0 { 0 } else { 255 };
                data.extend([v, v, v]);
            }
        }
        let e = pixel_embedding(&RgbFrame::new(64, 64, data).unwrap());
        for v in e {
            assert!((v - 127.5).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn fractional_area_average() {
        // 3 source columns onto 2 output columns: each output covers 1.5 pixels.
        let g = GrayFrame {
            width: 3,
            height: 1,
            pixels: vec![0.0, 30.0, 90.0],
        };
        let out = g.downscale(2, 1);
        assert!((out[0] - (0.0 + 0.5 * 30.0) / 1.5).abs() < 1e-12);
        assert!((out[1] - (0.5 * 30.0 + 90.0) / 1.5).abs() < 1e-12);
    }
}
