//! Comma-separated report tables and text summaries. Numbers carry four
//! decimals; rows are ordered by threshold, then video id.

use std::fmt::Write as _;

use kfg_core::cost::{annotation_cost, saving_ratio, CostConfig};
use kfg_core::eval::IOU_CUTS;
use kfg_core::pipeline::{EvalReport, SweepReport};

pub const EVAL_HEADER: &str = "video_id,mean_iou,gt_boxes,matched_gt,unmatched_gt,false_positives,frame_count,keyframes,keyframe_rate,auto_frames,verify_frames,reviewed_frames,verdict";
pub const PER_FRAME_HEADER: &str = "video_id,frame_index,gt_boxes,iou";
pub const SWEEP_CELLS_HEADER: &str = "th1,video_id,keyframes,frame_count,keyframe_rate_pct,mean_iou";
pub const KEYFRAME_HEADER: &str = "method,video_id,keyframes,frame_count,keyframe_rate_pct";

pub fn fmt4(v: f64) -> String {
    // avoid "-0.0000"
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.4}")
}

pub fn sweep_header() -> String {
    let mut h = String::from("th1,median_keyframe_rate_pct,videos_with_keyframes,total_videos,mean_iou");
    for c in IOU_CUTS {
        let _ = write!(h, ",videos_iou_gt_{}", fmt_cut(c));
    }
    h
}

fn fmt_cut(c: f64) -> String {
    format!("{c:.1}")
}

/// Comma-separated fields must not contain separators or line breaks.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per video, sorted by video id.
pub fn eval_csv(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let mut s = String::new();
    let _ = writeln!(s, "{EVAL_HEADER}");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            field(&r.video_id),
            fmt4(r.mean_iou),
            r.gt_boxes,
            r.matched_gt,
            r.unmatched_gt,
            r.false_positives,
            r.frame_count,
            r.keyframes,
            fmt4(r.keyframe_rate),
            r.auto_frames,
            r.verify_frames,
            r.reviewed_frames,
            r.verdict.status.as_str()
        );
    }
    s
}

pub fn per_frame_csv(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let mut s = String::new();
    let _ = writeln!(s, "{PER_FRAME_HEADER}");
    for r in rows {
        for f in &r.per_frame {
            let _ = writeln!(s, "{},{},{},{}", field(&r.video_id), f.frame_index, f.gt_boxes, fmt4(f.iou));
        }
    }
    s
}

/// Mean GT boxes per annotated GT frame, rounded, at least 1.
pub fn objects_per_frame(r: &EvalReport) -> u64 {
    if r.per_frame.is_empty() {
        return 1;
    }
    ((r.gt_boxes as f64 / r.per_frame.len() as f64).round() as u64).max(1)
}

/// `key,value` lines, one report after another in video-id order.
pub fn eval_summary(reports: &[EvalReport], cost: &CostConfig) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let mut s = String::new();
    for r in rows {
        let objects = objects_per_frame(r);
        let t = &r.config.thresholds;
        let _ = writeln!(s, "video_id,{}", field(&r.video_id));
        let _ = writeln!(s, "class_label,{}", field(r.config.class_label.as_str()));
        let _ = writeln!(s, "th1,{}", fmt4(t.th1));
        let _ = writeln!(s, "th2,{}", fmt4(t.th2));
        let _ = writeln!(s, "mean_iou,{}", fmt4(r.mean_iou));
        let _ = writeln!(s, "gt_boxes,{}", r.gt_boxes);
        let _ = writeln!(s, "matched_gt,{}", r.matched_gt);
        let _ = writeln!(s, "unmatched_gt,{}", r.unmatched_gt);
        let _ = writeln!(s, "false_positives,{}", r.false_positives);
        let _ = writeln!(s, "frame_count,{}", r.frame_count);
        let _ = writeln!(s, "keyframes,{}", r.keyframes);
        let _ = writeln!(s, "keyframe_rate,{}", fmt4(r.keyframe_rate));
        let _ = writeln!(s, "auto_frames,{}", r.auto_frames);
        let _ = writeln!(s, "verify_frames,{}", r.verify_frames);
        let _ = writeln!(s, "reviewed_frames,{}", r.reviewed_frames);
        let _ = writeln!(s, "verdict,{}", r.verdict.status.as_str());
        let _ = writeln!(s, "objects_per_frame,{objects}");
        let _ = writeln!(s, "cost_all_frames_usd,{}", annotation_cost(r.frame_count as u64, objects, cost));
        let _ = writeln!(s, "cost_keyframes_usd,{}", annotation_cost(r.keyframes as u64, objects, cost));
        let _ = writeln!(s, "cost_review_usd,{}", annotation_cost(r.verify_frames as u64, objects, cost));
        let ratio = saving_ratio(r.frame_count as f64, r.keyframes as f64)
            .map(fmt4)
            .unwrap_or_else(|_| "undefined".into());
        let _ = writeln!(s, "saving_ratio,{ratio}");
    }
    s
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", sweep_header());
    for row in &report.rows {
        let _ = write!(
            s,
            "{},{},{},{},{}",
            fmt4(row.th1),
            fmt4(row.median_keyframe_rate_pct),
            row.videos_with_keyframes,
            report.total_videos,
            fmt4(row.mean_iou)
        );
        for c in IOU_CUTS {
            let key = (c * 100.0).round() as u32;
            let _ = write!(s, ",{}", row.videos_above.get(&key).copied().unwrap_or(0));
        }
        s.push('\n');
    }
    s
}

pub fn sweep_cells_csv(report: &SweepReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SWEEP_CELLS_HEADER}");
    for row in &report.rows {
        for c in &row.cells {
            let rate = if c.frame_count == 0 {
                0.0
            } else {
                100.0 * c.keyframes as f64 / c.frame_count as f64
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                fmt4(row.th1),
                field(&c.video_id),
                c.keyframes,
                c.frame_count,
                fmt4(rate),
                fmt4(c.mean_iou)
            );
        }
    }
    s
}

pub fn sweep_summary(report: &SweepReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "videos: {}", report.total_videos);
    for row in &report.rows {
        let above = IOU_CUTS
            .iter()
            .map(|c| {
                let key = (c * 100.0).round() as u32;
                format!(">{}:{}", fmt_cut(*c), row.videos_above.get(&key).copied().unwrap_or(0))
            })
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            s,
            "th1 {}: median keyframe rate {}%, {} of {} videos keyed, mean IOU {}, videos by IOU {}",
            fmt4(row.th1),
            fmt4(row.median_keyframe_rate_pct),
            row.videos_with_keyframes,
            report.total_videos,
            fmt4(row.mean_iou),
            above
        );
    }
    s
}

/// A keyframe set produced by one method for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeSet {
    pub method: String,
    pub video_id: String,
    pub frame_count: usize,
    pub keyframes: Vec<usize>,
}

impl KeyframeSet {
    pub fn rate_pct(&self) -> f64 {
        if self.frame_count == 0 {
            0.0
        } else {
            100.0 * self.keyframes.len() as f64 / self.frame_count as f64
        }
    }
}

pub fn keyframe_csv(sets: &[KeyframeSet]) -> String {
    let mut rows: Vec<&KeyframeSet> = sets.iter().collect();
    rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.video_id.cmp(&b.video_id)));
    let mut s = String::new();
    let _ = writeln!(s, "{KEYFRAME_HEADER}");
    for k in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            field(&k.method),
            field(&k.video_id),
            k.keyframes.len(),
            k.frame_count,
            fmt4(k.rate_pct())
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_decimals() {
        assert_eq!(fmt4(1.0), "1.0000");
        assert_eq!(fmt4(-0.0), "0.0000");
        assert_eq!(fmt4(2.0 / 3.0), "0.6667");
        assert_eq!(fmt4(100.0 * 10.0 / 505.0), "1.9802");
    }

    #[test]
    fn header_lists_all_cuts() {
        assert!(sweep_header().ends_with("videos_iou_gt_0.8,videos_iou_gt_0.9"));
        assert_eq!(sweep_header().split(',').count(), 5 + IOU_CUTS.len());
    }

    #[test]
    fn quoted_fields() {
        assert_eq!(field("a,b"), "\"a,b\"");
        assert_eq!(field("plain"), "plain");
    }
}
