//! MOT-Challenge text format: ten comma-separated fields per line,
//! `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`, frames 1-based.
//!
//! This is the only place frame indices change base.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use kfg_core::model::{AnnotationTrack, ClassLabel, Detection, Provenance, VideoMeta};
use kfg_core::BoundingBox;

use crate::error::{Error, Result};

pub const MOT_FIELDS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MotRecord {
    /// 1-based.
    pub frame: u64,
    /// -1 when unknown.
    pub id: i64,
    pub bb_left: f64,
    pub bb_top: f64,
    pub bb_width: f64,
    pub bb_height: f64,
    /// -1 when not applicable.
    pub conf: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// What a MOT file reveals about its video.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotMeta {
    /// Highest frame number seen, i.e. the frame count when the last frame is annotated.
    pub frame_count: usize,
    pub track_count: usize,
}

fn parse_int(field: &str, name: &str, line: usize) -> Result<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    let v = parse_real(field, name, line)?;
    if v.fract() != 0.0 || v.abs() > 9.0e15 {
        return Err(Error::Parse {
            line,
            message: format!("{name} must be an integer, got {field:?}"),
        });
    }
    Ok(v as i64)
}

fn parse_real(field: &str, name: &str, line: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("{name} is not a finite number: {field:?}"),
        }),
    }
}

/// Parses every non-blank line into a record. Fields may carry surrounding
/// whitespace; a trailing `\r` is ignored.
pub fn parse_mot_records(text: &str) -> Result<Vec<MotRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != MOT_FIELDS {
            return Err(Error::Parse {
                line,
                message: format!("expected {MOT_FIELDS} fields, got {}", fields.len()),
            });
        }
        let frame = parse_int(fields[0], "frame", line)?;
        if frame < 1 {
            return Err(Error::Parse {
                line,
                message: format!("frame must be >= 1, got {frame}"),
            });
        }
        out.push(MotRecord {
            frame: frame as u64,
            id: parse_int(fields[1], "id", line)?,
            bb_left: parse_real(fields[2], "bb_left", line)?,
            bb_top: parse_real(fields[3], "bb_top", line)?,
            bb_width: parse_real(fields[4], "bb_width", line)?,
            bb_height: parse_real(fields[5], "bb_height", line)?,
            conf: parse_real(fields[6], "conf", line)?,
            x: parse_real(fields[7], "x", line)?,
            y: parse_real(fields[8], "y", line)?,
            z: parse_real(fields[9], "z", line)?,
        });
    }
    if out.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(out)
}

/// One line per record, in the given order, `\n`-terminated.
pub fn emit_mot_records(records: &[MotRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.frame, r.id, r.bb_left, r.bb_top, r.bb_width, r.bb_height, r.conf, r.x, r.y, r.z
        );
    }
    s
}

/// Maps a MOT `conf` to a confidence: -1 and values above 1 mean a certain
/// ground-truth box.
pub fn mot_confidence(conf: f64) -> Option<f64> {
    if conf == -1.0 || conf > 1.0 {
        Some(1.0)
    } else if conf >= 0.0 {
        Some(conf)
    } else {
        None
    }
}

pub fn record_to_detection(r: &MotRecord, class_label: &ClassLabel, line: usize) -> Result<Detection> {
    let confidence = mot_confidence(r.conf).ok_or_else(|| Error::Parse {
        line,
        message: format!("conf must be -1 or >= 0, got {}", r.conf),
    })?;
    Ok(Detection {
        frame_index: (r.frame - 1) as usize,
        class_label: class_label.clone(),
        confidence,
        bbox: BoundingBox::new(r.bb_left, r.bb_top, r.bb_width, r.bb_height),
        track_id: u64::try_from(r.id).ok(),
    })
}

/// Parses a MOT file into 0-based detections of `class_label`.
pub fn parse_mot_as(text: &str, class_label: &ClassLabel) -> Result<(MotMeta, Vec<Detection>)> {
    let records = parse_mot_records(text)?;
    let line_numbers: Vec<usize> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1)
        .collect();
    let mut dets = Vec::with_capacity(records.len());
    for (r, &line) in records.iter().zip(&line_numbers) {
        dets.push(record_to_detection(r, class_label, line)?);
    }
    let mut ids: Vec<i64> = records.iter().map(|r| r.id).filter(|id| *id >= 0).collect();
    ids.sort_unstable();
    ids.dedup();
    let meta = MotMeta {
        frame_count: records.iter().map(|r| r.frame as usize).max().unwrap_or(0),
        track_count: ids.len(),
    };
    Ok((meta, dets))
}

/// Parses a MOT file of pedestrians.
pub fn parse_mot(text: &str) -> Result<(MotMeta, Vec<Detection>)> {
    parse_mot_as(text, &ClassLabel::Person)
}

/// Groups detections into tracks by `track_id`; detections without an id
/// each become their own single-box track numbered after the largest id.
pub fn tracks_from_detections(dets: &[Detection]) -> Vec<AnnotationTrack> {
    let mut tracks: BTreeMap<u64, AnnotationTrack> = BTreeMap::new();
    let mut next = dets.iter().filter_map(|d| d.track_id).max().map_or(1, |m| m + 1);
    for d in dets {
        let id = d.track_id.unwrap_or_else(|| {
            next += 1;
            next - 1
        });
        tracks
            .entry(id)
            .or_insert_with(|| AnnotationTrack::new(id, d.class_label.clone()))
            .insert(d.frame_index, d.bbox, Provenance::Human);
    }
    tracks.into_values().collect()
}

/// Records for every box of every track inside the video, sorted by (frame, id).
pub fn tracks_to_records(tracks: &[AnnotationTrack], meta: &VideoMeta) -> Vec<MotRecord> {
    let mut records: Vec<MotRecord> = tracks
        .iter()
        .flat_map(|t| {
            t.boxes
                .iter()
                .filter(|(f, _)| **f < meta.frame_count)
                .map(move |(&f, kb)| MotRecord {
                    frame: f as u64 + 1,
                    id: t.track_id as i64,
                    bb_left: kb.bbox.x,
                    bb_top: kb.bbox.y,
                    bb_width: kb.bbox.w,
                    bb_height: kb.bbox.h,
                    conf: 1.0,
                    x: -1.0,
                    y: -1.0,
                    z: -1.0,
                })
        })
        .collect();
    records.sort_by_key(|r| (r.frame, r.id));
    records
}

pub fn emit_mot(tracks: &[AnnotationTrack], meta: &VideoMeta) -> String {
    emit_mot_records(&tracks_to_records(tracks, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(frames: usize) -> VideoMeta {
        VideoMeta {
            video_id: "v".into(),
            frame_count: frames,
            fps: 25.0,
            width: 640,
            height: 480,
            frame_source: None,
        }
    }

    #[test]
    fn gt_line() {
        let (m, d) = parse_mot("1,1,794.27,247.59,71.245,174.88,-1,-1,-1,-1\n").unwrap();
        assert_eq!(m.frame_count, 1);
        assert_eq!(d[0].frame_index, 0);
        assert_eq!(d[0].track_id, Some(1));
        assert_eq!(d[0].bbox, BoundingBox::new(794.27, 247.59, 71.245, 174.88));
        assert_eq!(d[0].confidence, 1.0);
    }

    #[test]
    fn conf_mapping() {
        let (_, d) = parse_mot("1,1,0,0,10,10,0.5,-1,-1,-1").unwrap();
        assert_eq!(d[0].confidence, 0.5);
        let (_, d) = parse_mot("1,1,0,0,10,10,3,-1,-1,-1").unwrap();
        assert_eq!(d[0].confidence, 1.0);
        let err = parse_mot("1,1,0,0,10,10,1,-1,-1,-1\n2,1,0,0,10,10,-0.5,-1,-1,-1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn arity_and_empty_errors() {
        assert!(matches!(parse_mot("1,1,0,0,10,10"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_mot(""), Err(Error::NoRecords)));
        assert!(matches!(parse_mot("\n  \n"), Err(Error::NoRecords)));
    }

    #[test]
    fn error_line_numbers_count_blank_lines() {
        let text = "1,1,0,0,10,10,1,-1,-1,-1\n\n2,1,0,0,1O,10,1,-1,-1,-1\n";
        assert!(matches!(parse_mot(text), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_mot("0,1,0,0,1,1,1,-1,-1,-1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_mot("1,1,0,0,nan,1,1,-1,-1,-1"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn decimal_comma_is_rejected() {
        // "0,5" splits into an extra field rather than being read as 0.5
        assert!(parse_mot("1,1,0,0,10,10,0,5,-1,-1,-1").is_err());
    }

    #[test]
    fn emit_empty_and_single() {
        assert_eq!(emit_mot(&[], &meta(10)), "");
        let mut t = AnnotationTrack::new(3, ClassLabel::Person);
        t.insert(0, BoundingBox::new(1.5, 2.0, 10.0, 20.0), Provenance::Auto);
        assert_eq!(emit_mot(&[t], &meta(10)), "1,3,1.5,2,10,20,1,-1,-1,-1\n");
    }

    #[test]
    fn emit_sorts_by_frame_then_id() {
        let mut a = AnnotationTrack::new(2, ClassLabel::Person);
        let mut b = AnnotationTrack::new(1, ClassLabel::Person);
        for f in [1, 0] {
            a.insert(f, BoundingBox::new(0.0, 0.0, 1.0, 1.0), Provenance::Auto);
            b.insert(f, BoundingBox::new(5.0, 0.0, 1.0, 1.0), Provenance::Auto);
        }
        let out = emit_mot(&[a, b], &meta(2));
        let keys: Vec<&str> = out.lines().map(|l| &l[..3]).collect();
        assert_eq!(keys, ["1,1", "1,2", "2,1", "2,2"]);
    }

    #[test]
    fn tracks_round_trip() {
        let text = "1,1,0,0,10,10,1,-1,-1,-1\n1,2,3,4,5,6,1,-1,-1,-1\n2,1,1,0,10,10,1,-1,-1,-1\n";
        let (m, d) = parse_mot(text).unwrap();
        let tracks = tracks_from_detections(&d);
        assert_eq!(tracks.len(), 2);
        assert_eq!(emit_mot(&tracks, &meta(m.frame_count)), text);
    }
}
