//! Review bundle layout, version `kfgrev/1`:
//!
//! ```text
//! <bundle>/manifest.json      video header, thresholds, task count, file names
//! <bundle>/tasks.json         ReviewTask list in frame order, all PENDING
//! <bundle>/frames/frame_NNNNNN.<ext>   images of the VERIFY frames
//! <bundle>/corrections.log    review results, one JSON object per line (written by the service)
//! ```
//!
//! Image paths in tasks are relative to the bundle root.

use std::fs;
use std::path::{Path, PathBuf};

use kfg_core::model::{ClassLabel, Detection, ThresholdConfig, VideoMeta};
use kfg_core::pipeline::proposed_boxes;
use kfg_core::policy::Band;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::plan::PlanFile;
use crate::formats::{check_version, from_value, parse_json, to_json_pretty};
use crate::frames::{frame_file_name, FRAME_EXTENSIONS};
use crate::fsutil::{read_to_string, write_atomic};

pub const BUNDLE_VERSION: &str = "kfgrev/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TASKS_FILE: &str = "tasks.json";
pub const FRAMES_DIR: &str = "frames";
pub const LOG_FILE: &str = "corrections.log";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskStatus {
    Pending,
    Corrected,
    AcceptedAsIs,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposedBox {
    pub detection: Detection,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewTask {
    pub task_id: String,
    pub video_id: String,
    pub frame_index: usize,
    /// Relative to the bundle root.
    pub image: String,
    pub proposed: Vec<ProposedBox>,
    pub status: TaskStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub video: VideoMeta,
    pub class_label: ClassLabel,
    pub thresholds: ThresholdConfig,
    pub task_count: usize,
    pub tasks_file: String,
    pub frames_dir: String,
    pub corrections_log: String,
}

pub fn task_id(video_id: &str, frame: usize) -> String {
    format!("{video_id}-{frame:06}")
}

fn find_frame_image(frames_dir: &Path, frame: usize) -> Option<(PathBuf, &'static str)> {
    FRAME_EXTENSIONS.iter().find_map(|ext| {
        let p = frames_dir.join(frame_file_name(frame, ext));
        p.is_file().then_some((p, *ext))
    })
}

/// Writes a bundle with one task per VERIFY frame of the plan.
pub fn build_bundle(plan: &PlanFile, frames_dir: &Path, out_dir: &Path) -> Result<Manifest> {
    let verify = plan.plan.frames_in(Band::Verify);
    let mut images = Vec::with_capacity(verify.len());
    let mut missing = Vec::new();
    for &f in &verify {
        match find_frame_image(frames_dir, f) {
            Some(found) => images.push(found),
            None => missing.push(f.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Bundle(format!(
            "missing images in {} for VERIFY frames {}",
            frames_dir.display(),
            missing.join(", ")
        )));
    }
    let frames_out = out_dir.join(FRAMES_DIR);
    fs::create_dir_all(&frames_out).map_err(|e| Error::io(&frames_out, e))?;
    let video_id = &plan.video.video_id;
    let mut tasks = Vec::with_capacity(verify.len());
    for (&f, (src, ext)) in verify.iter().zip(&images) {
        let name = frame_file_name(f, ext);
        let dst = frames_out.join(&name);
        fs::copy(src, &dst).map_err(|e| Error::io(src, e))?;
        tasks.push(ReviewTask {
            task_id: task_id(video_id, f),
            video_id: video_id.clone(),
            frame_index: f,
            image: format!("{FRAMES_DIR}/{name}"),
            proposed: proposed_boxes(&plan.plan, f)
                .into_iter()
                .map(|detection| ProposedBox {
                    detection,
                    band: Band::Verify,
                })
                .collect(),
            status: TaskStatus::Pending,
        });
    }
    let manifest = Manifest {
        version: BUNDLE_VERSION.into(),
        video: plan.video.clone(),
        class_label: plan.plan.class_label.clone(),
        thresholds: plan.plan.thresholds,
        task_count: tasks.len(),
        tasks_file: TASKS_FILE.into(),
        frames_dir: FRAMES_DIR.into(),
        corrections_log: LOG_FILE.into(),
    };
    write_atomic(&out_dir.join(TASKS_FILE), to_json_pretty(&tasks).as_bytes())?;
    write_atomic(&out_dir.join(MANIFEST_FILE), to_json_pretty(&manifest).as_bytes())?;
    Ok(manifest)
}

/// Reads a bundle's manifest and task list and checks they agree.
pub fn open_bundle(dir: &Path) -> Result<(Manifest, Vec<ReviewTask>)> {
    let value = parse_json(&read_to_string(&dir.join(MANIFEST_FILE))?)?;
    check_version(&value, BUNDLE_VERSION)?;
    let manifest: Manifest = from_value(value)?;
    let tasks: Vec<ReviewTask> = from_value(parse_json(&read_to_string(&dir.join(&manifest.tasks_file))?)?)?;
    if tasks.len() != manifest.task_count {
        return Err(Error::Bundle(format!(
            "manifest lists {} tasks, task file has {}",
            manifest.task_count,
            tasks.len()
        )));
    }
    if tasks.windows(2).any(|w| w[0].frame_index >= w[1].frame_index) {
        return Err(Error::Bundle("tasks are not in frame order".into()));
    }
    Ok((manifest, tasks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::save_frame;
    use kfg_core::framediff::RgbFrame;
    use kfg_core::model::DetectionSet;
    use kfg_core::policy::{build_plan, video_verdict, Aggregation};
    use kfg_core::BoundingBox;
    use std::collections::BTreeMap;

    fn plan_with_verify(verify: &[usize], frames: usize) -> PlanFile {
        let video = VideoMeta {
            video_id: "v".into(),
            frame_count: frames,
            fps: 10.0,
            width: 100,
            height: 100,
            frame_source: None,
        };
        let detections = (0..frames)
            .map(|f| Detection {
                frame_index: f,
                class_label: ClassLabel::Person,
                confidence: if verify.contains(&f) { 0.4 } else { 0.9 },
                bbox: BoundingBox::new(1.0, 1.0, 10.0, 10.0),
                track_id: None,
            })
            .collect();
        let set = DetectionSet {
            video: video.clone(),
            detector: BTreeMap::new(),
            detections,
        };
        let plan = build_plan(&set, &ClassLabel::Person, &ThresholdConfig::default(), Aggregation::Max);
        let verdict = video_verdict(&plan);
        PlanFile { video, plan, verdict }
    }

    #[test]
    fn tasks_for_verify_frames() {
        let frames = tempfile::tempdir().unwrap();
        for f in 0..10 {
            save_frame(
                &frames.path().join(frame_file_name(f, "png")),
                &RgbFrame::filled(4, 4, [f as u8; 3]),
            )
            .unwrap();
        }
        let out = tempfile::tempdir().unwrap();
        let m = build_bundle(&plan_with_verify(&[3, 7], 10), frames.path(), out.path()).unwrap();
        assert_eq!(m.task_count, 2);
        let (_, tasks) = open_bundle(out.path()).unwrap();
        assert_eq!(tasks.iter().map(|t| t.frame_index).collect::<Vec<_>>(), vec![3, 7]);
        assert_eq!(tasks[0].image, "frames/frame_000003.png");
        assert!(out.path().join(&tasks[1].image).is_file());
        assert_eq!(tasks[0].proposed.len(), 1);
    }

    #[test]
    fn empty_plan_gives_empty_bundle() {
        let frames = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let m = build_bundle(&plan_with_verify(&[], 4), frames.path(), out.path()).unwrap();
        assert_eq!(m.task_count, 0);
        assert!(open_bundle(out.path()).unwrap().1.is_empty());
    }

    #[test]
    fn missing_images_are_listed() {
        let frames = tempfile::tempdir().unwrap();
        save_frame(&frames.path().join(frame_file_name(3, "jpg")), &RgbFrame::filled(4, 4, [0; 3])).unwrap();
        let out = tempfile::tempdir().unwrap();
        let err = build_bundle(&plan_with_verify(&[3, 5, 8], 10), frames.path(), out.path()).unwrap_err();
        assert!(err.to_string().contains("VERIFY frames 5, 8"), "{err}");
    }
}
