//! Correction state backed by an append-only log per video. An entry is
//! fsynced before the request is acknowledged, and replayed on open.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use kfg_core::model::clamp_box;
use kfg_core::pipeline::{CorrectedBox, ReviewAction};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bundle::{open_bundle, Manifest, ReviewTask, TaskStatus};
use crate::error::Error;
use crate::formats::corrections::{CorrectionRecord, CorrectionsFile};
use crate::fsutil::read_to_string;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown video {0}")]
    UnknownVideo(String),
    #[error("frame {frame} of video {video_id} is not in the bundle")]
    UnknownFrame { video_id: String, frame: String },
    #[error("task {task_id} is already {status:?}")]
    Conflict { task_id: String, status: TaskStatus },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Storage(#[from] Error),
}

/// A status transition request for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub status: TaskStatus,
    pub boxes: Vec<CorrectedBox>,
    pub annotator_id: String,
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub task_id: String,
    pub frame_index: usize,
    pub status: TaskStatus,
    #[serde(default)]
    pub boxes: Vec<CorrectedBox>,
    pub annotator_id: String,
    pub timestamp: u64,
}

struct VideoState {
    statuses: Vec<TaskStatus>,
    entries: Vec<LogEntry>,
    log: File,
}

pub struct VideoReview {
    pub dir: PathBuf,
    pub manifest: Manifest,
    tasks: Vec<ReviewTask>,
    by_task: HashMap<String, usize>,
    state: Mutex<VideoState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSummary {
    pub video_id: String,
    pub frame_count: usize,
    pub task_count: usize,
    pub pending: usize,
    pub corrected: usize,
    pub accepted: usize,
    pub skipped: usize,
}

fn replay(path: &Path, by_task: &HashMap<String, usize>) -> Result<Vec<LogEntry>, Error> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = read_to_string(path)?;
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut entries = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogEntry>(line) {
            Ok(e) if by_task.contains_key(&e.task_id) => entries.push(e),
            Ok(e) => {
                return Err(Error::Bundle(format!(
                    "{} line {}: unknown task {}",
                    path.display(),
                    i + 1,
                    e.task_id
                )))
            }
            // A torn final write was never acknowledged.
            Err(_) if i + 1 == lines.len() && !complete => break,
            Err(e) => return Err(Error::Bundle(format!("{} line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(entries)
}

impl VideoReview {
    fn open(dir: &Path) -> Result<Self, Error> {
        let (manifest, tasks) = open_bundle(dir)?;
        let by_task: HashMap<String, usize> = tasks.iter().enumerate().map(|(i, t)| (t.task_id.clone(), i)).collect();
        let log_path = dir.join(&manifest.corrections_log);
        let entries = replay(&log_path, &by_task)?;
        let mut statuses = vec![TaskStatus::Pending; tasks.len()];
        for e in &entries {
            statuses[by_task[&e.task_id]] = e.status;
        }
        let mut log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        // Drop a torn tail so the next append starts on a fresh line.
        let len = log.metadata().map_err(|e| Error::io(&log_path, e))?.len();
        if len > 0 {
            let text = read_to_string(&log_path)?;
            if !text.ends_with('\n') {
                let keep = text.rfind('\n').map_or(0, |i| i + 1) as u64;
                log.set_len(keep).map_err(|e| Error::io(&log_path, e))?;
                log.flush().map_err(|e| Error::io(&log_path, e))?;
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            tasks,
            by_task,
            state: Mutex::new(VideoState { statuses, entries, log }),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, VideoState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn tasks(&self) -> Vec<ReviewTask> {
        let st = self.lock();
        self.tasks
            .iter()
            .zip(&st.statuses)
            .map(|(t, s)| ReviewTask { status: *s, ..t.clone() })
            .collect()
    }

    pub fn summary(&self) -> VideoSummary {
        let st = self.lock();
        let count = |s: TaskStatus| st.statuses.iter().filter(|x| **x == s).count();
        VideoSummary {
            video_id: self.manifest.video.video_id.clone(),
            frame_count: self.manifest.video.frame_count,
            task_count: self.tasks.len(),
            pending: count(TaskStatus::Pending),
            corrected: count(TaskStatus::Corrected),
            accepted: count(TaskStatus::AcceptedAsIs),
            skipped: count(TaskStatus::Skipped),
        }
    }

    fn submit(&self, index: usize, sub: Submission) -> Result<ReviewTask, ReviewError> {
        let task = &self.tasks[index];
        if sub.status == TaskStatus::Pending {
            return Err(ReviewError::Invalid {
                field: "status".into(),
                message: "cannot return a task to PENDING".into(),
            });
        }
        let mut boxes = Vec::with_capacity(sub.boxes.len());
        if sub.status == TaskStatus::Corrected {
            for (i, b) in sub.boxes.iter().enumerate() {
                for (name, v) in [("x", b.bbox.x), ("y", b.bbox.y), ("w", b.bbox.w), ("h", b.bbox.h)] {
                    if !v.is_finite() || (matches!(name, "w" | "h") && v < 0.0) {
                        return Err(ReviewError::Invalid {
                            field: format!("boxes[{i}].box.{name}"),
                            message: format!("invalid value {v}"),
                        });
                    }
                }
                boxes.push(CorrectedBox {
                    bbox: clamp_box(&b.bbox, &self.manifest.video),
                    ..b.clone()
                });
            }
        }
        let mut st = self.lock();
        if st.statuses[index] != TaskStatus::Pending {
            return Err(ReviewError::Conflict {
                task_id: task.task_id.clone(),
                status: st.statuses[index],
            });
        }
        let entry = LogEntry {
            task_id: task.task_id.clone(),
            frame_index: task.frame_index,
            status: sub.status,
            boxes,
            annotator_id: sub.annotator_id,
            timestamp: sub
                .timestamp
                .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())),
        };
        let mut line = serde_json::to_string(&entry).expect("serializable");
        line.push('\n');
        let log_path = self.dir.join(&self.manifest.corrections_log);
        st.log
            .write_all(line.as_bytes())
            .and_then(|_| st.log.sync_data())
            .map_err(|e| Error::io(&log_path, e))?;
        st.statuses[index] = sub.status;
        st.entries.push(entry);
        Ok(ReviewTask {
            status: sub.status,
            ..task.clone()
        })
    }

    /// Corrected and accepted tasks in log order; skipped tasks are left out.
    pub fn export(&self) -> CorrectionsFile {
        let st = self.lock();
        let corrections = st
            .entries
            .iter()
            .filter_map(|e| {
                let action = match e.status {
                    TaskStatus::Corrected => ReviewAction::Corrected,
                    TaskStatus::AcceptedAsIs => ReviewAction::Accepted,
                    _ => return None,
                };
                Some(CorrectionRecord {
                    task_id: e.task_id.clone(),
                    frame_index: e.frame_index,
                    action,
                    boxes: e.boxes.clone(),
                    annotator_id: e.annotator_id.clone(),
                    timestamp: e.timestamp,
                })
            })
            .collect();
        CorrectionsFile {
            video_id: self.manifest.video.video_id.clone(),
            corrections,
        }
    }

    pub fn frame_image(&self, frame: usize) -> Option<PathBuf> {
        self.tasks.iter().find(|t| t.frame_index == frame).map(|t| self.dir.join(&t.image))
    }
}

/// Every opened bundle, keyed by video id.
pub struct ReviewStore {
    videos: BTreeMap<String, Arc<VideoReview>>,
    task_video: HashMap<String, String>,
}

impl ReviewStore {
    pub fn open(bundles: &[PathBuf]) -> Result<Self, Error> {
        let mut videos = BTreeMap::new();
        let mut task_video = HashMap::new();
        for dir in bundles {
            let v = VideoReview::open(dir)?;
            let id = v.manifest.video.video_id.clone();
            for t in &v.tasks {
                task_video.insert(t.task_id.clone(), id.clone());
            }
            if videos.insert(id.clone(), Arc::new(v)).is_some() {
                return Err(Error::Bundle(format!("video {id} opened twice")));
            }
        }
        Ok(Self { videos, task_video })
    }

    pub fn video(&self, id: &str) -> Result<&Arc<VideoReview>, ReviewError> {
        self.videos.get(id).ok_or_else(|| ReviewError::UnknownVideo(id.into()))
    }

    pub fn summaries(&self) -> Vec<VideoSummary> {
        self.videos.values().map(|v| v.summary()).collect()
    }

    pub fn submit(&self, task_id: &str, sub: Submission) -> Result<ReviewTask, ReviewError> {
        let video = self
            .task_video
            .get(task_id)
            .and_then(|v| self.videos.get(v))
            .ok_or_else(|| ReviewError::UnknownTask(task_id.into()))?;
        video.submit(video.by_task[task_id], sub)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::to_json_pretty;
    use crate::review::bundle::{task_id, ProposedBox, BUNDLE_VERSION, LOG_FILE, MANIFEST_FILE, TASKS_FILE};
    use kfg_core::model::{ClassLabel, ThresholdConfig, VideoMeta};
    use kfg_core::BoundingBox;

    fn write_bundle(dir: &Path, frames: &[usize]) {
        let tasks: Vec<ReviewTask> = frames
            .iter()
            .map(|&f| ReviewTask {
                task_id: task_id("v", f),
                video_id: "v".into(),
                frame_index: f,
                image: format!("frames/frame_{f:06}.png"),
                proposed: Vec::<ProposedBox>::new(),
                status: TaskStatus::Pending,
            })
            .collect();
        let manifest = Manifest {
            version: BUNDLE_VERSION.into(),
            video: VideoMeta {
                video_id: "v".into(),
                frame_count: 10,
                fps: 1.0,
                width: 100,
                height: 50,
                frame_source: None,
            },
            class_label: ClassLabel::Person,
            thresholds: ThresholdConfig::default(),
            task_count: tasks.len(),
            tasks_file: TASKS_FILE.into(),
            frames_dir: "frames".into(),
            corrections_log: LOG_FILE.into(),
        };
        std::fs::write(dir.join(TASKS_FILE), to_json_pretty(&tasks)).unwrap();
        std::fs::write(dir.join(MANIFEST_FILE), to_json_pretty(&manifest)).unwrap();
    }

    fn correction(x: f64) -> Submission {
        Submission {
            status: TaskStatus::Corrected,
            boxes: vec![CorrectedBox {
                class_label: ClassLabel::Person,
                bbox: BoundingBox::new(x, 0.0, 20.0, 20.0),
                track_id: None,
            }],
            annotator_id: "a".into(),
            timestamp: Some(1),
        }
    }

    #[test]
    fn transitions_and_conflicts() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), &[3, 7]);
        let store = ReviewStore::open(&[dir.path().to_path_buf()]).unwrap();
        store.submit("v-000003", correction(90.0)).unwrap();
        assert!(matches!(
            store.submit("v-000003", correction(1.0)),
            Err(ReviewError::Conflict { .. })
        ));
        assert!(matches!(store.submit("nope", correction(1.0)), Err(ReviewError::UnknownTask(_))));
        let export = store.video("v").unwrap().export();
        assert_eq!(export.corrections.len(), 1);
        // clamped to the 100-pixel-wide frame
        assert_eq!(export.corrections[0].boxes[0].bbox, BoundingBox::new(90.0, 0.0, 10.0, 20.0));
    }

    #[test]
    fn invalid_box_names_field() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), &[3]);
        let store = ReviewStore::open(&[dir.path().to_path_buf()]).unwrap();
        let mut sub = correction(1.0);
        sub.boxes[0].bbox.h = -2.0;
        match store.submit("v-000003", sub) {
            Err(ReviewError::Invalid { field, .. }) => assert_eq!(field, "boxes[0].box.h"),
            other => panic!("{other:?}"),
        }
        assert_eq!(store.video("v").unwrap().summary().pending, 1);
    }

    #[test]
    fn replay_after_reopen_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), &[3, 7, 8]);
        {
            let store = ReviewStore::open(&[dir.path().to_path_buf()]).unwrap();
            store.submit("v-000003", correction(5.0)).unwrap();
            let skip = Submission {
                status: TaskStatus::Skipped,
                boxes: vec![],
                annotator_id: "a".into(),
                timestamp: Some(2),
            };
            store.submit("v-000007", skip).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(dir.path().join(LOG_FILE)).unwrap();
        f.write_all(br#"{"task_id":"v-0000"#).unwrap();
        drop(f);
        let store = ReviewStore::open(&[dir.path().to_path_buf()]).unwrap();
        let v = store.video("v").unwrap();
        let s = v.summary();
        assert_eq!((s.corrected, s.skipped, s.pending), (1, 1, 1));
        assert_eq!(v.export().corrections[0].boxes[0].bbox.x, 5.0);
        store
            .submit(
                "v-000008",
                Submission {
                    status: TaskStatus::AcceptedAsIs,
                    boxes: vec![],
                    annotator_id: "b".into(),
                    timestamp: Some(3),
                },
            )
            .unwrap();
        drop(store);
        let store = ReviewStore::open(&[dir.path().to_path_buf()]).unwrap();
        assert_eq!(store.video("v").unwrap().export().corrections.len(), 2);
    }
}
