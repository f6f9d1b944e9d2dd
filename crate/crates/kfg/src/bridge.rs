//! Getting detections into the pipeline: from a `kfg/1` file, or by running
//! an external detector command that writes one.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use kfg_core::model::{ClassLabel, DetectionSet, VideoMeta};

use crate::error::{Error, Result};
use crate::formats::detections::{parse_detection_file, read_detection_file, schema_error};
use crate::frames::scan_frames;
use crate::fsutil::read_to_string;

pub const FRAMES_DIR_PLACEHOLDER: &str = "{frames_dir}";
pub const OUT_FILE_PLACEHOLDER: &str = "{out_file}";

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorContract {
    /// Shell command with `{frames_dir}` and `{out_file}` placeholders.
    pub command: String,
    /// Classes the detector is expected to emit; empty accepts any.
    pub expected_classes: Vec<ClassLabel>,
    pub timeout: Duration,
}

impl DetectorContract {
    pub fn validate(&self) -> Result<()> {
        for p in [FRAMES_DIR_PLACEHOLDER, OUT_FILE_PLACEHOLDER] {
            if !self.command.contains(p) {
                return Err(Error::Contract(format!("command template lacks {p}")));
            }
        }
        if self.timeout.is_zero() {
            return Err(Error::Contract("timeout must be positive".into()));
        }
        Ok(())
    }

    /// The template with both placeholders replaced by shell-quoted paths.
    pub fn render(&self, frames_dir: &Path, out_file: &Path) -> String {
        self.command
            .replace(FRAMES_DIR_PLACEHOLDER, &shell_quote(&frames_dir.to_string_lossy()))
            .replace(OUT_FILE_PLACEHOLDER, &shell_quote(&out_file.to_string_lossy()))
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDetections {
    pub set: DetectionSet,
    pub warnings: Vec<String>,
}

fn consistency_warnings(set: &DetectionSet, frames_dir: Option<&Path>, expected: &[ClassLabel]) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    if let Some(dir) = frames_dir {
        let n = scan_frames(dir)?.len();
        if n != set.video.frame_count {
            warnings.push(format!(
                "frame_count {} disagrees with {} images in {}",
                set.video.frame_count,
                n,
                dir.display()
            ));
        }
    }
    if !expected.is_empty() {
        let unexpected: BTreeSet<&str> = set
            .detections
            .iter()
            .filter(|d| !expected.contains(&d.class_label))
            .map(|d| d.class_label.as_str())
            .collect();
        if !unexpected.is_empty() {
            warnings.push(format!(
                "unexpected classes: {}",
                unexpected.into_iter().collect::<Vec<_>>().join(", ")
            ));
        }
    }
    Ok(warnings)
}

/// Reads and validates a detection file, cross-checking against the frames
/// directory when one is given.
pub fn load_detections(path: &Path, frames_dir: Option<&Path>) -> Result<LoadedDetections> {
    let set = read_detection_file(path)?;
    let warnings = consistency_warnings(&set, frames_dir, &[])?;
    Ok(LoadedDetections { set, warnings })
}

fn drain<R: Read + Send + 'static>(src: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut r) = src {
            let _ = r.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Runs the detector via `sh -c` and loads its output. The output's video
/// header is replaced by `video`, and the command is recorded under
/// `detector["bridge.command"]`.
pub fn run_external_detector(
    contract: &DetectorContract,
    frames_dir: &Path,
    video: &VideoMeta,
    out_file: &Path,
) -> Result<LoadedDetections> {
    contract.validate()?;
    video.validate()?;
    let seq = scan_frames(frames_dir)?;
    let mut warnings = Vec::new();
    if seq.len() != video.frame_count {
        warnings.push(format!(
            "frame_count {} disagrees with {} images in {}",
            video.frame_count,
            seq.len(),
            frames_dir.display()
        ));
    }
    if let Some(dir) = out_file.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let _ = std::fs::remove_file(out_file);
    let rendered = contract.render(frames_dir, out_file);
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&rendered)
        .env("KFG_VIDEO_ID", &video.video_id)
        .env("KFG_FRAME_COUNT", video.frame_count.to_string())
        .env("KFG_FPS", video.fps.to_string())
        .env("KFG_WIDTH", video.width.to_string())
        .env("KFG_HEIGHT", video.height.to_string())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::io(PathBuf::from("sh"), e))?;
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());
    let deadline = Instant::now() + contract.timeout;
    let status = loop {
        match child.try_wait().map_err(|e| Error::io(PathBuf::from("sh"), e))? {
            Some(status) => break status,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Timeout(contract.timeout));
            }
            None => thread::sleep(Duration::from_millis(10)),
        }
    };
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    if !status.success() {
        let mut output = stderr.trim().to_string();
        if !stdout.trim().is_empty() {
            if !output.is_empty() {
                output.push_str(" | ");
            }
            output.push_str(stdout.trim());
        }
        return Err(Error::Detector {
            status: status.to_string(),
            output,
        });
    }
    let mut set = parse_detection_file(&read_to_string(out_file)?)?;
    if set.video.frame_count != video.frame_count {
        warnings.push(format!(
            "detector reported {} frames, expected {}",
            set.video.frame_count, video.frame_count
        ));
    }
    set.video = video.clone();
    set.validate().map_err(|e| schema_error(e, "records"))?;
    set.detector.insert("bridge.command".into(), contract.command.clone());
    warnings.extend(consistency_warnings(&set, None, &contract.expected_classes)?);
    Ok(LoadedDetections { set, warnings })
}
