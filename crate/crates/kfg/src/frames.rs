//! Image sequences on disk: `frame_%06d.<ext>`, 0-based, one directory per video.

use std::fs;
use std::path::{Path, PathBuf};

use kfg_core::framediff::RgbFrame;

use crate::error::{Error, Result};

pub const FRAME_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

pub fn frame_file_name(index: usize, ext: &str) -> String {
    format!("frame_{index:06}.{ext}")
}

/// Frame index of a conforming file name, case-insensitive on the extension.
pub fn parse_frame_name(name: &str) -> Option<usize> {
    let (stem, ext) = name.rsplit_once('.')?;
    if !FRAME_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
        return None;
    }
    let digits = stem.strip_prefix("frame_")?;
    if digits.len() < 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    pub dir: PathBuf,
    paths: Vec<PathBuf>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn path(&self, index: usize) -> Option<&Path> {
        self.paths.get(index).map(PathBuf::as_path)
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    pub fn load(&self, index: usize) -> Result<RgbFrame> {
        let path = self.path(index).ok_or_else(|| Error::Image {
            frame: index,
            message: format!("sequence has only {} frames", self.len()),
        })?;
        load_frame(path, index)
    }
}

/// Lists a directory's frames. Indices must run 0..n without gaps.
pub fn scan_frames(dir: &Path) -> Result<FrameSequence> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(i) = name.to_str().and_then(parse_frame_name) {
            found.push((i, entry.path()));
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(Error::Frames {
            dir: dir.to_path_buf(),
            message: "no frame_NNNNNN images".into(),
        });
    }
    if let Some(w) = found.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Frames {
            dir: dir.to_path_buf(),
            message: format!("frame {} present with more than one extension", w[0].0),
        });
    }
    let last = found.last().map(|f| f.0).unwrap_or(0);
    if last + 1 != found.len() {
        let have: std::collections::BTreeSet<usize> = found.iter().map(|f| f.0).collect();
        let missing: Vec<String> = (0..=last).filter(|i| !have.contains(i)).take(10).map(|i| i.to_string()).collect();
        return Err(Error::Frames {
            dir: dir.to_path_buf(),
            message: format!("missing frames {}", missing.join(", ")),
        });
    }
    Ok(FrameSequence {
        dir: dir.to_path_buf(),
        paths: found.into_iter().map(|f| f.1).collect(),
    })
}

pub fn load_frame(path: &Path, index: usize) -> Result<RgbFrame> {
    let img = image::open(path).map_err(|e| Error::Image {
        frame: index,
        message: format!("{}: {e}", path.display()),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    RgbFrame::new(w as usize, h as usize, rgb.into_raw()).map_err(|e| Error::Image {
        frame: index,
        message: e.to_string(),
    })
}

/// Encodes by extension.
pub fn save_frame(path: &Path, frame: &RgbFrame) -> Result<()> {
    let img = image::RgbImage::from_raw(frame.width as u32, frame.height as u32, frame.data.clone())
        .ok_or_else(|| Error::Usage("frame buffer does not match its size".into()))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    img.save(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })
}

pub fn write_sequence(dir: &Path, frames: &[RgbFrame], ext: &str) -> Result<FrameSequence> {
    for (i, f) in frames.iter().enumerate() {
        save_frame(&dir.join(frame_file_name(i, ext)), f)?;
    }
    scan_frames(dir)
}
