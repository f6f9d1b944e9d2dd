//! Run configuration file (TOML). Every key is optional; command-line flags
//! take precedence over values given here.
//!
//! ```toml
//! seed = 0
//! jobs = 4
//! class_label = "person"
//! aggregation = "max"              # or "mean"
//!
//! [thresholds]
//! th1 = 0.5
//! th2 = 0.3
//! iou_threshold = 0.5
//!
//! [interpolation]
//! mode = "linear"                  # or "cubic_spline"
//! association = "greedy_iou"       # or "by_track_id"
//! min_association_iou = 0.1
//! clamp_to_frame = true
//!
//! [cluster]
//! k = "auto"                       # or a positive integer
//! k_max = 20
//! iterations = 100
//! pca_variance = 0.95
//! restarts = 5
//!
//! [cost]
//! rate_usd = 0.036
//! annotators = 1
//!
//! [paths]
//! frames_dir = "frames/cam1"
//! detections = "cam1.kfg.json"
//! gt = "cam1-gt.txt"
//! corrections = "cam1.kfgcorr.json"
//! out_dir = "out"
//!
//! [detector]
//! command = "python yolo_wrapper.py --frames {frames_dir} --out {out_file}"
//! expected_classes = ["person"]
//! timeout_secs = 600
//!
//! [review]
//! bind = "127.0.0.1"
//! port = 8750
//! ui_dir = "review-ui/dist"
//! ```
//!
//! Relative paths are resolved against the working directory.

use std::path::{Path, PathBuf};

use kfg_core::interpolate::{Association, InterpolationMode};
use kfg_core::model::ClassLabel;
use kfg_core::policy::Aggregation;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fsutil::read_to_string;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub class_label: Option<ClassLabel>,
    pub aggregation: Option<Aggregation>,
    pub thresholds: ThresholdSection,
    pub interpolation: InterpolationSection,
    pub cluster: ClusterSection,
    pub cost: CostSection,
    pub paths: PathsSection,
    pub detector: DetectorSection,
    pub review: ReviewSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub th1: Option<f64>,
    pub th2: Option<f64>,
    pub iou_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolationSection {
    pub mode: Option<InterpolationMode>,
    pub association: Option<Association>,
    pub min_association_iou: Option<f64>,
    pub clamp_to_frame: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum KSetting {
    Fixed(usize),
    Named(String),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub k: Option<KSetting>,
    pub k_max: Option<usize>,
    pub iterations: Option<usize>,
    pub pca_variance: Option<f64>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub rate_usd: Option<f64>,
    pub annotators: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub frames_dir: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub corrections: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub command: Option<String>,
    pub expected_classes: Option<Vec<ClassLabel>>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewSection {
    pub bind: Option<String>,
    pub port: Option<u16>,
    pub ui_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// The `[cluster] k` value as `Some(n)` for a fixed K, `None` for auto.
    pub fn cluster_k(&self) -> Result<Option<Option<usize>>> {
        match &self.cluster.k {
            None => Ok(None),
            Some(KSetting::Fixed(n)) => Ok(Some(Some(*n))),
            Some(KSetting::Named(s)) if s == "auto" => Ok(Some(None)),
            Some(KSetting::Named(s)) => Err(Error::Config(format!("cluster.k must be \"auto\" or an integer, got {s:?}"))),
        }
    }
}
