//! Keyframe plan file, version `kfgplan/1`: the video header, every frame's
//! band and kept detections, and the video verdict.

use std::path::Path;

use kfg_core::model::VideoMeta;
use kfg_core::policy::{KeyframePlan, VideoVerdict};
use serde::{Deserialize, Serialize};

use super::{check_version, from_value, parse_json, to_json_pretty};
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

pub const PLAN_VERSION: &str = "kfgplan/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub video: VideoMeta,
    pub plan: KeyframePlan,
    pub verdict: VideoVerdict,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    version: String,
    #[serde(flatten)]
    body: PlanFile,
}

pub fn parse_plan_file(text: &str) -> Result<PlanFile> {
    let value = parse_json(text)?;
    check_version(&value, PLAN_VERSION)?;
    let wire: Wire = from_value(value)?;
    let p = &wire.body;
    if p.plan.dispositions.len() != p.plan.frame_count || p.plan.frame_count != p.video.frame_count {
        return Err(Error::Schema {
            path: "plan.dispositions".into(),
            message: format!(
                "{} dispositions for a {}-frame video",
                p.plan.dispositions.len(),
                p.video.frame_count
            ),
        });
    }
    if let Some(i) = p.plan.dispositions.iter().enumerate().position(|(i, d)| d.frame_index != i) {
        return Err(Error::Schema {
            path: format!("plan.dispositions[{i}].frame_index"),
            message: "dispositions must list frames in order".into(),
        });
    }
    Ok(wire.body)
}

pub fn emit_plan_file(plan: &PlanFile) -> String {
    to_json_pretty(&Wire {
        version: PLAN_VERSION.into(),
        body: plan.clone(),
    })
}

pub fn read_plan_file(path: &Path) -> Result<PlanFile> {
    parse_plan_file(&read_to_string(path)?)
}

pub fn write_plan_file(path: &Path, plan: &PlanFile) -> Result<()> {
    write_atomic(path, emit_plan_file(plan).as_bytes())
}
