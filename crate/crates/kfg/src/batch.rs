//! Multi-video work spread over a bounded thread pool. Results are reduced
//! in a fixed order, so output does not depend on the job count.

use kfg_core::eval::EvalError;
use kfg_core::model::{AnnotationTrack, DetectionSet};
use kfg_core::pipeline::{assemble_row, sweep_cell, PipelineConfig, PipelineError, SweepReport};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} jobs: {e}")))
}

pub fn parallel_sweep(
    videos: &[(DetectionSet, Vec<AnnotationTrack>)],
    th1_list: &[f64],
    base: &PipelineConfig,
    jobs: usize,
) -> Result<SweepReport> {
    if videos.is_empty() {
        return Err(PipelineError::from(EvalError::NoVideos).into());
    }
    let mut ths = th1_list.to_vec();
    ths.sort_by(|a, b| a.total_cmp(b));
    ths.dedup();
    let pool = thread_pool(jobs)?;
    let rows = pool.install(|| {
        ths.iter()
            .map(|&th| {
                let cells = videos
                    .par_iter()
                    .map(|(set, gt)| sweep_cell(set, gt, base, th))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(assemble_row(th, cells))
            })
            .collect::<Result<Vec<_>, PipelineError>>()
    })?;
    Ok(SweepReport {
        total_videos: videos.len(),
        rows,
    })
}
