//! Command-line front end. Every failure prints one `kfg-error: <kind>: <message>`
//! line on stderr and exits nonzero.

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kfg_core::cluster::{cluster_keyframes, consecutive_cosine_distances, ClusterConfig, EmbeddingSource, KChoice};
use kfg_core::cost::{annotation_cost, saving_ratio, CostConfig};
use kfg_core::framediff::DiffMetric;
use kfg_core::interpolate::{Association, InterpolationConfig, InterpolationMode};
use kfg_core::model::{AnnotationTrack, ClassLabel, DetectionSet, ThresholdConfig, VideoMeta};
use kfg_core::pipeline::{annotate_plan, keyframes_from_plan, run_pipeline, score_output, PipelineConfig, PipelineOutput};
use kfg_core::policy::{build_plan, video_verdict, Aggregation, Band};

use crate::baselines::{framediff_sequence, pixel_embeddings, score_keyframe_set};
use crate::batch::parallel_sweep;
use crate::bridge::{load_detections, run_external_detector, DetectorContract};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::corrections::read_corrections_file;
use crate::formats::detections::{read_detection_file, write_detection_file};
use crate::formats::embeddings::{read_embedding_file, write_embedding_file, EmbeddingTable};
use crate::formats::iframes::{emit_iframes, parse_iframes};
use crate::formats::mot::{emit_mot, parse_mot_as, tracks_from_detections};
use crate::formats::plan::{read_plan_file, write_plan_file, PlanFile};
use crate::formats::report::{self, fmt4, KeyframeSet};
use crate::frames::{scan_frames, FrameSequence};
use crate::fsutil::{read_to_string, write_atomic};
use crate::review::{build_bundle, spawn_server, ReviewStore};
use crate::simulate::{sparse_confidence_fixture, video_meta, SimulatedDetector};

#[derive(Debug, Parser)]
#[command(name = "kfg", version, about = "Key-frame generation for video annotation")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (simulation, k-means).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for multi-video commands.
    #[arg(long, global = true, env = "KFG_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an external detector over a frames directory.
    Detect(DetectArgs),
    /// Write detections from ground truth with the simulated detector.
    Simulate(SimulateArgs),
    /// Band frames and write the keyframe plan and verdict.
    Plan(PlanArgs),
    /// Interpolate a plan (plus review corrections) into dense MOT tracks.
    Annotate(AnnotateArgs),
    /// Score annotations against ground truth.
    Evaluate(EvaluateArgs),
    /// Single-threshold sweep over a batch of videos.
    Sweep(SweepArgs),
    /// Comparison keyframe sets.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Annotation cost and saving ratios.
    Cost(CostArgs),
    /// Export a review bundle of the plan's VERIFY frames.
    Bundle(BundleArgs),
    /// Serve review bundles over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregationArg {
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Linear,
    CubicSpline,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AssociationArg {
    GreedyIou,
    ByTrackId,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    Jittered,
    NoiseFree,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FixtureArg {
    /// 335 frames with 58/45/27/4 frames at or above 0.5/0.6/0.7/0.8.
    Sparse,
}

#[derive(Debug, Default, Args)]
pub struct PolicyArgs {
    /// Target class.
    #[arg(long = "class")]
    pub class_label: Option<ClassLabel>,
    #[arg(long)]
    pub th1: Option<f64>,
    #[arg(long)]
    pub th2: Option<f64>,
    /// Use th2 = th1 (no VERIFY band).
    #[arg(long)]
    pub single: bool,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub aggregation: Option<AggregationArg>,
}

#[derive(Debug, Default, Args)]
pub struct InterpArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub association: Option<AssociationArg>,
    #[arg(long)]
    pub min_association_iou: Option<f64>,
    /// Keep interpolated boxes that leave the frame.
    #[arg(long)]
    pub no_clamp: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    /// Detection file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Command template with {frames_dir} and {out_file}.
    #[arg(long)]
    pub command: Option<String>,
    #[arg(long)]
    pub video_id: Option<String>,
    #[arg(long, default_value_t = 25.0)]
    pub fps: f64,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Comma-separated classes the detector should emit.
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<ClassLabel>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ground truth in MOT format.
    #[arg(long, required_unless_present = "fixture")]
    pub gt: Option<PathBuf>,
    /// Built-in fixture instead of --gt.
    #[arg(long, value_enum, conflicts_with = "gt")]
    pub fixture: Option<FixtureArg>,
    /// Where to write the fixture's ground truth.
    #[arg(long, requires = "fixture")]
    pub gt_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub video_id: Option<String>,
    #[arg(long, default_value_t = 1920)]
    pub width: u32,
    #[arg(long, default_value_t = 1080)]
    pub height: u32,
    #[arg(long, default_value_t = 25.0)]
    pub fps: f64,
    /// Defaults to the last annotated frame.
    #[arg(long)]
    pub frame_count: Option<usize>,
    #[arg(long, value_enum, default_value_t = ProfileArg::Jittered)]
    pub profile: ProfileArg,
    /// Only frames divisible by this get detections.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Copy GT track ids into the detections.
    #[arg(long)]
    pub track_ids: bool,
    #[arg(long = "class")]
    pub class_label: Option<ClassLabel>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Plan file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Cross-check the frame count against this directory.
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub corrections: Option<PathBuf>,
    /// Dense MOT file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub interp: InterpArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Run the pipeline on this detection file.
    #[arg(long, conflicts_with = "produced")]
    pub detections: Option<PathBuf>,
    /// Score an existing MOT annotation (needs --plan).
    #[arg(long, requires = "plan")]
    pub produced: Option<PathBuf>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub corrections: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub interp: InterpArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `DETECTIONS,GT` pair; repeat per video.
    #[arg(long = "video", required = true)]
    pub videos: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.6, 0.7, 0.8])]
    pub thresholds: Vec<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub interp: InterpArgs,
}

#[derive(Debug, Subcommand)]
pub enum BaselineCommand {
    /// Frame differencing over an image sequence.
    Framediff(FramediffArgs),
    /// Embedding clustering with one medoid keyframe per cluster.
    Cluster(ClusterArgs),
    /// An externally extracted I-frame list.
    Iframes(IframesArgs),
}

#[derive(Debug, Args)]
pub struct BaselineCommon {
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub video_id: Option<String>,
    /// Score the keyframes by interpolating these GT boxes from them.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub interp: InterpArgs,
}

#[derive(Debug, Args)]
pub struct FramediffArgs {
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    /// Gray levels, or L1 histogram distance with --histogram.
    #[arg(long)]
    pub threshold: f64,
    #[arg(long)]
    pub histogram: bool,
    #[command(flatten)]
    pub common: BaselineCommon,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Precomputed kfgemb/1 file; otherwise pixel embeddings of --frames-dir.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    /// `auto` or a positive integer.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub pca_variance: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[command(flatten)]
    pub common: BaselineCommon,
}

#[derive(Debug, Args)]
pub struct IframesArgs {
    #[arg(long)]
    pub iframes: PathBuf,
    /// Defaults to the frames directory's length or the GT extent.
    #[arg(long)]
    pub frame_count: Option<usize>,
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    #[command(flatten)]
    pub common: BaselineCommon,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long)]
    pub frames: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub objects: u64,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub annotators: Option<u32>,
    /// Baseline frame count or rate for a saving ratio.
    #[arg(long, requires = "method")]
    pub baseline: Option<f64>,
    #[arg(long, requires = "baseline")]
    pub method: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BundleArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    /// Bundle directory to create.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Bundle directory; repeat for several videos.
    #[arg(long = "bundle", required = true)]
    pub bundles: Vec<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    jobs: usize,
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Usage(format!("missing {flag} (flag or config)")))
}

fn write_out(path: &Path, text: &str, log: &mut String) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    let _ = writeln!(log, "wrote {}", path.display());
    Ok(())
}

impl Ctx {
    fn class_label(&self, a: Option<&ClassLabel>) -> ClassLabel {
        a.cloned().or_else(|| self.cfg.class_label.clone()).unwrap_or(ClassLabel::Person)
    }

    fn thresholds(&self, a: &PolicyArgs) -> Result<ThresholdConfig> {
        let d = ThresholdConfig::default();
        let t = &self.cfg.thresholds;
        let th1 = a.th1.or(t.th1).unwrap_or(d.th1);
        let th2 = if a.single { th1 } else { a.th2.or(t.th2).unwrap_or(d.th2.min(th1)) };
        let iou = a.iou_threshold.or(t.iou_threshold).unwrap_or(d.iou_threshold);
        Ok(ThresholdConfig::new(th1, th2, iou)?)
    }

    fn aggregation(&self, a: &PolicyArgs) -> Aggregation {
        match a.aggregation {
            Some(AggregationArg::Max) => Aggregation::Max,
            Some(AggregationArg::Mean) => Aggregation::Mean,
            None => self.cfg.aggregation.unwrap_or_default(),
        }
    }

    fn interpolation(&self, a: &InterpArgs) -> Result<InterpolationConfig> {
        let d = InterpolationConfig::default();
        let c = &self.cfg.interpolation;
        let cfg = InterpolationConfig {
            mode: match a.mode {
                Some(ModeArg::Linear) => InterpolationMode::Linear,
                Some(ModeArg::CubicSpline) => InterpolationMode::CubicSpline,
                None => c.mode.unwrap_or(d.mode),
            },
            association: match a.association {
                Some(AssociationArg::GreedyIou) => Association::GreedyIou,
                Some(AssociationArg::ByTrackId) => Association::ByTrackId,
                None => c.association.unwrap_or(d.association),
            },
            min_association_iou: a.min_association_iou.or(c.min_association_iou).unwrap_or(d.min_association_iou),
            clamp_to_frame: if a.no_clamp {
                false
            } else {
                c.clamp_to_frame.unwrap_or(d.clamp_to_frame)
            },
        };
        cfg.validate().map_err(kfg_core::pipeline::PipelineError::from)?;
        Ok(cfg)
    }

    fn pipeline(&self, p: &PolicyArgs, i: &InterpArgs) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            class_label: self.class_label(p.class_label.as_ref()),
            thresholds: self.thresholds(p)?,
            aggregation: self.aggregation(p),
            interpolation: self.interpolation(i)?,
        })
    }

    fn cost(&self, rate: Option<f64>, annotators: Option<u32>) -> Result<CostConfig> {
        let d = CostConfig::default();
        Ok(CostConfig::from_usd(
            rate.or(self.cfg.cost.rate_usd).unwrap_or(d.rate_usd()),
            annotators.or(self.cfg.cost.annotators).unwrap_or(d.annotators),
        )?)
    }

    fn out_dir(&self, a: Option<&PathBuf>) -> Result<PathBuf> {
        let dir = need(a.cloned().or_else(|| self.cfg.paths.out_dir.clone()), "--out-dir")?;
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    fn path(&self, a: Option<&PathBuf>, from_cfg: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
        need(a.cloned().or_else(|| from_cfg.clone()), flag)
    }
}

fn load_gt(path: &Path, class: &ClassLabel) -> Result<Vec<AnnotationTrack>> {
    let (_, dets) = parse_mot_as(&read_to_string(path)?, class)?;
    Ok(tracks_from_detections(&dets))
}

fn reviews(path: Option<&PathBuf>) -> Result<Vec<kfg_core::pipeline::FrameReview>> {
    match path {
        Some(p) => Ok(read_corrections_file(p)?.reviews()),
        None => Ok(Vec::new()),
    }
}

fn video_id_from(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into());
    name.split('.').next().unwrap_or(&name).trim_end_matches("-gt").to_string()
}

/// Runs a parsed command; returns what to print on stdout.
pub fn run(cli: Cli) -> Result<String> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        jobs: cli
            .jobs
            .or(cfg.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        cfg,
    };
    if ctx.jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    let mut log = String::new();
    match cli.command {
        Command::Detect(a) => detect(&ctx, a, &mut log)?,
        Command::Simulate(a) => simulate(&ctx, a, &mut log)?,
        Command::Plan(a) => plan(&ctx, a, &mut log)?,
        Command::Annotate(a) => annotate(&ctx, a, &mut log)?,
        Command::Evaluate(a) => evaluate(&ctx, a, &mut log)?,
        Command::Sweep(a) => sweep(&ctx, a, &mut log)?,
        Command::Baseline(b) => baseline(&ctx, b, &mut log)?,
        Command::Cost(a) => cost(&ctx, a, &mut log)?,
        Command::Bundle(a) => bundle(&ctx, a, &mut log)?,
        Command::Serve(a) => serve(&ctx, a)?,
    }
    Ok(log)
}

fn detect(ctx: &Ctx, a: DetectArgs, log: &mut String) -> Result<()> {
    let frames_dir = ctx.path(a.frames_dir.as_ref(), &ctx.cfg.paths.frames_dir, "--frames-dir")?;
    let command = need(a.command.or_else(|| ctx.cfg.detector.command.clone()), "--command")?;
    let seq = scan_frames(&frames_dir)?;
    let first = seq.load(0)?;
    let video = VideoMeta {
        video_id: a.video_id.unwrap_or_else(|| video_id_from(&frames_dir)),
        frame_count: seq.len(),
        fps: a.fps,
        width: first.width as u32,
        height: first.height as u32,
        frame_source: Some(frames_dir.display().to_string()),
    };
    let contract = DetectorContract {
        command,
        expected_classes: if a.classes.is_empty() {
            ctx.cfg.detector.expected_classes.clone().unwrap_or_default()
        } else {
            a.classes
        },
        timeout: Duration::from_secs(a.timeout_secs.or(ctx.cfg.detector.timeout_secs).unwrap_or(3600)),
    };
    let loaded = run_external_detector(&contract, &frames_dir, &video, &a.out)?;
    write_detection_file(&a.out, &loaded.set)?;
    for w in &loaded.warnings {
        eprintln!("kfg-warning: {w}");
    }
    let _ = writeln!(log, "wrote {} ({} records)", a.out.display(), loaded.set.detections.len());
    Ok(())
}

fn simulate(ctx: &Ctx, a: SimulateArgs, log: &mut String) -> Result<()> {
    if let Some(FixtureArg::Sparse) = a.fixture {
        let (set, gt) = sparse_confidence_fixture(ctx.seed);
        write_detection_file(&a.out, &set)?;
        let _ = writeln!(log, "wrote {}", a.out.display());
        if let Some(p) = &a.gt_out {
            write_out(p, &emit_mot(&gt, &set.video), log)?;
        }
        return Ok(());
    }
    let gt_path = need(a.gt.clone(), "--gt")?;
    let class = ctx.class_label(a.class_label.as_ref());
    let (meta, dets) = parse_mot_as(&read_to_string(&gt_path)?, &class)?;
    let gt = tracks_from_detections(&dets);
    let mut video = video_meta(
        &a.video_id.unwrap_or_else(|| video_id_from(&gt_path)),
        a.frame_count.unwrap_or(meta.frame_count),
        a.width,
        a.height,
    );
    video.fps = a.fps;
    let mut sim = match a.profile {
        ProfileArg::Jittered => SimulatedDetector::jittered(),
        ProfileArg::NoiseFree => SimulatedDetector::noise_free(),
    };
    sim.class_label = class;
    sim.frame_stride = a.stride;
    sim.emit_track_ids = a.track_ids;
    let set = sim.detect(&gt, &video, ctx.seed);
    write_detection_file(&a.out, &set)?;
    let _ = writeln!(log, "wrote {} ({} records)", a.out.display(), set.detections.len());
    Ok(())
}

fn plan(ctx: &Ctx, a: PlanArgs, log: &mut String) -> Result<()> {
    let class = ctx.class_label(a.policy.class_label.as_ref());
    let th = ctx.thresholds(&a.policy)?;
    let det_path = ctx.path(a.detections.as_ref(), &ctx.cfg.paths.detections, "--detections")?;
    let loaded = load_detections(&det_path, a.frames_dir.as_deref())?;
    for w in &loaded.warnings {
        eprintln!("kfg-warning: {w}");
    }
    let plan = build_plan(&loaded.set, &class, &th, ctx.aggregation(&a.policy));
    let verdict = video_verdict(&plan);
    let _ = writeln!(
        log,
        "{}: {} auto, {} verify, {} interpolate, rate {}, {}",
        plan.video_id,
        plan.count(Band::Auto),
        plan.count(Band::Verify),
        plan.count(Band::Interpolate),
        fmt4(plan.detection_rate),
        verdict.status.as_str()
    );
    write_plan_file(
        &a.out,
        &PlanFile {
            video: loaded.set.video,
            plan,
            verdict,
        },
    )?;
    let _ = writeln!(log, "wrote {}", a.out.display());
    Ok(())
}

fn annotate(ctx: &Ctx, a: AnnotateArgs, log: &mut String) -> Result<()> {
    let plan = read_plan_file(&a.plan)?;
    let corrections = a.corrections.clone().or_else(|| ctx.cfg.paths.corrections.clone());
    let reviews = reviews(corrections.as_ref())?;
    let icfg = ctx.interpolation(&a.interp)?;
    let (_, tracks) = annotate_plan(&plan.plan, &plan.video, &icfg, &reviews)?;
    write_out(&a.out, &emit_mot(&tracks, &plan.video), log)
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs, log: &mut String) -> Result<()> {
    let gt_path = ctx.path(a.gt.as_ref(), &ctx.cfg.paths.gt, "--gt")?;
    let corrections = a.corrections.clone().or_else(|| ctx.cfg.paths.corrections.clone());
    let reviews = reviews(corrections.as_ref())?;
    let base = ctx.pipeline(&a.policy, &a.interp)?;
    let (out, cfg) = if let Some(produced) = &a.produced {
        let plan_path = need(a.plan.clone(), "--plan")?;
        let plan = read_plan_file(&plan_path)?;
        let class = plan.plan.class_label.clone();
        let (_, dets) = parse_mot_as(&read_to_string(produced)?, &class)?;
        let mut cfg = base;
        cfg.class_label = class;
        cfg.thresholds = plan.plan.thresholds;
        cfg.aggregation = plan.plan.aggregation;
        let keyed_frames = keyframes_from_plan(&plan.plan, &reviews).iter().map(|k| k.frame_index).collect();
        let out = PipelineOutput {
            verdict: plan.verdict,
            plan: plan.plan,
            keyed_frames,
            tracks: tracks_from_detections(&dets),
        };
        (out, cfg)
    } else {
        let det_path = ctx.path(a.detections.as_ref(), &ctx.cfg.paths.detections, "--detections")?;
        let set = read_detection_file(&det_path)?;
        (run_pipeline(&set, &base, &reviews)?, base)
    };
    let gt = load_gt(&gt_path, &cfg.class_label)?;
    let r = score_output(&out, &gt, &cfg)?;
    let out_dir = ctx.out_dir(a.out_dir.as_ref())?;
    let reports = [r];
    let summary = report::eval_summary(&reports, &ctx.cost(None, None)?);
    write_atomic(&out_dir.join("eval.csv"), report::eval_csv(&reports).as_bytes())?;
    write_atomic(&out_dir.join("per_frame.csv"), report::per_frame_csv(&reports).as_bytes())?;
    write_atomic(&out_dir.join("summary.txt"), summary.as_bytes())?;
    log.push_str(&summary);
    Ok(())
}

fn sweep(ctx: &Ctx, a: SweepArgs, log: &mut String) -> Result<()> {
    let class = ctx.class_label(a.policy.class_label.as_ref());
    let mut videos = Vec::with_capacity(a.videos.len());
    for pair in &a.videos {
        let (det, gt) = pair
            .split_once(',')
            .ok_or_else(|| Error::Usage(format!("--video expects DETECTIONS,GT, got {pair:?}")))?;
        let set: DetectionSet = read_detection_file(Path::new(det))?;
        videos.push((set, load_gt(Path::new(gt), &class)?));
    }
    let base = ctx.pipeline(&a.policy, &a.interp)?;
    let report = parallel_sweep(&videos, &a.thresholds, &base, ctx.jobs)?;
    let out_dir = ctx.out_dir(a.out_dir.as_ref())?;
    write_atomic(&out_dir.join("sweep.csv"), report::sweep_csv(&report).as_bytes())?;
    write_atomic(&out_dir.join("sweep_videos.csv"), report::sweep_cells_csv(&report).as_bytes())?;
    let summary = report::sweep_summary(&report);
    write_atomic(&out_dir.join("sweep_summary.txt"), summary.as_bytes())?;
    log.push_str(&summary);
    Ok(())
}

/// Header for scoring a baseline: frame count and size from frames, then
/// flags, then the GT extent.
fn baseline_video(id: String, frame_count: usize, seq: Option<&FrameSequence>, gt: &[AnnotationTrack]) -> Result<VideoMeta> {
    let (width, height) = match seq {
        Some(s) => {
            let f = s.load(0)?;
            (f.width as u32, f.height as u32)
        }
        None => {
            let mut w: f64 = 1.0;
            let mut h: f64 = 1.0;
            for kb in gt.iter().flat_map(|t| t.boxes.values()) {
                w = w.max(kb.bbox.right());
                h = h.max(kb.bbox.bottom());
            }
            (w.ceil() as u32, h.ceil() as u32)
        }
    };
    Ok(VideoMeta {
        video_id: id,
        frame_count,
        fps: 25.0,
        width,
        height,
        frame_source: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish_baseline(
    ctx: &Ctx,
    common: &BaselineCommon,
    method: &str,
    video_id: String,
    frame_count: Option<usize>,
    seq: Option<&FrameSequence>,
    keyframes: Vec<usize>,
    log: &mut String,
) -> Result<PathBuf> {
    let class = ctx.class_label(None);
    let gt = match common.gt.as_ref().or(ctx.cfg.paths.gt.as_ref()) {
        Some(p) => Some(load_gt(p, &class)?),
        None => None,
    };
    let gt_extent = gt
        .as_ref()
        .and_then(|g| g.iter().filter_map(AnnotationTrack::last_frame).max())
        .map(|f| f + 1);
    let frame_count = need(frame_count.or(gt_extent), "--frame-count")?;
    if let Some(&bad) = keyframes.iter().find(|f| **f >= frame_count) {
        return Err(Error::Usage(format!("keyframe {bad} outside a {frame_count}-frame video")));
    }
    let out_dir = ctx.out_dir(common.out_dir.as_ref())?;
    let set = KeyframeSet {
        method: method.into(),
        video_id: video_id.clone(),
        frame_count,
        keyframes,
    };
    let mut summary = String::new();
    let _ = writeln!(summary, "method,{method}");
    let _ = writeln!(summary, "video_id,{video_id}");
    let _ = writeln!(summary, "frame_count,{frame_count}");
    let _ = writeln!(summary, "keyframes,{}", set.keyframes.len());
    let _ = writeln!(summary, "keyframe_rate_pct,{}", fmt4(set.rate_pct()));
    if let Some(gt) = &gt {
        let video = baseline_video(video_id, frame_count, seq, gt)?;
        let score = score_keyframe_set(gt, &set.keyframes, &video, &ctx.interpolation(&common.interp)?)?;
        let _ = writeln!(summary, "mean_iou,{}", fmt4(score.mean_iou));
    }
    write_atomic(&out_dir.join("keyframes.txt"), emit_iframes(&set.keyframes).as_bytes())?;
    write_atomic(&out_dir.join("keyframes.csv"), report::keyframe_csv(&[set]).as_bytes())?;
    write_atomic(&out_dir.join("summary.txt"), summary.as_bytes())?;
    log.push_str(&summary);
    Ok(out_dir)
}

fn baseline(ctx: &Ctx, cmd: BaselineCommand, log: &mut String) -> Result<()> {
    match cmd {
        BaselineCommand::Framediff(a) => {
            let dir = ctx.path(a.frames_dir.as_ref(), &ctx.cfg.paths.frames_dir, "--frames-dir")?;
            let seq = scan_frames(&dir)?;
            let metric = if a.histogram {
                DiffMetric::Histogram
            } else {
                DiffMetric::MeanAbsGray
            };
            let keys = framediff_sequence(&seq, metric, a.threshold)?;
            let id = a.common.video_id.clone().unwrap_or_else(|| video_id_from(&dir));
            let method = if a.histogram { "framediff-histogram" } else { "framediff" };
            finish_baseline(ctx, &a.common, method, id, Some(seq.len()), Some(&seq), keys, log)?;
        }
        BaselineCommand::Cluster(a) => {
            let mut seq = None;
            let (table, write_table) = match (&a.embeddings, a.frames_dir.as_ref().or(ctx.cfg.paths.frames_dir.as_ref())) {
                (Some(p), _) => (read_embedding_file(p)?, false),
                (None, Some(dir)) => {
                    let s = scan_frames(dir)?;
                    let embs = pixel_embeddings(&s)?;
                    let id = a.common.video_id.clone().unwrap_or_else(|| video_id_from(dir));
                    seq = Some(s);
                    (EmbeddingTable::new(id, EmbeddingSource::PixelBaseline, embs), true)
                }
                (None, None) => return Err(Error::Usage("missing --embeddings or --frames-dir".into())),
            };
            let d = ClusterConfig::default();
            let c = &ctx.cfg.cluster;
            let k = match a.k.as_deref() {
                Some("auto") => None,
                Some(s) => Some(
                    s.parse::<usize>()
                        .map_err(|_| Error::Usage(format!("--k must be auto or an integer, got {s:?}")))?,
                ),
                None => ctx.cfg.cluster_k()?.unwrap_or(None),
            };
            let cfg = ClusterConfig {
                k: k.map_or(KChoice::AutoElbow, KChoice::Fixed),
                k_max: a.k_max.or(c.k_max).unwrap_or(d.k_max),
                iterations: a.iterations.or(c.iterations).unwrap_or(d.iterations),
                seed: ctx.seed,
                pca_variance: a.pca_variance.or(c.pca_variance).unwrap_or(d.pca_variance),
                restarts: a.restarts.or(c.restarts).unwrap_or(d.restarts),
            };
            let result = cluster_keyframes(&table.embeddings, &cfg)?;
            let frame_count = seq
                .as_ref()
                .map(FrameSequence::len)
                .or_else(|| table.embeddings.iter().map(|e| e.frame_index).max().map(|m| m + 1));
            let id = a.common.video_id.clone().unwrap_or_else(|| table.video_id.clone());
            let out_dir = finish_baseline(
                ctx,
                &a.common,
                "cluster",
                id,
                frame_count,
                seq.as_ref(),
                result.keyframes.clone(),
                log,
            )?;
            let mut extra = format!("k_used,{}\n", result.k_used);
            if let Some(curve) = &result.inertia_curve {
                let mut csv = String::from("k,inertia\n");
                for (i, v) in curve.iter().enumerate() {
                    let _ = writeln!(csv, "{},{}", i + 1, fmt4(*v));
                }
                write_atomic(&out_dir.join("inertia.csv"), csv.as_bytes())?;
            }
            let mut cos = String::from("frame_index,cosine_distance\n");
            for (e, d) in table.embeddings.iter().skip(1).zip(consecutive_cosine_distances(&table.embeddings)) {
                let _ = writeln!(cos, "{},{}", e.frame_index, fmt4(d));
            }
            write_atomic(&out_dir.join("cosine.csv"), cos.as_bytes())?;
            if write_table {
                write_embedding_file(&out_dir.join("embeddings.json"), &table)?;
            }
            let summary_path = out_dir.join("summary.txt");
            let mut summary = read_to_string(&summary_path)?;
            summary.push_str(&extra);
            write_atomic(&summary_path, summary.as_bytes())?;
            log.push_str(&std::mem::take(&mut extra));
        }
        BaselineCommand::Iframes(a) => {
            let keys = parse_iframes(&read_to_string(&a.iframes)?)?;
            let seq = match &a.frames_dir {
                Some(d) => Some(scan_frames(d)?),
                None => None,
            };
            let frame_count = a.frame_count.or(seq.as_ref().map(FrameSequence::len));
            let id = a.common.video_id.clone().unwrap_or_else(|| video_id_from(&a.iframes));
            finish_baseline(ctx, &a.common, "iframes", id, frame_count, seq.as_ref(), keys, log)?;
        }
    }
    Ok(())
}

fn cost(ctx: &Ctx, a: CostArgs, log: &mut String) -> Result<()> {
    let cfg = ctx.cost(a.rate, a.annotators)?;
    if a.frames.is_none() && a.baseline.is_none() {
        return Err(Error::Usage("cost needs --frames and/or --baseline with --method".into()));
    }
    if let Some(frames) = a.frames {
        let _ = writeln!(log, "frames,{frames}");
        let _ = writeln!(log, "objects_per_frame,{}", a.objects);
        let _ = writeln!(log, "annotators,{}", cfg.annotators);
        let _ = writeln!(log, "rate_usd,{}", cfg.rate_usd());
        let _ = writeln!(log, "cost_usd,{}", annotation_cost(frames, a.objects, &cfg));
    }
    if let (Some(b), Some(m)) = (a.baseline, a.method) {
        let _ = writeln!(log, "saving_ratio,{}", fmt4(saving_ratio(b, m)?));
    }
    Ok(())
}

fn bundle(ctx: &Ctx, a: BundleArgs, log: &mut String) -> Result<()> {
    let plan = read_plan_file(&a.plan)?;
    let frames_dir = ctx.path(a.frames_dir.as_ref(), &ctx.cfg.paths.frames_dir, "--frames-dir")?;
    let m = build_bundle(&plan, &frames_dir, &a.out)?;
    let _ = writeln!(log, "wrote {} ({} tasks)", a.out.display(), m.task_count);
    Ok(())
}

fn serve(ctx: &Ctx, a: ServeArgs) -> Result<()> {
    let store = Arc::new(ReviewStore::open(&a.bundles)?);
    let bind = a.bind.or_else(|| ctx.cfg.review.bind.clone()).unwrap_or_else(|| "127.0.0.1".into());
    let port = a.port.or(ctx.cfg.review.port).unwrap_or(8750);
    let addr: SocketAddr = format!("{bind}:{port}")
        .parse()
        .map_err(|_| Error::Usage(format!("invalid bind address {bind}:{port}")))?;
    let ui = a.ui_dir.or_else(|| ctx.cfg.review.ui_dir.clone());
    let server = spawn_server(store, ui, addr)?;
    println!("serving on http://{}", server.addr);
    server.wait();
    Ok(())
}

/// Entry point for the binary: parse, run, print, and map errors to exit codes.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    2
                } else {
                    0
                };
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("kfg-error: usage: {first}");
            eprint!("{rendered}");
            return 2;
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("kfg-error: {}: {}", e.kind(), e.to_string().replace('\n', " "));
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}
