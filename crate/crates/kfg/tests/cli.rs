use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kfg::formats::embeddings::{write_embedding_file, EmbeddingTable};
use kfg::frames::write_sequence;
use kfg_core::cluster::{EmbeddingSource, FrameEmbedding};
use kfg_core::framediff::RgbFrame;

fn kfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfg"))
        .args(args)
        .env_remove("KFG_JOBS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = kfg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn campus() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/mot15/TUD-Campus-gt.txt")
        .display()
        .to_string()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn noise_free_campus(dir: &Path) -> String {
    let dets = p(dir, "campus.json");
    ok(&[
        "simulate",
        "--gt",
        &campus(),
        "--out",
        &dets,
        "--profile",
        "noise-free",
        "--width",
        "640",
        "--height",
        "480",
        "--video-id",
        "TUD-Campus",
    ]);
    dets
}

#[test]
fn perfect_detections_score_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dets = noise_free_campus(tmp.path());
    let out_dir = p(tmp.path(), "eval");
    let stdout = ok(&[
        "evaluate",
        "--gt",
        &campus(),
        "--detections",
        &dets,
        "--out-dir",
        &out_dir,
        "--no-clamp",
    ]);
    let summary = std::fs::read_to_string(tmp.path().join("eval/summary.txt")).unwrap();
    assert_eq!(summary, golden("campus_noise_free_summary.txt"));
    assert_eq!(stdout, summary);
    assert!(summary.contains("mean_iou,1.0000\n"));
    let per_frame = std::fs::read_to_string(tmp.path().join("eval/per_frame.csv")).unwrap();
    assert_eq!(per_frame.lines().count(), 72);
}

#[test]
fn annotate_then_evaluate_matches_direct_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let dets = p(tmp.path(), "d.json");
    ok(&[
        "simulate",
        "--gt",
        &campus(),
        "--out",
        &dets,
        "--width",
        "640",
        "--height",
        "480",
        "--seed",
        "3",
    ]);
    let plan = p(tmp.path(), "plan.json");
    ok(&["plan", "--detections", &dets, "--out", &plan]);
    let mot = p(tmp.path(), "dense.txt");
    ok(&["annotate", "--plan", &plan, "--out", &mot]);
    let direct = ok(&[
        "evaluate",
        "--gt",
        &campus(),
        "--detections",
        &dets,
        "--out-dir",
        &p(tmp.path(), "a"),
    ]);
    let produced = ok(&[
        "evaluate",
        "--gt",
        &campus(),
        "--produced",
        &mot,
        "--plan",
        &plan,
        "--out-dir",
        &p(tmp.path(), "b"),
    ]);
    let iou = |s: &str| s.lines().find_map(|l| l.strip_prefix("mean_iou,")).unwrap().parse::<f64>().unwrap();
    assert!(iou(&direct) > 0.5, "{direct}");
    assert_eq!(iou(&direct), iou(&produced));
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let dets = p(tmp.path(), &format!("{tag}.json"));
        ok(&["simulate", "--gt", &campus(), "--out", &dets, "--seed", "11"]);
        let plan = p(tmp.path(), &format!("{tag}-plan.json"));
        ok(&["plan", "--detections", &dets, "--out", &plan]);
        (std::fs::read(&dets).unwrap(), std::fs::read(&plan).unwrap())
    };
    assert_eq!(run("one"), run("two"));
}

#[test]
fn sparse_fixture_bands() {
    let tmp = tempfile::tempdir().unwrap();
    let dets = p(tmp.path(), "sparse.json");
    ok(&[
        "simulate",
        "--fixture",
        "sparse",
        "--out",
        &dets,
        "--gt-out",
        &p(tmp.path(), "gt.txt"),
    ]);
    for (th, n) in [("0.5", 58), ("0.6", 45), ("0.7", 27), ("0.8", 4)] {
        let line = ok(&[
            "plan",
            "--detections",
            &dets,
            "--out",
            &p(tmp.path(), "plan.json"),
            "--th1",
            th,
            "--single",
        ]);
        assert!(
            line.starts_with(&format!("sparse-335: {n} auto, 0 verify, {} interpolate", 335 - n)),
            "{line}"
        );
    }
}

#[test]
fn sweep_writes_all_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let a = p(tmp.path(), "a.json");
    ok(&["simulate", "--gt", &campus(), "--out", &a, "--video-id", "campus-a"]);
    let b = p(tmp.path(), "b.json");
    ok(&["simulate", "--gt", &campus(), "--out", &b, "--video-id", "campus-b", "--seed", "1"]);
    let out = p(tmp.path(), "sweep");
    ok(&[
        "--jobs",
        "2",
        "sweep",
        "--video",
        &format!("{a},{}", campus()),
        "--video",
        &format!("{b},{}", campus()),
        "--thresholds",
        "0.8,0.5",
        "--out-dir",
        &out,
    ]);
    let sweep = std::fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0.5000,"));
    assert!(rows[2].starts_with("0.8000,"));
    let cells = std::fs::read_to_string(tmp.path().join("sweep/sweep_videos.csv")).unwrap();
    assert_eq!(
        cells.lines().nth(1).unwrap().split(',').take(2).collect::<Vec<_>>(),
        ["0.5000", "campus-a"]
    );
    assert!(tmp.path().join("sweep/sweep_summary.txt").exists());
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let dets = noise_free_campus(tmp.path());
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "[thresholds]\nth1 = 0.7\nth2 = 0.4\n\n[paths]\ngt = {:?}\nout_dir = {:?}\n",
            campus(),
            p(tmp.path(), "cfg-out")
        ),
    )
    .unwrap();
    let cfg = cfg.display().to_string();
    let summary = ok(&["--config", &cfg, "evaluate", "--detections", &dets]);
    assert!(summary.contains("th1,0.7000\nth2,0.4000\n"), "{summary}");
    assert!(tmp.path().join("cfg-out/eval.csv").exists());
    let summary = ok(&["--config", &cfg, "evaluate", "--detections", &dets, "--th1", "0.9", "--th2", "0.2"]);
    assert!(summary.contains("th1,0.9000\nth2,0.2000\n"));
    std::fs::write(tmp.path().join("bad.toml"), "[thresholds]\nth3 = 1\n").unwrap();
    let out = kfg(&["--config", &p(tmp.path(), "bad.toml"), "cost", "--frames", "1"]);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("kfg-error: config:"));
}

#[test]
fn cost_report() {
    assert_eq!(
        ok(&["cost", "--frames", "1800", "--baseline", "15.54", "--method", "3.64"]),
        golden("cost_1800.txt")
    );
    assert!(ok(&["cost", "--frames", "60"]).contains("cost_usd,2.16\n"));
    assert!(ok(&["cost", "--frames", "20", "--annotators", "2"]).contains("cost_usd,1.44\n"));
    let out = kfg(&["cost", "--baseline", "3", "--method", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("kfg-error: cost:"));
}

#[test]
fn errors_are_one_line_with_a_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kfg(&[
        "plan",
        "--detections",
        &p(tmp.path(), "missing.json"),
        "--out",
        &p(tmp.path(), "x.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("kfg-error: not-found: "), "{stderr}");
    assert_eq!(stderr.lines().count(), 1);

    std::fs::write(tmp.path().join("bad.json"), r#"{"version":"kfg/1","video":{"video_id":"v","frame_count":2,"fps":25,"width":9,"height":9},"records":[{"frame_index":0,"class_label":"person","confidence":7,"box":{"x":0,"y":0,"w":1,"h":1}}]}"#).unwrap();
    let out = kfg(&[
        "plan",
        "--detections",
        &p(tmp.path(), "bad.json"),
        "--out",
        &p(tmp.path(), "x.json"),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.starts_with("kfg-error: schema: ") && stderr.contains("records[0].confidence"),
        "{stderr}"
    );

    let out = kfg(&[
        "plan",
        "--th1",
        "0.2",
        "--th2",
        "0.6",
        "--detections",
        &p(tmp.path(), "bad.json"),
        "--out",
        "x",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("kfg-error: model:"));

    let out = kfg(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("kfg-error: usage: "));
    assert!(!tmp.path().join("x.json").exists());

    let out = kfg(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("baseline"));
}

fn frame_dir(root: &Path) -> PathBuf {
    let frames: Vec<RgbFrame> = (0..80)
        .map(|i| RgbFrame::filled(24, 16, if i < 50 { [20, 20, 20] } else { [220, 200, 180] }))
        .collect();
    let dir = root.join("frames");
    write_sequence(&dir, &frames, "png").unwrap();
    dir
}

#[test]
fn framediff_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = frame_dir(tmp.path()).display().to_string();
    let out = p(tmp.path(), "fd");
    let summary = ok(&[
        "baseline",
        "framediff",
        "--frames-dir",
        &dir,
        "--threshold",
        "10",
        "--out-dir",
        &out,
        "--video-id",
        "cut",
    ]);
    assert_eq!(std::fs::read_to_string(tmp.path().join("fd/keyframes.txt")).unwrap(), "0\n50\n");
    assert!(summary.contains("keyframes,2\nkeyframe_rate_pct,2.5000\n"), "{summary}");
    let csv = std::fs::read_to_string(tmp.path().join("fd/keyframes.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "framediff,cut,2,80,2.5000");
}

#[test]
fn cluster_baseline_from_embeddings_and_pixels() {
    let tmp = tempfile::tempdir().unwrap();
    let embs: Vec<FrameEmbedding> = (0..30)
        .map(|f| FrameEmbedding {
            frame_index: f,
            vector: vec![
                (f / 10) as f64 * 10.0 + (f % 10) as f64 * 0.01,
                (f / 10) as f64 * -4.0 + (f % 7) as f64 * 0.01,
            ],
            source: EmbeddingSource::Precomputed,
        })
        .collect();
    let emb_path = tmp.path().join("emb.json");
    write_embedding_file(&emb_path, &EmbeddingTable::new("three", EmbeddingSource::Precomputed, embs)).unwrap();
    let out = p(tmp.path(), "cl");
    let summary = ok(&[
        "baseline",
        "cluster",
        "--embeddings",
        &emb_path.display().to_string(),
        "--k",
        "3",
        "--out-dir",
        &out,
    ]);
    assert!(
        summary.contains("video_id,three\n") && summary.contains("keyframes,3\n") && summary.contains("k_used,3\n"),
        "{summary}"
    );
    let keys: Vec<usize> = std::fs::read_to_string(tmp.path().join("cl/keyframes.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(keys.iter().map(|k| k / 10).collect::<Vec<_>>(), [0, 1, 2]);
    assert_eq!(
        std::fs::read_to_string(tmp.path().join("cl/cosine.csv")).unwrap().lines().count(),
        30
    );

    let dir = frame_dir(tmp.path()).display().to_string();
    let out = p(tmp.path(), "px");
    let summary = ok(&[
        "--seed",
        "2",
        "baseline",
        "cluster",
        "--frames-dir",
        &dir,
        "--k",
        "auto",
        "--k-max",
        "6",
        "--out-dir",
        &out,
    ]);
    assert!(summary.contains("k_used,"), "{summary}");
    assert!(tmp.path().join("px/inertia.csv").exists());
    assert!(tmp.path().join("px/embeddings.json").exists());
    let out = kfg(&[
        "baseline",
        "cluster",
        "--embeddings",
        &emb_path.display().to_string(),
        "--k",
        "many",
        "--out-dir",
        &p(tmp.path(), "z"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn iframes_baseline_scored_against_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let list = tmp.path().join("iframes.txt");
    std::fs::write(&list, "# I-frames\n0\n35\n70\n").unwrap();
    let out = p(tmp.path(), "if");
    let summary = ok(&[
        "baseline",
        "iframes",
        "--iframes",
        &list.display().to_string(),
        "--gt",
        &campus(),
        "--out-dir",
        &out,
        "--video-id",
        "TUD-Campus",
    ]);
    assert!(summary.contains("frame_count,71\nkeyframes,3\n"), "{summary}");
    assert!(summary.contains("mean_iou,"));
    std::fs::write(&list, "0\n90\n").unwrap();
    let out = kfg(&[
        "baseline",
        "iframes",
        "--iframes",
        &list.display().to_string(),
        "--frame-count",
        "71",
        "--out-dir",
        &p(tmp.path(), "bad"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bundle_command_exports_verify_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let dets = p(tmp.path(), "d.json");
    ok(&["simulate", "--gt", &campus(), "--out", &dets, "--width", "24", "--height", "16"]);
    let plan = p(tmp.path(), "plan.json");
    ok(&["plan", "--detections", &dets, "--out", &plan]);
    let frames: Vec<RgbFrame> = (0..71).map(|_| RgbFrame::filled(24, 16, [9, 9, 9])).collect();
    write_sequence(&tmp.path().join("frames"), &frames, "png").unwrap();
    let out = ok(&[
        "bundle",
        "--plan",
        &plan,
        "--frames-dir",
        &p(tmp.path(), "frames"),
        "--out",
        &p(tmp.path(), "bundle"),
    ]);
    assert!(out.contains(" tasks)"));
    assert!(tmp.path().join("bundle/manifest.json").exists());
    assert!(tmp.path().join("bundle/tasks.json").exists());
    let out = kfg(&[
        "bundle",
        "--plan",
        &plan,
        "--frames-dir",
        &p(tmp.path(), "nothing"),
        "--out",
        &p(tmp.path(), "b2"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
