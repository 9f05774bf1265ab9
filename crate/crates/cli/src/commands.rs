use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use qtrack_core::losses::{total_loss, LossWeights};
use qtrack_core::metrics::{
    eval_classification_f1, eval_hota, eval_idf1, eval_mota, eval_segmentation, gt_sequence, pred_sequence,
};
use qtrack_core::report::{generate_report, render_report, ReportFormat};
use qtrack_core::selfcheck;
use qtrack_core::stream::{validate_ground_truth, validate_stream, GroundTruth, VideoStream, Violation};
use qtrack_core::synth::{generate, SynthScenario};
use qtrack_core::tracker::{iou_baseline_track, track_video, TrackingOutput};
use serde_json::json;

use crate::args::{EvalDetArgs, EvalTrackArgs, Format, LossCheckArgs, ReportArgs, SynthArgs, TrackArgs};
use crate::config::{read_json, Association, RunConfig};

/// Scores are reported as percentages with one decimal.
fn pct(x: f64) -> f64 {
    (x * 1000.0).round() / 10.0
}

fn emit(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn reject_violations(path: &Path, violations: &[Violation]) -> Result<()> {
    if violations.is_empty() {
        return Ok(());
    }
    let shown: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
    bail!(
        "{} is invalid ({} problems): {}",
        path.display(),
        violations.len(),
        shown.join("; ")
    )
}

fn load_stream(path: &Path) -> Result<VideoStream> {
    let s = VideoStream::from_path(path).with_context(|| format!("cannot load stream {}", path.display()))?;
    reject_violations(path, &validate_stream(&s))?;
    Ok(s)
}

fn load_gt(path: &Path) -> Result<GroundTruth> {
    let g = GroundTruth::from_path(path).with_context(|| format!("cannot load ground truth {}", path.display()))?;
    reject_violations(path, &validate_ground_truth(&g))?;
    Ok(g)
}

fn load_tracks(path: &Path) -> Result<(TrackingOutput, serde_json::Value)> {
    let f = File::open(path).with_context(|| format!("cannot open tracks {}", path.display()))?;
    TrackingOutput::read_jsonl(BufReader::new(f)).with_context(|| format!("cannot load tracks {}", path.display()))
}

pub fn track(args: &TrackArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    if let Some(tau) = args.tau {
        cfg.tracker.empty_threshold = tau;
    }
    if let Some(p) = args.patience {
        cfg.tracker.death_patience = p;
    }
    if args.baseline_iou {
        cfg.association = Association::Iou;
    }
    if let Some(f) = args.iou_floor {
        cfg.iou_floor = f;
    }
    cfg.validate()?;
    let stream = load_stream(&args.input)?;
    let tracking = match cfg.association {
        Association::Query => track_video(&stream, &cfg.tracker)?,
        Association::Iou => iou_baseline_track(&stream, &cfg.tracker, cfg.iou_floor)?,
    };
    let file = File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    tracking
        .write_jsonl(BufWriter::new(file), &cfg.to_json())
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    info!("{} frames, {} tracks -> {}", tracking.frames.len(), tracking.tracks.len(), args.out.display());
    emit(
        out,
        &json!({
            "frames": tracking.frames.len(),
            "tracks": tracking.tracks.len(),
            "out": args.out,
            "config": cfg.to_json(),
        }),
    )
}

pub fn eval_det(args: &EvalDetArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    if let Some(tau) = args.tau {
        cfg.tracker.empty_threshold = tau;
    }
    cfg.validate()?;
    let (stream, gt) = rayon::join(|| load_stream(&args.pred), || load_gt(&args.gt));
    let (stream, gt) = (stream?, gt?);
    let tau = cfg.tracker.empty_threshold;
    let seg = eval_segmentation(&stream, &gt, tau)?;
    let f1 = eval_classification_f1(&stream, &gt, tau)?;
    if seg.seg_frames == 0 {
        warn!("{} has no masks; dice and IoU are reported as 0", args.gt.display());
    }
    emit(
        out,
        &json!({
            "dice": pct(seg.dice),
            "iou": pct(seg.iou),
            "precision": pct(seg.precision),
            "recall": pct(seg.recall),
            "f1": pct(f1.f1),
            "tp": seg.tp,
            "fp": seg.fp,
            "fn": seg.fn_,
            "seg_frames": seg.seg_frames,
            "config": cfg.to_json(),
        }),
    )
}

pub fn eval_track(args: &EvalTrackArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    if let Some(m) = args.match_iou {
        cfg.match_iou = m;
    }
    cfg.validate()?;
    let (tracks, gt) = rayon::join(|| load_tracks(&args.pred), || load_gt(&args.gt));
    let ((tracks, tracking_config), gt) = (tracks?, gt?);
    let g = gt_sequence(&gt);
    let p = pred_sequence(&tracks);
    let (hota, (mota, idf1)) = rayon::join(
        || eval_hota(&g, &p),
        || rayon::join(|| eval_mota(&g, &p, cfg.match_iou), || eval_idf1(&g, &p, cfg.match_iou)),
    );
    let (hota, mota, idf1) = (hota?, mota?, idf1?);
    emit(
        out,
        &json!({
            "hota": pct(hota.hota),
            "deta": pct(hota.deta),
            "assa": pct(hota.assa),
            "mota": pct(mota.mota()),
            "idf1": pct(idf1.idf1()),
            "id_switches": mota.id_switches,
            "config": cfg.to_json(),
            "tracking_config": tracking_config,
        }),
    )
}

pub fn report(args: &ReportArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    if let Some(m) = args.min_frames {
        cfg.min_frames = m;
    }
    cfg.validate()?;
    let (tracks, stream) = rayon::join(|| load_tracks(&args.tracks), || load_stream(&args.stream));
    let ((tracks, tracking_config), stream) = (tracks?, stream?);
    let mut report = generate_report(&tracks, &stream, cfg.min_frames)?;
    report.config = json!({ "report": cfg.to_json(), "tracking": tracking_config });
    let format = match args.format {
        Format::Text => ReportFormat::Text,
        Format::Json => ReportFormat::Json,
    };
    out.write_all(render_report(&report, format)?.as_bytes())?;
    Ok(())
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let scenario: SynthScenario = args.scenario.parse()?;
    let mut sc = scenario.config(args.seed);
    if let Some(n) = args.frames {
        sc.n_frames = n;
        sc.occlusions.retain(|w| w.start + w.length <= n);
    }
    let (gt, stream) = generate(&sc)?;
    gt.to_path(&args.out_gt).with_context(|| format!("cannot write {}", args.out_gt.display()))?;
    stream.to_path(&args.out_pred).with_context(|| format!("cannot write {}", args.out_pred.display()))?;
    info!("{scenario}: {} frames, {} objects", sc.n_frames, sc.n_objects());
    emit(
        out,
        &json!({
            "scenario": scenario.name(),
            "frames": sc.n_frames,
            "out_gt": args.out_gt,
            "out_pred": args.out_pred,
            "config": sc,
        }),
    )
}

pub fn loss_check(args: &LossCheckArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    if let Some(path) = &args.weights {
        cfg.weights = read_json::<LossWeights>(path)?;
    }
    cfg.validate()?;
    let (stream, gt) = rayon::join(|| load_stream(&args.pred), || load_gt(&args.gt));
    let (stream, gt) = (stream?, gt?);
    if stream.frames.len() != gt.frames.len() {
        bail!("{} has {} frames but {} has {}", args.pred.display(), stream.frames.len(), args.gt.display(), gt.frames.len());
    }
    let mut sum = [0.0f64; 6];
    for (pf, gf) in stream.frames.iter().zip(&gt.frames) {
        if pf.frame_index != gf.frame_index {
            bail!("predicted frame {} paired with ground-truth frame {}", pf.frame_index, gf.frame_index);
        }
        let l = total_loss(&stream.header, pf, gf, &cfg.weights)
            .with_context(|| format!("frame {}", pf.frame_index))?;
        let terms = [l.cls, l.bbox_l1, l.bbox_giou, l.cond_mask_dice, l.cond_mask_ce, l.total];
        sum.iter_mut().zip(terms).for_each(|(s, t)| *s += t);
        emit(out, &json!({ "frame_index": pf.frame_index, "loss": l }))?;
    }
    let n = stream.frames.len().max(1) as f64;
    let mean = sum.map(|s| s / n);
    emit(
        out,
        &json!({
            "frames": stream.frames.len(),
            "mean": {
                "cls": mean[0], "bbox_l1": mean[1], "bbox_giou": mean[2],
                "cond_mask_dice": mean[3], "cond_mask_ce": mean[4], "total": mean[5],
            },
            "config": cfg.to_json(),
        }),
    )
}

/// Returns whether every suite passed.
pub fn selfcheck(cfg: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let results = selfcheck::run_all();
    let passed = results.iter().all(|r| r.passed());
    for r in &results {
        let status = if r.passed() { "pass" } else { "FAIL" };
        info!("{status} {} ({} cases)", r.name, r.cases);
    }
    emit(out, &json!({ "passed": passed, "checks": results, "config": cfg.to_json() }))?;
    Ok(passed)
}
