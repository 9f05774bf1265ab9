//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report reads top to
//! bottom; exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qtrack_core::assignment::{brute_force_solve, solve, CostMatrix};
use qtrack_core::geometry::BBox;
use qtrack_core::losses::{
    cls_ce_loss, conditional_mask_loss, detr_match, dice_loss, dice_loss_with_eps, giou_loss, l1_box_loss,
    mask_ce_loss, total_loss, LossWeights, ProbMap,
};
use qtrack_core::mask::{rle_encode, Bitmap, RleMask};
use qtrack_core::metrics::{
    eval_hota, eval_idf1, eval_mota, eval_tracking, gt_sequence, pred_sequence, TrackFrame, TrackedObject,
};
use qtrack_core::oracle::{enumerate_presence_multisets, enumerate_tiny_instances, hota_exhaustive};
use qtrack_core::report::ExamReport;
use qtrack_core::selfcheck::{random_tiny_instance, PRESENCE_LAYOUTS, TINY_POSITIONS};
use qtrack_core::stream::{
    ClassDistribution, FramePrediction, GroundTruthFrame, GroundTruthObject, QuerySlot, StreamHeader, VideoStream,
    FORMAT_VERSION,
};
use qtrack_core::synth::{scenario_suite, SynthScenario};
use qtrack_core::tracker::{iou_baseline_track, track_video, QueryTracker, TrackerConfig, TrackingOutput, DEFAULT_IOU_FLOOR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// 1. assignment

fn criterion_assignment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut cost_mismatch = 0;
    let mut pair_mismatch = 0;
    for _ in 0..5000 {
        let (r, c) = (rng.random_range(1..=7), rng.random_range(1..=7));
        let spread = if rng.random_bool(0.5) { 3 } else { 100 };
        let v = (0..r * c).map(|_| rng.random_range(-spread..=spread) as f64).collect();
        let m = CostMatrix::new(r, c, v).unwrap();
        let (fast, slow) = (solve(&m), brute_force_solve(&m).unwrap());
        cost_mismatch += usize::from(fast.total_cost != slow.total_cost);
        pair_mismatch += usize::from(fast.pairs != slow.pairs);
    }
    let elapsed = start.elapsed();
    outcome(
        cost_mismatch == 0 && elapsed < Duration::from_secs(10),
        format!("5000 matrices, {cost_mismatch} cost mismatches, {pair_mismatch} tie-break differences, {elapsed:.2?} (limit 10s)"),
    )
}

// ---------------------------------------------------------------------------
// shared random frame builders

const H: usize = 16;
const W: usize = 20;

fn header(n: usize) -> StreamHeader {
    StreamHeader {
        version: FORMAT_VERSION,
        n_queries: n,
        embed_dim: 2,
        frame_height: H,
        frame_width: W,
        classes: vec!["AD".into(), "HP".into()],
        video_id: None,
        generator: None,
    }
}

fn random_box(rng: &mut ChaCha8Rng) -> BBox {
    let x = rng.random_range(0.0..(W as f64 - 2.0));
    let y = rng.random_range(0.0..(H as f64 - 2.0));
    BBox::new(x, y, rng.random_range(x + 1.0..=W as f64), rng.random_range(y + 1.0..=H as f64))
}

fn random_mask(rng: &mut ChaCha8Rng) -> RleMask {
    let density: f64 = rng.random_range(0.0..0.6);
    let data = (0..H * W).map(|_| rng.random_bool(density)).collect();
    rle_encode(&Bitmap { height: H, width: W, data }).unwrap()
}

fn random_slot(rng: &mut ChaCha8Rng) -> QuerySlot {
    let a: f64 = rng.random_range(0.0..1.0);
    let b: f64 = rng.random_range(0.0..(1.0 - a));
    QuerySlot {
        embedding: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        bbox: random_box(rng),
        probs: ClassDistribution::new(vec![a, b]),
        mask: Some(random_mask(rng)),
    }
}

/// Random frame with `n` slots and `k ≤ n` objects; `mask_p` is the chance
/// that an object carries a mask.
fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize, mask_p: f64) -> (FramePrediction, GroundTruthFrame) {
    let mut slots: Vec<QuerySlot> = (0..n).map(|_| random_slot(rng)).collect();
    // duplicate slots now and then so the matching has exact ties
    if n > 1 && rng.random_bool(0.3) {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        slots[j] = slots[i].clone();
    }
    let objects = (0..k)
        .map(|i| GroundTruthObject {
            gt_track_id: i as i64,
            bbox: random_box(rng),
            mask: rng.random_bool(mask_p).then(|| random_mask(rng)),
            class_label: if rng.random_bool(0.5) { "AD" } else { "HP" }.into(),
        })
        .collect();
    (FramePrediction { frame_index: 0, slots }, GroundTruthFrame { frame_index: 0, objects })
}

// ---------------------------------------------------------------------------
// 2. conditional mask loss

fn criterion_conditioning() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = LossWeights::default();
    let mut box_only_bad = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(0..=n);
        let (frame, gt) = random_instance(&mut rng, n, k, 0.0);
        let h = header(n);
        let m = detr_match(&h, &frame, &gt, &w).unwrap();
        let l = total_loss(&h, &frame, &gt, &w).unwrap();
        let zero = conditional_mask_loss(&frame, &gt, &m, &w).unwrap() == (0.0, 0.0);
        let recompose = l.total == w.w_cls * l.cls + w.w_l1 * l.bbox_l1 + w.w_giou * l.bbox_giou;
        box_only_bad += usize::from(!(zero && l.cond_mask_dice == 0.0 && l.cond_mask_ce == 0.0 && recompose));
    }
    let mut mixed_bad = 0;
    let mut masked_objects = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=n);
        let (frame, gt) = random_instance(&mut rng, n, k, 0.5);
        masked_objects += gt.objects.iter().filter(|o| o.mask.is_some()).count();
        let mut stripped = gt.clone();
        stripped.objects.iter_mut().for_each(|o| o.mask = None);
        let h = header(n);
        let a = total_loss(&h, &frame, &gt, &w).unwrap();
        let b = total_loss(&h, &frame, &stripped, &w).unwrap();
        let same = [(a.cls, b.cls), (a.bbox_l1, b.bbox_l1), (a.bbox_giou, b.bbox_giou)]
            .iter()
            .all(|(x, y)| x.to_bits() == y.to_bits());
        let same_match = detr_match(&h, &frame, &gt, &w).unwrap() == detr_match(&h, &frame, &stripped, &w).unwrap();
        mixed_bad += usize::from(!(same && same_match));
    }
    outcome(
        box_only_bad == 0 && mixed_bad == 0,
        format!(
            "500 box-only frames: {box_only_bad} non-zero; 500 mixed frames ({masked_objects} masked objects): {mixed_bad} cls/bbox differences"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. DETR matching

/// Matching cost written out from the definition, independent of the library.
fn oracle_cost(frame: &FramePrediction, gt: &GroundTruthFrame, w: &LossWeights) -> Vec<Vec<f64>> {
    let norm = |b: &BBox| {
        let (x1, y1, x2, y2) = (b.x1, b.y1, b.x2, b.y2);
        [(x1 + x2) / 2.0 / W as f64, (y1 + y2) / 2.0 / H as f64, (x2 - x1) / W as f64, (y2 - y1) / H as f64]
    };
    let giou = |a: &BBox, b: &BBox| {
        let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
        let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
        let inter = iw * ih;
        let area = |b: &BBox| (b.x2 - b.x1) * (b.y2 - b.y1);
        let union = area(a) + area(b) - inter;
        let hull = (a.x2.max(b.x2) - a.x1.min(b.x1)) * (a.y2.max(b.y2) - a.y1.min(b.y1));
        inter / union - (hull - union) / hull
    };
    gt.objects
        .iter()
        .map(|o| {
            let cls = if o.class_label == "AD" { 0 } else { 1 };
            frame
                .slots
                .iter()
                .map(|s| {
                    let (p, g) = (norm(&s.bbox), norm(&o.bbox));
                    let l1 = p.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>() / 4.0;
                    -w.match_w_cls * s.probs.probs[cls] + w.match_w_l1 * l1 + w.match_w_giou * (1.0 - giou(&s.bbox, &o.bbox))
                })
                .collect()
        })
        .collect()
}

/// Lexicographically first injection among those of minimum cost.
fn oracle_match(cost: &[Vec<f64>], n: usize) -> Vec<(usize, usize)> {
    fn go(i: usize, acc: f64, cost: &[Vec<f64>], used: &mut [bool], cur: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>) {
        if i == cost.len() {
            if best.as_ref().is_none_or(|(b, _)| acc < *b - 1e-9) {
                *best = Some((acc, cur.clone()));
            }
            return;
        }
        for q in 0..used.len() {
            if !used[q] {
                used[q] = true;
                cur.push(q);
                go(i + 1, acc + cost[i][q], cost, used, cur, best);
                cur.pop();
                used[q] = false;
            }
        }
    }
    let mut best = None;
    go(0, 0.0, cost, &mut vec![false; n], &mut Vec::new(), &mut best);
    best.map(|(_, v)| v.into_iter().enumerate().collect()).unwrap_or_default()
}

fn criterion_detr_matching() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = LossWeights::default();
    let mut bad = 0;
    let mut cost_gap: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(0..=n.min(5));
        let (frame, gt) = random_instance(&mut rng, n, k, 0.0);
        let m = detr_match(&header(n), &frame, &gt, &w).unwrap();
        let cost = oracle_cost(&frame, &gt, &w);
        let expected = oracle_match(&cost, n);
        let claimed: BTreeSet<usize> = m.pairs.iter().map(|p| p.1).collect();
        let unmatched_ok = m.unmatched_queries == (0..n).filter(|q| !claimed.contains(q)).collect::<Vec<_>>();
        if m.pairs != expected || !unmatched_ok {
            bad += 1;
        }
        let (a, b): (f64, f64) = (
            m.pairs.iter().map(|&(i, q)| cost[i][q]).sum(),
            expected.iter().map(|&(i, q)| cost[i][q]).sum(),
        );
        cost_gap = cost_gap.max((a - b).abs());
    }
    outcome(bad == 0, format!("1000 instances (K ≤ 5, N ≤ 8): {bad} pair-set differences, max cost gap {cost_gap:.1e}"))
}

// ---------------------------------------------------------------------------
// 4. tracker semantics

fn slot(embedding: Vec<f64>, live: bool) -> QuerySlot {
    QuerySlot {
        embedding,
        bbox: BBox::new(10.0, 10.0, 20.0, 20.0),
        probs: ClassDistribution::new(if live { vec![0.9, 0.05] } else { vec![0.01, 0.01] }),
        mask: None,
    }
}

fn scripted(frames: Vec<Vec<QuerySlot>>) -> VideoStream {
    let n = frames[0].len();
    let dim = frames[0][0].embedding.len();
    let mut h = header(n);
    h.embed_dim = dim;
    VideoStream {
        header: h,
        frames: frames.into_iter().enumerate().map(|(t, slots)| FramePrediction { frame_index: t as u64, slots }).collect(),
    }
}

fn gap_ids(gap: usize) -> Vec<u64> {
    let u = vec![1.0, 0.0, 0.0];
    let v = vec![0.0, 1.0, 0.0];
    let frames = (0..3 + gap + 2)
        .map(|t| {
            let present = !(3..3 + gap).contains(&t);
            vec![slot(u.clone(), present), slot(v.clone(), false)]
        })
        .collect();
    let out = track_video(&scripted(frames), &TrackerConfig::default()).unwrap();
    out.frames.iter().flat_map(|f| f.assignments.iter().map(|a| a.track_id)).collect()
}

fn random_stream(seed: u64, n_frames: usize, n: usize, dim: usize) -> VideoStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..n_frames)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let emb = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let mut s = slot(emb, rng.random_bool(0.5));
                    let x = rng.random_range(0.0..80.0);
                    s.bbox = BBox::new(x, x, x + 10.0, x + 10.0);
                    s
                })
                .collect()
        })
        .collect();
    scripted(frames)
}

fn ids_hygienic(stream: &VideoStream) -> bool {
    let mut tracker = QueryTracker::new(TrackerConfig::default()).unwrap();
    let mut retired = BTreeSet::new();
    let mut next = 0u64;
    for f in &stream.frames {
        let out = tracker.update(f).unwrap();
        let ids: BTreeSet<u64> = out.assignments.iter().map(|a| a.track_id).collect();
        if ids.len() != out.assignments.len() || ids.iter().any(|id| retired.contains(id)) {
            return false;
        }
        for &id in &ids {
            if id >= next {
                if id != next {
                    return false;
                }
                next += 1;
            }
        }
        retired.extend(tracker.state().retired.iter().map(|t| t.track_id));
    }
    !retired.is_empty()
}

fn criterion_tracker() -> Outcome {
    let g5 = gap_ids(5);
    let g6 = gap_ids(6);
    let a = g5.iter().all(|&id| id == g5[0]) && g6.first() != g6.last() && g6[..3].iter().all(|&id| id == g6[0]);

    let (u, v) = (vec![1.0, 0.0], vec![0.0, 1.0]);
    let swap = track_video(
        &scripted(vec![vec![slot(u.clone(), true), slot(v.clone(), true)], vec![slot(v, true), slot(u, true)]]),
        &TrackerConfig::default(),
    )
    .unwrap();
    let b = swap.frames[1].track_for_slot(1) == swap.frames[0].track_for_slot(0)
        && swap.frames[1].track_for_slot(0) == swap.frames[0].track_for_slot(1);

    let cfg = TrackerConfig::default();
    let mut scale_cases = 0;
    let mut c = true;
    let drift = SynthScenario::Drift.config(3);
    let streams: Vec<VideoStream> = std::iter::once(qtrack_core::synth::generate(&drift).unwrap().1)
        .chain((0..20).map(|s| random_stream(s, 40, 5, 4)))
        .collect();
    for s in &streams {
        let base = track_video(s, &cfg).unwrap();
        for k in [1e-3, 0.37, 3.0, 1e3] {
            let mut scaled = s.clone();
            scaled.frames.iter_mut().flat_map(|f| &mut f.slots).for_each(|q| q.embedding.iter_mut().for_each(|x| *x *= k));
            c &= track_video(&scaled, &cfg).unwrap() == base;
            scale_cases += 1;
        }
    }

    let d = ids_hygienic(&random_stream(10, 10_000, 6, 4)) && ids_hygienic(&random_stream(11, 10_000, 3, 2));
    outcome(
        a && b && c && d,
        format!(
            "(a) gap 5 keeps id: {}, gap 6 retires: {}; (b) swap follows embeddings: {b}; (c) scale invariance over {scale_cases} cases: {c}; (d) 2×10k-frame fuzz id hygiene: {d}",
            g5.iter().all(|&id| id == g5[0]),
            g6.first() != g6.last()
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. query tracker vs overlap baseline

fn detections(out: &TrackingOutput) -> Vec<BTreeSet<usize>> {
    out.frames.iter().map(|f| f.assignments.iter().map(|a| a.slot).collect()).collect()
}

fn criterion_baseline_comparison() -> Outcome {
    let start = Instant::now();
    let cfg = TrackerConfig::default();
    let mut parity = true;
    let mut sums: BTreeMap<&str, [f64; 4]> = BTreeMap::new();
    for seed in 1..=20 {
        for s in scenario_suite(seed) {
            let q = track_video(&s.stream, &cfg).unwrap();
            let b = iou_baseline_track(&s.stream, &cfg, DEFAULT_IOU_FLOOR).unwrap();
            let gt = gt_sequence(&s.gt);
            let hq = eval_hota(&gt, &pred_sequence(&q)).unwrap();
            let hb = eval_hota(&gt, &pred_sequence(&b)).unwrap();
            parity &= detections(&q) == detections(&b) && hq.deta_alpha == hb.deta_alpha;
            let e = sums.entry(s.scenario.name()).or_default();
            for (acc, x) in e.iter_mut().zip([hq.assa, hb.assa, hq.hota, hb.hota]) {
                *acc += x / 20.0;
            }
        }
    }
    let elapsed = start.elapsed();
    let gap = |name: &str| 100.0 * (sums[name][0] - sums[name][1]);
    let detail: Vec<String> = sums
        .iter()
        .map(|(k, v)| format!("{k} AssA {:.1}/{:.1} HOTA {:.1}/{:.1}", 100.0 * v[0], 100.0 * v[1], 100.0 * v[2], 100.0 * v[3]))
        .collect();
    let pass = parity && gap("occlusion") >= 10.0 && gap("large_motion") >= 10.0 && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "DetA parity {parity}; AssA gap occlusion {:.1}, large_motion {:.1} points (need ≥ 10); query/IoU: {}; {elapsed:.2?} (limit 60s)",
            gap("occlusion"),
            gap("large_motion"),
            detail.join(", ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. metric oracles

fn obj(id: i64, x: f64) -> TrackedObject {
    TrackedObject { id, bbox: BBox::new(x, 0.0, x + 10.0, 10.0), mask: None }
}

fn still(ids: &[(i64, f64)], frames: usize) -> Vec<TrackFrame> {
    (0..frames as u64).map(|t| TrackFrame::new(t, ids.iter().map(|&(id, x)| obj(id, x)).collect())).collect()
}

fn criterion_metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut cases = 0usize;
    let mut hota_bad = 0usize;
    let mut check = |gt: &[TrackFrame], pred: &[TrackFrame]| {
        cases += 1;
        let ok = matches!((eval_hota(gt, pred), hota_exhaustive(gt, pred)), (Ok(a), Ok(b)) if a == b);
        hota_bad += usize::from(!ok);
    };
    for layout in PRESENCE_LAYOUTS {
        for f in 1..=6 {
            enumerate_presence_multisets(f, layout).for_each(|(g, p)| check(&g, &p));
        }
    }
    for f in 1..=2 {
        enumerate_tiny_instances(f, &TINY_POSITIONS).for_each(|(g, p)| check(&g, &p));
    }
    enumerate_tiny_instances(3, &TINY_POSITIONS[..2]).for_each(|(g, p)| check(&g, &p));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20_000 {
        let (g, p) = random_tiny_instance(&mut rng, 6);
        check(&g, &p);
    }

    // hand-computed CLEAR and identity cases
    let gt = still(&[(1, 0.0)], 10);
    let mut fp = gt.clone();
    fp[4].objects.push(obj(9, 50.0));
    let mut split = gt.clone();
    split.iter_mut().enumerate().for_each(|(t, f)| f.objects[0].id = if t < 5 { 3 } else { 4 });
    let mota_fp = eval_mota(&gt, &fp, 0.5).unwrap().mota();
    let mota_sw = eval_mota(&gt, &split, 0.5).unwrap().mota();
    let idf1_split = eval_idf1(&gt, &split, 0.5).unwrap().idf1();
    let hand = (mota_fp - 0.9).abs() < 1e-9 && (mota_sw - 0.9).abs() < 1e-9 && (idf1_split - 0.5).abs() < 1e-9;
    let h = eval_hota(&gt, &split).unwrap();
    let split_ok = h.deta == 1.0 && (h.assa - 0.5).abs() < 1e-12 && (h.hota - 0.5f64.sqrt()).abs() < 1e-12;

    let multi: Vec<TrackFrame> = (0..8u64)
        .map(|t| TrackFrame::new(t, vec![obj(1, t as f64), obj(2, 40.0 - t as f64), obj(3, 80.0)]))
        .collect();
    let renamed: Vec<TrackFrame> = multi
        .iter()
        .map(|f| TrackFrame::new(f.frame_index, f.objects.iter().map(|o| TrackedObject { id: 100 - o.id, ..o.clone() }).collect()))
        .collect();
    let r = eval_tracking(&multi, &renamed, 0.5).unwrap();
    let perfect = [r.hota, r.deta, r.assa, r.mota, r.idf1] == [1.0; 5];

    let pass = hota_bad == 0 && hand && split_ok && perfect;
    outcome(
        pass,
        format!(
            "HOTA vs exhaustive oracle: {cases} instances, {hota_bad} differences; MOTA(FP) {mota_fp:.12}, MOTA(IDSW) {mota_sw:.12}, IDF1(split) {idf1_split:.12}; split HOTA {split_ok}; perfect tracking all 1.0: {perfect}; {:.2?}",
            start.elapsed()
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. loss numerics

fn criterion_loss_numerics() -> Outcome {
    let tol = 1e-9;
    let mask = |rows: &[&[u8]]| rle_encode(&Bitmap::from_rows(rows).unwrap()).unwrap();
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > tol {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    };

    // 10×20 grid, two disjoint 100-pixel halves
    let left: Vec<Vec<u8>> = (0..10).map(|_| (0..20).map(|c| u8::from(c < 10)).collect()).collect();
    let right: Vec<Vec<u8>> = (0..10).map(|_| (0..20).map(|c| u8::from(c >= 10)).collect()).collect();
    let (l, r) = (
        mask(&left.iter().map(Vec::as_slice).collect::<Vec<_>>()),
        mask(&right.iter().map(Vec::as_slice).collect::<Vec<_>>()),
    );
    expect("dice disjoint", dice_loss(&ProbMap::from_mask(&l), &r).unwrap(), 1.0 - 1.0 / 201.0);
    let identical = dice_loss(&ProbMap::from_mask(&l), &l).unwrap();
    let (a, b) = (mask(&[&[1, 1, 0]]), mask(&[&[0, 1, 1]]));
    expect("dice half overlap, eps 0", dice_loss_with_eps(&ProbMap::from_mask(&a), &b, 0.0).unwrap(), 0.5);

    expect("ce uniform", mask_ce_loss(&ProbMap::constant(10, 20, 0.5), &l).unwrap(), 2f64.ln());
    let one = mask(&[&[1]]);
    expect("ce single pixel", mask_ce_loss(&ProbMap::constant(1, 1, 0.25), &one).unwrap(), -(0.25f64.ln()));
    let saturated = ProbMap::from_mask(&l);
    let ce_sat = mask_ce_loss(&saturated, &l).unwrap();

    let b0 = BBox::new(0.0, 0.0, 10.0, 10.0);
    expect("l1 identical", l1_box_loss(&b0, &b0, 100, 100).unwrap(), 0.0);
    expect("l1 shift", l1_box_loss(&BBox::new(10.0, 0.0, 20.0, 10.0), &b0, 100, 100).unwrap(), 0.025);
    expect("l1 widen", l1_box_loss(&b0, &BBox::new(0.0, 0.0, 30.0, 10.0), 100, 100).unwrap(), 0.075);
    expect("giou identical", giou_loss(&b0, &b0), 0.0);
    expect("giou far", giou_loss(&BBox::new(0.0, 0.0, 1.0, 1.0), &BBox::new(9.0, 0.0, 10.0, 1.0)), 1.8);
    expect("giou touching", giou_loss(&BBox::new(0.0, 0.0, 1.0, 1.0), &BBox::new(1.0, 0.0, 2.0, 1.0)), 1.0);
    expect("cls half", cls_ce_loss(&ClassDistribution::new(vec![0.5, 0.2]), Some(0)), 2f64.ln());
    expect("cls empty", cls_ce_loss(&ClassDistribution::new(vec![0.5, 0.25]), None), -(0.25f64.ln()));

    if identical > 1e-2 {
        failures.push(format!("dice identical {identical}"));
    }
    if ce_sat >= 1e-5 {
        failures.push(format!("ce saturated {ce_sat}"));
    }

    // recomposition on random instances, with and without masks
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(0..=n);
        let (frame, gt) = random_instance(&mut rng, n, k, if i % 2 == 0 { 0.0 } else { 0.6 });
        let w = LossWeights {
            w_cls: rng.random_range(0.0..5.0),
            w_l1: rng.random_range(0.0..5.0),
            w_giou: rng.random_range(0.0..5.0),
            ..LossWeights::default()
        };
        let l = total_loss(&header(n), &frame, &gt, &w).unwrap();
        let re = w.w_cls * l.cls + w.w_l1 * l.bbox_l1 + w.w_giou * l.bbox_giou + l.cond_mask_dice + l.cond_mask_ce;
        worst = worst.max((re - l.total).abs() / l.total.abs().max(f64::MIN_POSITIVE));
    }
    let pass = failures.is_empty() && worst <= 1e-12;
    outcome(
        pass,
        format!(
            "13 closed-form examples within {tol:e}: {}; worst relative recomposition error over 500 instances {worst:.1e} (limit 1e-12)",
            if failures.is_empty() { "all".to_string() } else { failures.join(", ") }
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. end to end through the binary

fn qtrack(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qtrack"))
        .arg("--quiet")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out.stdout)
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn run_pipeline(dir: &Path, scenario: SynthScenario) -> Result<(ExamReport, serde_json::Value), String> {
    let p = |name: &str| dir.join(format!("{}-{name}", scenario.name())).to_string_lossy().into_owned();
    let (gt, pred, tracks) = (p("gt.jsonl"), p("pred.jsonl"), p("tracks.jsonl"));
    qtrack(&["synth", "--scenario", scenario.name(), "--seed", "7", "--out-gt", &gt, "--out-pred", &pred])?;
    qtrack(&["track", "--in", &pred, "--out", &tracks])?;
    let metrics = qtrack(&["eval-track", "--pred", &tracks, "--gt", &gt])?;
    let report = qtrack(&["report", "--tracks", &tracks, "--stream", &pred, "--format", "json"])?;
    qtrack(&["report", "--tracks", &tracks, "--stream", &pred, "--format", "text"])?;
    let metrics: serde_json::Value = serde_json::from_slice(&metrics).map_err(|e| e.to_string())?;
    let report: ExamReport = serde_json::from_slice(&report).map_err(|e| e.to_string())?;
    Ok((report, metrics))
}

fn report_is_valid(r: &ExamReport) -> bool {
    let ids: BTreeSet<u64> = r.entries.iter().map(|e| e.polyp_id).collect();
    let sorted = r.entries.windows(2).all(|w| (w[0].first_frame, w[0].polyp_id) <= (w[1].first_frame, w[1].polyp_id));
    ids.len() == r.entries.len()
        && sorted
        && r.entries.iter().all(|e| {
            e.first_frame <= e.last_frame
                && e.frame_count as u64 <= e.last_frame - e.first_frame + 1
                && (0.0..=1.0).contains(&e.confidence)
        })
}

fn criterion_end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for scenario in SynthScenario::ALL {
        match run_pipeline(dir.path(), scenario) {
            Ok((report, metrics)) => {
                pass &= report_is_valid(&report);
                notes.push(format!("{} HOTA {}", scenario.name(), metrics["hota"]));
                if scenario == SynthScenario::Static {
                    let cfg = scenario.config(7);
                    let mut got: Vec<(String, usize, u64, u64)> = report
                        .entries
                        .iter()
                        .map(|e| (e.polyp_type.clone(), e.frame_count, e.first_frame, e.last_frame))
                        .collect();
                    let mut want: Vec<(String, usize, u64, u64)> = cfg
                        .objects
                        .iter()
                        .map(|o| (cfg.classes[o.class].clone(), cfg.n_frames as usize, 0, cfg.n_frames - 1))
                        .collect();
                    got.sort();
                    want.sort();
                    let exact = got == want && !want.is_empty();
                    pass &= exact;
                    notes.push(format!("static report matches construction: {exact}"));
                }
            }
            Err(e) => {
                pass = false;
                notes.push(e);
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(30);
    outcome(pass, format!("{}; {elapsed:.2?} (limit 30s)", notes.join(", ")))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("assignment oracle equivalence", criterion_assignment),
        ("conditional mask loss", criterion_conditioning),
        ("DETR matching oracle", criterion_detr_matching),
        ("tracker semantics", criterion_tracker),
        ("query tracker vs IoU baseline", criterion_baseline_comparison),
        ("metric oracles", criterion_metric_oracles),
        ("loss numerics", criterion_loss_numerics),
        ("end-to-end pipeline", criterion_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!("[{}] {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
