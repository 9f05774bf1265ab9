//! Slow reference implementations used to cross-check the fast paths.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::metrics::{hota_alphas, similarity, HotaResult, TrackFrame, TrackedObject};

/// Per-frame matchings enumerated exhaustively; feasible for a handful of
/// objects per frame only.
const MAX_OBJECTS_PER_FRAME: usize = 6;

/// Best injective matching of size `min(rows, cols)` maximizing `score`;
/// equal-score candidates (within 1e-12) keep the lexicographically first.
fn best_matching(score: &[Vec<f64>], cols: usize) -> Vec<(usize, usize)> {
    let rows = score.len();
    let need = rows.min(cols);
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    let mut cur = Vec::new();
    let mut used = vec![false; cols];

    #[allow(clippy::too_many_arguments)]
    fn go(
        r: usize,
        acc: f64,
        score: &[Vec<f64>],
        cols: usize,
        need: usize,
        cur: &mut Vec<(usize, usize)>,
        used: &mut [bool],
        best: &mut Option<(f64, Vec<(usize, usize)>)>,
    ) {
        if cur.len() == need {
            if best.as_ref().is_none_or(|(b, _)| acc > *b + 1e-12) {
                *best = Some((acc, cur.clone()));
            }
            return;
        }
        if r == score.len() {
            return;
        }
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                cur.push((r, c));
                go(r + 1, acc + score[r][c], score, cols, need, cur, used, best);
                cur.pop();
                used[c] = false;
            }
        }
        if score.len() - r - 1 >= need - cur.len() {
            go(r + 1, acc, score, cols, need, cur, used, best);
        }
    }

    go(0, 0.0, score, cols, need, &mut cur, &mut used, &mut best);
    best.map(|b| b.1).unwrap_or_default()
}

/// HOTA with per-frame matchings found by exhaustive enumeration.
pub fn hota_exhaustive(gt: &[TrackFrame], pred: &[TrackFrame]) -> Result<HotaResult> {
    if gt.len() != pred.len() || gt.iter().zip(pred).any(|(g, p)| g.frame_index != p.frame_index) {
        return Err(Error::Misaligned("oracle needs aligned frames".into()));
    }
    if gt.iter().chain(pred).any(|f| f.objects.len() > MAX_OBJECTS_PER_FRAME) {
        return Err(Error::TooLarge("too many objects in a frame".into()));
    }
    let ordered_ids = |seq: &[TrackFrame]| {
        let mut seen = BTreeSet::new();
        let mut ids = Vec::new();
        for o in seq.iter().flat_map(|f| &f.objects) {
            if seen.insert(o.id) {
                ids.push(o.id);
            }
        }
        ids
    };
    let gt_ids = ordered_ids(gt);
    let pr_ids = ordered_ids(pred);
    let pos = |ids: &[i64], id: i64| ids.iter().position(|&x| x == id).expect("known id");

    let count = |seq: &[TrackFrame], id: i64| {
        seq.iter().map(|f| f.objects.iter().filter(|o| o.id == id).count() as f64).sum::<f64>()
    };
    let gt_count: Vec<f64> = gt_ids.iter().map(|&id| count(gt, id)).collect();
    let pr_count: Vec<f64> = pr_ids.iter().map(|&id| count(pred, id)).collect();

    // soft co-occurrence of each id pair
    let mut potential = vec![vec![0.0; pr_ids.len()]; gt_ids.len()];
    let mut sims = Vec::with_capacity(gt.len());
    for (g, p) in gt.iter().zip(pred) {
        let mut s = vec![vec![0.0; p.objects.len()]; g.objects.len()];
        for (a, go) in g.objects.iter().enumerate() {
            for (b, po) in p.objects.iter().enumerate() {
                s[a][b] = similarity(go, po)?;
            }
        }
        for a in 0..g.objects.len() {
            for b in 0..p.objects.len() {
                let row: f64 = s[a].iter().sum();
                let col: f64 = s.iter().map(|r| r[b]).sum();
                let denom = row + col - s[a][b];
                if denom > f64::EPSILON {
                    potential[pos(&gt_ids, g.objects[a].id)][pos(&pr_ids, p.objects[b].id)] += s[a][b] / denom;
                }
            }
        }
        sims.push(s);
    }

    let alphas = hota_alphas();
    let mut out = HotaResult {
        hota: 0.0,
        deta: 0.0,
        assa: 0.0,
        alphas: alphas.clone(),
        hota_alpha: vec![],
        deta_alpha: vec![],
        assa_alpha: vec![],
    };
    let matchings: Vec<Vec<(usize, usize)>> = gt
        .iter()
        .zip(pred)
        .zip(&sims)
        .map(|((g, p), s)| {
            let score: Vec<Vec<f64>> = (0..g.objects.len())
                .map(|a| {
                    (0..p.objects.len())
                        .map(|b| {
                            let (gi, pi) = (pos(&gt_ids, g.objects[a].id), pos(&pr_ids, p.objects[b].id));
                            let d = gt_count[gi] + pr_count[pi] - potential[gi][pi];
                            let align = if d > 0.0 { potential[gi][pi] / d } else { 0.0 };
                            align * s[a][b]
                        })
                        .collect()
                })
                .collect();
            best_matching(&score, p.objects.len())
        })
        .collect();

    for &alpha in &alphas {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        let mut m = vec![vec![0.0; pr_ids.len()]; gt_ids.len()];
        for (((g, p), s), pairs) in gt.iter().zip(pred).zip(&sims).zip(&matchings) {
            let hits: Vec<_> = pairs.iter().filter(|&&(a, b)| s[a][b] >= alpha - f64::EPSILON).collect();
            for &&(a, b) in &hits {
                m[pos(&gt_ids, g.objects[a].id)][pos(&pr_ids, p.objects[b].id)] += 1.0;
            }
            tp += hits.len() as f64;
            fn_ += (g.objects.len() - hits.len()) as f64;
            fp += (p.objects.len() - hits.len()) as f64;
        }
        let mut ass = 0.0;
        for (gi, row) in m.iter().enumerate() {
            for (pi, &n) in row.iter().enumerate() {
                if n > 0.0 {
                    ass += n * n / (gt_count[gi] + pr_count[pi] - n).max(1.0);
                }
            }
        }
        let assa = ass / f64::max(tp, 1.0);
        let deta = tp / f64::max(tp + fn_ + fp, 1.0);
        out.deta_alpha.push(deta);
        out.assa_alpha.push(assa);
        out.hota_alpha.push((deta * assa).sqrt());
    }
    let n = alphas.len() as f64;
    out.hota = out.hota_alpha.iter().sum::<f64>() / n;
    out.deta = out.deta_alpha.iter().sum::<f64>() / n;
    out.assa = out.assa_alpha.iter().sum::<f64>() / n;
    Ok(out)
}


/// Builds a tiny instance from per-frame cells `[gt 1, gt 2, pred 10, pred 11]`,
/// each absent or a 10×10 box at the given x offset.
pub fn tiny_instance(cells: &[[Option<f64>; 4]]) -> (Vec<TrackFrame>, Vec<TrackFrame>) {
    let mut gt: Vec<TrackFrame> = (0..cells.len() as u64).map(|t| TrackFrame::new(t, vec![])).collect();
    let mut pred = gt.clone();
    for (t, row) in cells.iter().enumerate() {
        for (k, (id, x)) in [1i64, 2, 10, 11].into_iter().zip(row).enumerate() {
            let Some(x) = *x else { continue };
            let obj = TrackedObject { id, bbox: BBox::new(x, 0.0, x + 10.0, 10.0), mask: None };
            if k < 2 { &mut gt[t] } else { &mut pred[t] }.objects.push(obj);
        }
    }
    (gt, pred)
}

/// Every instance over exactly `n_frames` frames where each of the four
/// tracks is, in each frame, absent or at one of `positions`.
pub fn enumerate_tiny_instances(
    n_frames: usize,
    positions: &[f64],
) -> impl Iterator<Item = (Vec<TrackFrame>, Vec<TrackFrame>)> + '_ {
    let states = positions.len() as u64 + 1;
    (0..states.pow(4 * n_frames as u32)).map(move |mut code| {
        let cells: Vec<[Option<f64>; 4]> = (0..n_frames)
            .map(|_| {
                std::array::from_fn(|_| {
                    let s = (code % states) as usize;
                    code /= states;
                    s.checked_sub(1).map(|i| positions[i])
                })
            })
            .collect();
        tiny_instance(&cells)
    })
}

/// Every instance over exactly `n_frames` frames where each track sits at a
/// fixed x offset (`layout`) and only presence varies, one representative
/// per multiset of frames. HOTA does not depend on frame order, so this
/// covers all orderings up to float summation order.
pub fn enumerate_presence_multisets(
    n_frames: usize,
    layout: [f64; 4],
) -> impl Iterator<Item = (Vec<TrackFrame>, Vec<TrackFrame>)> {
    // non-decreasing sequences of 4-bit presence codes
    let mut codes: Option<Vec<u8>> = Some(vec![0; n_frames]);
    std::iter::from_fn(move || {
        let cur = codes.clone()?;
        let mut next = cur.clone();
        codes = match next.iter().rposition(|&c| c < 15) {
            Some(i) => {
                let v = next[i] + 1;
                next[i..].iter_mut().for_each(|c| *c = v);
                Some(next)
            }
            None => None,
        };
        let cells: Vec<[Option<f64>; 4]> = cur
            .iter()
            .map(|&c| std::array::from_fn(|k| (c >> k & 1 == 1).then_some(layout[k])))
            .collect();
        Some(tiny_instance(&cells))
    })
}
