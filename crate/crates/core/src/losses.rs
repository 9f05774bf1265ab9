//! Set-prediction losses, forward only.
//!
//! Ground-truth objects are matched one-to-one to query slots by a
//! minimum-cost assignment; classification covers every slot (unmatched
//! slots are supervised towards no-object), box terms cover matched pairs,
//! and mask terms cover only matched objects that carry a mask annotation.
//! A box-only object therefore contributes nothing to the mask terms.

use serde::{Deserialize, Serialize};

use crate::assignment::{self, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{box_iou, BBox};
use crate::mask::RleMask;
use crate::stream::{ClassDistribution, FramePrediction, GroundTruthFrame, StreamHeader};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside every log.
pub const PROB_CLAMP: f64 = 1e-7;
/// Smoothing term of the dice loss.
pub const DICE_EPS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_cls: f64,
    pub w_l1: f64,
    pub w_giou: f64,
    pub w_mask: f64,
    pub w_dice: f64,
    pub match_w_cls: f64,
    pub match_w_l1: f64,
    pub match_w_giou: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_cls: 2.0,
            w_l1: 5.0,
            w_giou: 2.0,
            w_mask: 5.0,
            w_dice: 5.0,
            match_w_cls: 2.0,
            match_w_l1: 5.0,
            match_w_giou: 2.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_cls,
            self.w_l1,
            self.w_giou,
            self.w_mask,
            self.w_dice,
            self.match_w_cls,
            self.match_w_l1,
            self.match_w_giou,
        ];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Input("loss weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Per-pixel foreground probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl ProbMap {
    pub fn constant(height: usize, width: usize, p: f64) -> Self {
        ProbMap { height, width, data: vec![p; height * width] }
    }

    /// Hard 0/1 probabilities from a binary mask.
    pub fn from_mask(mask: &RleMask) -> Self {
        let mut data = vec![0.0; mask.height * mask.width];
        for (s, e) in mask.foreground_spans() {
            data[s as usize..e as usize].fill(1.0);
        }
        ProbMap { height: mask.height, width: mask.width, data }
    }

    fn check_shape(&self, gt: &RleMask) -> Result<()> {
        if self.height != gt.height || self.width != gt.width {
            return Err(Error::Dimension(format!(
                "prediction {}x{} vs ground truth {}x{}",
                self.height, self.width, gt.height, gt.width
            )));
        }
        if self.data.len() != self.height * self.width {
            return Err(Error::Dimension("probability map length does not match its shape".into()));
        }
        Ok(())
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `1 - (2 Σ p·g + eps) / (Σ p + Σ g + eps)`.
pub fn dice_loss_with_eps(pred: &ProbMap, gt: &RleMask, eps: f64) -> Result<f64> {
    pred.check_shape(gt)?;
    let psum: f64 = pred.data.iter().sum();
    let gsum = gt.area() as f64;
    let inter: f64 = gt
        .foreground_spans()
        .map(|(s, e)| pred.data[s as usize..e as usize].iter().sum::<f64>())
        .sum();
    let denom = psum + gsum + eps;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - (2.0 * inter + eps) / denom).clamp(0.0, 1.0))
}

pub fn dice_loss(pred: &ProbMap, gt: &RleMask) -> Result<f64> {
    dice_loss_with_eps(pred, gt, DICE_EPS)
}

/// Mean binary cross-entropy over all pixels.
pub fn mask_ce_loss(pred: &ProbMap, gt: &RleMask) -> Result<f64> {
    pred.check_shape(gt)?;
    let mut fg = vec![false; pred.data.len()];
    for (s, e) in gt.foreground_spans() {
        fg[s as usize..e as usize].fill(true);
    }
    let total: f64 = pred
        .data
        .iter()
        .zip(&fg)
        .map(|(&p, &g)| {
            let p = clamp_prob(p);
            if g {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / pred.data.len() as f64)
}

fn normalized_cxcywh(b: &BBox, frame_h: f64, frame_w: f64) -> [f64; 4] {
    let (cx, cy) = b.center();
    [cx / frame_w, cy / frame_h, (b.x2 - b.x1) / frame_w, (b.y2 - b.y1) / frame_h]
}

/// Mean absolute difference of frame-normalized `(cx, cy, w, h)`.
pub fn l1_box_loss(pred: &BBox, gt: &BBox, frame_h: usize, frame_w: usize) -> Result<f64> {
    if frame_h == 0 || frame_w == 0 {
        return Err(Error::Dimension(format!("frame {frame_h}x{frame_w}")));
    }
    let p = normalized_cxcywh(pred, frame_h as f64, frame_w as f64);
    let g = normalized_cxcywh(gt, frame_h as f64, frame_w as f64);
    Ok(p.iter().zip(&g).map(|(a, b)| (a - b).abs()).sum::<f64>() / 4.0)
}

/// `1 - GIoU`, in `[0, 2]`. Two degenerate boxes give 1.
pub fn giou_loss(pred: &BBox, gt: &BBox) -> f64 {
    let hull = pred.hull(gt).area();
    if hull <= 0.0 {
        return 1.0;
    }
    let inter = pred.intersection_area(gt);
    let union = pred.area() + gt.area() - inter;
    let iou = box_iou(pred, gt);
    let giou = iou - (hull - union) / hull;
    (1.0 - giou).clamp(0.0, 2.0)
}

/// `-ln p(target)`, where `None` targets the no-object mass.
pub fn cls_ce_loss(pred: &ClassDistribution, target: Option<usize>) -> f64 {
    let p = match target {
        Some(c) => pred.probs.get(c).copied().unwrap_or(0.0),
        None => pred.no_object(),
    };
    -clamp_prob(p).ln()
}

/// Ground-truth object `i` is supervised by query `pairs[i].1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_queries: Vec<usize>,
}

impl MatchResult {
    pub fn query_for(&self, object: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == object).map(|p| p.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cls: f64,
    pub bbox_l1: f64,
    pub bbox_giou: f64,
    /// Already weighted by `w_dice`.
    pub cond_mask_dice: f64,
    /// Already weighted by `w_mask`.
    pub cond_mask_ce: f64,
    pub total: f64,
}

fn gt_classes(header: &StreamHeader, gt: &GroundTruthFrame) -> Result<Vec<usize>> {
    gt.objects
        .iter()
        .map(|o| {
            header
                .classes
                .iter()
                .position(|c| *c == o.class_label)
                .ok_or_else(|| Error::UnknownClass(o.class_label.clone()))
        })
        .collect()
}

/// Rows are ground-truth objects, columns are query slots. Masks play no part.
pub fn matching_cost_matrix(
    header: &StreamHeader,
    frame: &FramePrediction,
    gt: &GroundTruthFrame,
    w: &LossWeights,
) -> Result<CostMatrix> {
    let classes = gt_classes(header, gt)?;
    let (h, wd) = (header.frame_height, header.frame_width);
    let mut values = Vec::with_capacity(gt.objects.len() * frame.slots.len());
    for (obj, &cls) in gt.objects.iter().zip(&classes) {
        for slot in &frame.slots {
            let p = slot.probs.probs.get(cls).copied().unwrap_or(0.0);
            let cost = w.match_w_cls * -p
                + w.match_w_l1 * l1_box_loss(&slot.bbox, &obj.bbox, h, wd)?
                + w.match_w_giou * giou_loss(&slot.bbox, &obj.bbox);
            values.push(cost);
        }
    }
    CostMatrix::new(gt.objects.len(), frame.slots.len(), values)
}

pub fn detr_match(
    header: &StreamHeader,
    frame: &FramePrediction,
    gt: &GroundTruthFrame,
    w: &LossWeights,
) -> Result<MatchResult> {
    let (k, n) = (gt.objects.len(), frame.slots.len());
    if k > n {
        return Err(Error::Capacity(format!("{k} ground-truth objects but only {n} queries")));
    }
    let cost = matching_cost_matrix(header, frame, gt, w)?;
    let pairs = assignment::solve(&cost).pairs;
    let mut claimed = vec![false; n];
    for &(_, q) in &pairs {
        claimed[q] = true;
    }
    let unmatched_queries = (0..n).filter(|&q| !claimed[q]).collect();
    Ok(MatchResult { pairs, unmatched_queries })
}

/// Returns `(dice_term, ce_term)`, each summed over masked objects and
/// weighted by `w_dice` and `w_mask`.
pub fn conditional_mask_loss(
    frame: &FramePrediction,
    gt: &GroundTruthFrame,
    matching: &MatchResult,
    w: &LossWeights,
) -> Result<(f64, f64)> {
    let mut dice = 0.0;
    let mut ce = 0.0;
    for &(obj, q) in &matching.pairs {
        let Some(gt_mask) = &gt.objects[obj].mask else { continue };
        let pred_mask = frame
            .slots
            .get(q)
            .and_then(|s| s.mask.as_ref())
            .ok_or(Error::MissingPredictionMask { object: obj, query: q })?;
        let probs = ProbMap::from_mask(pred_mask);
        dice += w.w_dice * dice_loss(&probs, gt_mask)?;
        ce += w.w_mask * mask_ce_loss(&probs, gt_mask)?;
    }
    Ok((dice, ce))
}

pub fn total_loss(
    header: &StreamHeader,
    frame: &FramePrediction,
    gt: &GroundTruthFrame,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    w.validate()?;
    let matching = detr_match(header, frame, gt, w)?;
    let classes = gt_classes(header, gt)?;
    let n = frame.slots.len();

    let mut target: Vec<Option<usize>> = vec![None; n];
    for &(obj, q) in &matching.pairs {
        target[q] = Some(classes[obj]);
    }
    let cls = if n == 0 {
        0.0
    } else {
        frame.slots.iter().zip(&target).map(|(s, t)| cls_ce_loss(&s.probs, *t)).sum::<f64>() / n as f64
    };

    let (mut l1, mut giou) = (0.0, 0.0);
    for &(obj, q) in &matching.pairs {
        let (p, g) = (&frame.slots[q].bbox, &gt.objects[obj].bbox);
        l1 += l1_box_loss(p, g, header.frame_height, header.frame_width)?;
        giou += giou_loss(p, g);
    }
    let k = matching.pairs.len();
    if k > 0 {
        l1 /= k as f64;
        giou /= k as f64;
    }

    let (dice, ce) = conditional_mask_loss(frame, gt, &matching, w)?;
    let total = w.w_cls * cls + w.w_l1 * l1 + w.w_giou * giou + dice + ce;
    Ok(LossBreakdown { cls, bbox_l1: l1, bbox_giou: giou, cond_mask_dice: dice, cond_mask_ce: ce, total })
}
