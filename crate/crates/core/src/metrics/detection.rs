//! Per-image detection, segmentation and classification scores.

use serde::{Deserialize, Serialize};

use super::check_indices;
use crate::error::Result;
use crate::geometry::box_iou;
use crate::mask::{mask_intersection, mask_union, RleMask};
use crate::stream::{FramePrediction, GroundTruth, GroundTruthFrame, VideoStream};

/// Box IoU required for a detection to count as a true positive.
pub const DET_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetEvalResult {
    pub dice: f64,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Frames that carried at least one ground-truth mask.
    pub seg_frames: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Result {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio_or_one(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

struct Detection {
    slot: usize,
    confidence: f64,
    class: usize,
}

fn detections(frame: &FramePrediction, tau: f64) -> Vec<Detection> {
    let mut d: Vec<Detection> = frame
        .slots
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.probs.is_empty_under(tau))
        .map(|(slot, s)| {
            let (class, confidence) = s.probs.argmax().unwrap_or((0, 0.0));
            Detection { slot, confidence, class }
        })
        .collect();
    d.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.slot.cmp(&b.slot)));
    d
}

/// Confidence-descending greedy matching; each detection takes the free GT
/// object with the highest IoU at or above the threshold, if `compatible`.
fn greedy_match(
    frame: &FramePrediction,
    gt: &GroundTruthFrame,
    dets: &[Detection],
    compatible: impl Fn(&Detection, usize) -> bool,
) -> usize {
    let mut taken = vec![false; gt.objects.len()];
    let mut tp = 0;
    for d in dets {
        let best = gt
            .objects
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i] && compatible(d, *i))
            .map(|(i, o)| (i, box_iou(&frame.slots[d.slot].bbox, &o.bbox)))
            .filter(|&(_, iou)| iou >= DET_IOU_THRESHOLD)
            .fold(None::<(usize, f64)>, |acc, x| match acc {
                Some(a) if a.1 >= x.1 => Some(a),
                _ => Some(x),
            });
        if let Some((i, _)) = best {
            taken[i] = true;
            tp += 1;
        }
    }
    tp
}

/// Precision/recall over boxes plus image-wise dice and IoU of the
/// foreground unions, averaged over frames that carry GT masks.
pub fn eval_segmentation(pred: &VideoStream, gt: &GroundTruth, tau: f64) -> Result<DetEvalResult> {
    check_indices(
        gt.frames.iter().map(|f| f.frame_index),
        pred.frames.iter().map(|f| f.frame_index),
    )?;
    let (h, w) = (gt.header.frame_height, gt.header.frame_width);
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let (mut dice_sum, mut iou_sum, mut seg_frames) = (0.0, 0.0, 0usize);
    for (pf, gf) in pred.frames.iter().zip(&gt.frames) {
        let dets = detections(pf, tau);
        let hits = greedy_match(pf, gf, &dets, |_, _| true);
        tp += hits;
        fp += dets.len() - hits;
        fn_ += gf.objects.len() - hits;

        let gt_masks: Vec<&RleMask> = gf.objects.iter().filter_map(|o| o.mask.as_ref()).collect();
        if gt_masks.is_empty() {
            continue;
        }
        seg_frames += 1;
        let a = mask_union(h, w, gt_masks)?;
        let b = mask_union(h, w, dets.iter().filter_map(|d| pf.slots[d.slot].mask.as_ref()))?;
        let inter = mask_intersection(&a, &b)?;
        let (sa, sb) = (a.area(), b.area());
        if sa + sb == 0 {
            dice_sum += 1.0;
            iou_sum += 1.0;
        } else {
            dice_sum += 2.0 * inter as f64 / (sa + sb) as f64;
            iou_sum += inter as f64 / (sa + sb - inter) as f64;
        }
    }
    let avg = |s: f64| if seg_frames == 0 { 0.0 } else { s / seg_frames as f64 };
    Ok(DetEvalResult {
        dice: avg(dice_sum),
        iou: avg(iou_sum),
        precision: ratio_or_one(tp, tp + fp),
        recall: ratio_or_one(tp, tp + fn_),
        tp,
        fp,
        fn_,
        seg_frames,
    })
}

/// Detection F1 where a true positive also needs the right argmax class.
pub fn eval_classification_f1(pred: &VideoStream, gt: &GroundTruth, tau: f64) -> Result<F1Result> {
    check_indices(
        gt.frames.iter().map(|f| f.frame_index),
        pred.frames.iter().map(|f| f.frame_index),
    )?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (pf, gf) in pred.frames.iter().zip(&gt.frames) {
        let classes: Vec<usize> =
            gf.objects.iter().map(|o| gt.class_index(&o.class_label)).collect::<Result<_>>()?;
        let dets = detections(pf, tau);
        let hits = greedy_match(pf, gf, &dets, |d, i| d.class == classes[i]);
        tp += hits;
        fp += dets.len() - hits;
        fn_ += gf.objects.len() - hits;
    }
    let precision = ratio_or_one(tp, tp + fp);
    let recall = ratio_or_one(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(F1Result { f1, precision, recall, tp, fp, fn_ })
}
