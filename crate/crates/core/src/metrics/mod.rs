//! Detection, segmentation and multi-object tracking metrics.

mod clear;
mod detection;
mod hota;
mod identity;

pub use clear::{eval_mota, ClearCounts};
pub use detection::{eval_classification_f1, eval_segmentation, DetEvalResult, F1Result, DET_IOU_THRESHOLD};
pub use hota::{eval_hota, hota_alphas, HotaResult};
pub use identity::{eval_idf1, IdentityCounts};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{box_iou, BBox};
use crate::mask::{mask_iou, RleMask};
use crate::stream::GroundTruth;
use crate::tracker::TrackingOutput;

/// Threshold used by MOTA and IDF1 unless overridden.
pub const DEFAULT_MATCH_IOU: f64 = 0.5;

/// One identified detection in a frame, from either side of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedObject {
    pub id: i64,
    pub bbox: BBox,
    pub mask: Option<RleMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackFrame {
    pub frame_index: u64,
    pub objects: Vec<TrackedObject>,
}

impl TrackFrame {
    pub fn new(frame_index: u64, objects: Vec<TrackedObject>) -> Self {
        TrackFrame { frame_index, objects }
    }
}

pub fn gt_sequence(gt: &GroundTruth) -> Vec<TrackFrame> {
    gt.frames
        .iter()
        .map(|f| TrackFrame {
            frame_index: f.frame_index,
            objects: f
                .objects
                .iter()
                .map(|o| TrackedObject { id: o.gt_track_id, bbox: o.bbox, mask: o.mask.clone() })
                .collect(),
        })
        .collect()
}

pub fn pred_sequence(out: &TrackingOutput) -> Vec<TrackFrame> {
    out.frames
        .iter()
        .map(|f| TrackFrame {
            frame_index: f.frame_index,
            objects: f
                .assignments
                .iter()
                .map(|a| TrackedObject { id: a.track_id as i64, bbox: a.bbox, mask: a.mask.clone() })
                .collect(),
        })
        .collect()
}

/// Localization similarity: mask IoU when both carry masks, box IoU otherwise.
pub fn similarity(a: &TrackedObject, b: &TrackedObject) -> Result<f64> {
    match (&a.mask, &b.mask) {
        (Some(ma), Some(mb)) => mask_iou(ma, mb),
        _ => Ok(box_iou(&a.bbox, &b.bbox)),
    }
}

pub(crate) fn similarity_matrix(gt: &TrackFrame, pred: &TrackFrame) -> Result<Vec<Vec<f64>>> {
    gt.objects
        .iter()
        .map(|g| pred.objects.iter().map(|p| similarity(g, p)).collect())
        .collect()
}

pub(crate) fn check_aligned(gt: &[TrackFrame], pred: &[TrackFrame]) -> Result<()> {
    check_indices(gt.iter().map(|f| f.frame_index), pred.iter().map(|f| f.frame_index))
}

pub(crate) fn check_indices(
    gt: impl ExactSizeIterator<Item = u64>,
    pred: impl ExactSizeIterator<Item = u64>,
) -> Result<()> {
    if gt.len() != pred.len() {
        return Err(Error::Misaligned(format!(
            "{} ground-truth frames vs {} predicted frames",
            gt.len(),
            pred.len()
        )));
    }
    for (g, p) in gt.zip(pred) {
        if g != p {
            return Err(Error::Misaligned(format!("ground-truth frame {g} paired with predicted frame {p}")));
        }
    }
    Ok(())
}

/// Dense indices for the distinct ids of a sequence, in first-seen order.
pub(crate) fn id_index(seq: &[TrackFrame]) -> (Vec<i64>, std::collections::HashMap<i64, usize>) {
    let mut ids = Vec::new();
    let mut map = std::collections::HashMap::new();
    for f in seq {
        for o in &f.objects {
            map.entry(o.id).or_insert_with(|| {
                ids.push(o.id);
                ids.len() - 1
            });
        }
    }
    (ids, map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackEvalResult {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub mota: f64,
    pub idf1: f64,
}

/// All tracking metrics; MOTA and IDF1 use `match_iou`.
pub fn eval_tracking(gt: &[TrackFrame], pred: &[TrackFrame], match_iou: f64) -> Result<TrackEvalResult> {
    let h = eval_hota(gt, pred)?;
    Ok(TrackEvalResult {
        hota: h.hota,
        deta: h.deta,
        assa: h.assa,
        mota: eval_mota(gt, pred, match_iou)?.mota(),
        idf1: eval_idf1(gt, pred, match_iou)?.idf1(),
    })
}
