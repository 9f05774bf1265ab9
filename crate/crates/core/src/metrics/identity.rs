//! Identity F1: one global GT↔prediction trajectory matching.

use serde::{Deserialize, Serialize};

use super::{check_aligned, id_index, similarity_matrix, TrackFrame};
use crate::assignment::{self, CostMatrix};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IdentityCounts {
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

impl IdentityCounts {
    /// 1 when both sides are empty.
    pub fn idf1(&self) -> f64 {
        let denom = 2 * self.idtp + self.idfp + self.idfn;
        if denom == 0 {
            return 1.0;
        }
        2.0 * self.idtp as f64 / denom as f64
    }
}

pub fn eval_idf1(gt: &[TrackFrame], pred: &[TrackFrame], alpha: f64) -> Result<IdentityCounts> {
    check_aligned(gt, pred)?;
    let (gt_ids, gt_map) = id_index(gt);
    let (pr_ids, pr_map) = id_index(pred);
    let gt_dets: usize = gt.iter().map(|f| f.objects.len()).sum();
    let pr_dets: usize = pred.iter().map(|f| f.objects.len()).sum();

    // frames in which each trajectory pair overlaps at IoU ≥ alpha
    let mut overlap = vec![0usize; gt_ids.len() * pr_ids.len()];
    for (g, p) in gt.iter().zip(pred) {
        let sim = similarity_matrix(g, p)?;
        for (a, go) in g.objects.iter().enumerate() {
            for (b, po) in p.objects.iter().enumerate() {
                if sim[a][b] >= alpha {
                    overlap[gt_map[&go.id] * pr_ids.len() + pr_map[&po.id]] += 1;
                }
            }
        }
    }
    let idtp = if gt_ids.is_empty() || pr_ids.is_empty() {
        0
    } else {
        let cost = overlap.iter().map(|&n| -(n as f64)).collect();
        let m = CostMatrix::new(gt_ids.len(), pr_ids.len(), cost)?;
        assignment::solve(&m).pairs.iter().map(|&(a, b)| overlap[a * pr_ids.len() + b]).sum()
    };
    Ok(IdentityCounts { idtp, idfp: pr_dets - idtp, idfn: gt_dets - idtp })
}
