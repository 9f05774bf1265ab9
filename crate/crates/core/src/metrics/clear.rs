//! CLEAR-MOT accuracy with match persistence.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_aligned, similarity_matrix, TrackFrame};
use crate::assignment::{self, CostMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClearCounts {
    pub gt_dets: usize,
    pub matches: usize,
    pub false_positives: usize,
    pub misses: usize,
    pub id_switches: usize,
}

impl ClearCounts {
    pub fn mota(&self) -> f64 {
        1.0 - (self.misses + self.false_positives + self.id_switches) as f64 / self.gt_dets as f64
    }
}

/// Per frame, a GT object keeps the prediction it was last matched to when
/// that prediction is present at IoU ≥ `alpha`; the rest are matched by an
/// assignment that first maximizes the number of valid pairs, then their
/// total IoU. A match to a different prediction than last time is a switch.
pub fn eval_mota(gt: &[TrackFrame], pred: &[TrackFrame], alpha: f64) -> Result<ClearCounts> {
    check_aligned(gt, pred)?;
    let mut last: HashMap<i64, i64> = HashMap::new();
    let mut c = ClearCounts::default();
    for (g, p) in gt.iter().zip(pred) {
        let sim = similarity_matrix(g, p)?;
        let (kg, kp) = (g.objects.len(), p.objects.len());
        c.gt_dets += kg;
        let mut gt_taken = vec![false; kg];
        let mut pr_taken = vec![false; kp];
        let mut matched = 0;

        for (a, obj) in g.objects.iter().enumerate() {
            let Some(&prev) = last.get(&obj.id) else { continue };
            if let Some(b) = p.objects.iter().position(|o| o.id == prev) {
                if !pr_taken[b] && sim[a][b] >= alpha {
                    gt_taken[a] = true;
                    pr_taken[b] = true;
                    matched += 1;
                }
            }
        }

        let rows: Vec<usize> = (0..kg).filter(|&a| !gt_taken[a]).collect();
        let cols: Vec<usize> = (0..kp).filter(|&b| !pr_taken[b]).collect();
        if !rows.is_empty() && !cols.is_empty() {
            // invalid pairs cost more than any set of valid ones can save
            let invalid = (rows.len().max(cols.len()) + 1) as f64;
            let mut cost = Vec::with_capacity(rows.len() * cols.len());
            for &a in &rows {
                for &b in &cols {
                    cost.push(if sim[a][b] >= alpha { -sim[a][b] } else { invalid });
                }
            }
            for (r, k) in assignment::solve(&CostMatrix::new(rows.len(), cols.len(), cost)?).pairs {
                let (a, b) = (rows[r], cols[k]);
                if sim[a][b] < alpha {
                    continue;
                }
                let (gid, pid) = (g.objects[a].id, p.objects[b].id);
                if last.get(&gid).is_some_and(|&prev| prev != pid) {
                    c.id_switches += 1;
                }
                last.insert(gid, pid);
                matched += 1;
            }
        }
        c.matches += matched;
        c.misses += kg - matched;
        c.false_positives += kp - matched;
    }
    if c.gt_dets == 0 {
        return Err(Error::Undefined("MOTA needs at least one ground-truth detection".into()));
    }
    Ok(c)
}
