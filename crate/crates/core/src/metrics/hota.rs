//! Higher-order tracking accuracy.
//!
//! Follows the reference definition: a global alignment score between every
//! GT/predicted id pair steers per-frame matching, which is then thresholded
//! at each localization level α ∈ {0.05, …, 0.95}.

use serde::{Deserialize, Serialize};

use super::{check_aligned, id_index, similarity_matrix, TrackFrame};
use crate::assignment::{self, CostMatrix};
use crate::error::Result;

const EPS: f64 = f64::EPSILON;

pub fn hota_alphas() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotaResult {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub alphas: Vec<f64>,
    pub hota_alpha: Vec<f64>,
    pub deta_alpha: Vec<f64>,
    pub assa_alpha: Vec<f64>,
}

pub fn eval_hota(gt: &[TrackFrame], pred: &[TrackFrame]) -> Result<HotaResult> {
    check_aligned(gt, pred)?;
    let alphas = hota_alphas();
    let (gt_ids, gt_map) = id_index(gt);
    let (pr_ids, pr_map) = id_index(pred);
    let (ng, np) = (gt_ids.len(), pr_ids.len());

    let sims: Vec<Vec<Vec<f64>>> =
        gt.iter().zip(pred).map(|(g, p)| similarity_matrix(g, p)).collect::<Result<_>>()?;

    let mut potential = vec![vec![0.0; np]; ng];
    let mut gt_count = vec![0.0; ng];
    let mut pr_count = vec![0.0; np];
    for ((g, p), sim) in gt.iter().zip(pred).zip(&sims) {
        let gi: Vec<usize> = g.objects.iter().map(|o| gt_map[&o.id]).collect();
        let pi: Vec<usize> = p.objects.iter().map(|o| pr_map[&o.id]).collect();
        let row_sum: Vec<f64> = sim.iter().map(|r| r.iter().sum()).collect();
        let col_sum: Vec<f64> = (0..pi.len()).map(|j| sim.iter().map(|r| r[j]).sum()).collect();
        for (a, &ga) in gi.iter().enumerate() {
            for (b, &pb) in pi.iter().enumerate() {
                let denom = row_sum[a] + col_sum[b] - sim[a][b];
                if denom > EPS {
                    potential[ga][pb] += sim[a][b] / denom;
                }
            }
        }
        gi.iter().for_each(|&x| gt_count[x] += 1.0);
        pi.iter().for_each(|&x| pr_count[x] += 1.0);
    }
    let alignment: Vec<Vec<f64>> = (0..ng)
        .map(|a| {
            (0..np)
                .map(|b| {
                    let d = gt_count[a] + pr_count[b] - potential[a][b];
                    if d > 0.0 {
                        potential[a][b] / d
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let na = alphas.len();
    let (mut tp, mut fn_, mut fp) = (vec![0.0; na], vec![0.0; na], vec![0.0; na]);
    let mut matches = vec![vec![vec![0.0; np]; ng]; na];
    for ((g, p), sim) in gt.iter().zip(pred).zip(&sims) {
        let (kg, kp) = (g.objects.len(), p.objects.len());
        if kg == 0 || kp == 0 {
            for a in 0..na {
                fn_[a] += kg as f64;
                fp[a] += kp as f64;
            }
            continue;
        }
        let gi: Vec<usize> = g.objects.iter().map(|o| gt_map[&o.id]).collect();
        let pi: Vec<usize> = p.objects.iter().map(|o| pr_map[&o.id]).collect();
        let mut cost = Vec::with_capacity(kg * kp);
        for a in 0..kg {
            for b in 0..kp {
                cost.push(-(alignment[gi[a]][pi[b]] * sim[a][b]));
            }
        }
        let pairs = assignment::solve(&CostMatrix::new(kg, kp, cost)?).pairs;
        for (ai, &alpha) in alphas.iter().enumerate() {
            let mut hit = 0usize;
            for &(a, b) in &pairs {
                if sim[a][b] >= alpha - EPS {
                    hit += 1;
                    matches[ai][gi[a]][pi[b]] += 1.0;
                }
            }
            tp[ai] += hit as f64;
            fn_[ai] += (kg - hit) as f64;
            fp[ai] += (kp - hit) as f64;
        }
    }

    let mut deta_alpha = Vec::with_capacity(na);
    let mut assa_alpha = Vec::with_capacity(na);
    let mut hota_alpha = Vec::with_capacity(na);
    for ai in 0..na {
        let mut ass_sum = 0.0;
        for a in 0..ng {
            for b in 0..np {
                let m = matches[ai][a][b];
                if m > 0.0 {
                    ass_sum += m * m / (gt_count[a] + pr_count[b] - m).max(1.0);
                }
            }
        }
        let assa = ass_sum / tp[ai].max(1.0);
        let deta = tp[ai] / (tp[ai] + fn_[ai] + fp[ai]).max(1.0);
        deta_alpha.push(deta);
        assa_alpha.push(assa);
        hota_alpha.push((deta * assa).sqrt());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(HotaResult {
        hota: mean(&hota_alpha),
        deta: mean(&deta_alpha),
        assa: mean(&assa_alpha),
        alphas,
        hota_alpha,
        deta_alpha,
        assa_alpha,
    })
}
