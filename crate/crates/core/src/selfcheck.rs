//! Embedded oracle suites: fast paths checked against their references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assignment::{brute_force_solve, solve, CostMatrix};
use crate::mask::{rle_decode, rle_encode, Bitmap};
use crate::metrics::{eval_hota, TrackFrame};
use crate::oracle::{enumerate_presence_multisets, enumerate_tiny_instances, hota_exhaustive, tiny_instance};

/// Box x offsets for the tiny HOTA universe; pairwise IoUs are 7/13, 1/19 and 0.
pub const TINY_POSITIONS: [f64; 3] = [0.0, 3.0, 12.0];

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    fn new(name: &'static str) -> Self {
        CheckOutcome { name, cases: 0, failures: 0, first_failure: None }
    }
}

/// `solve` against exhaustive enumeration on random integer matrices.
pub fn check_assignment(cases: usize, max_dim: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("assignment_brute_force");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let (r, c) = (rng.random_range(1..=max_dim), rng.random_range(1..=max_dim));
        let v = (0..r * c).map(|_| rng.random_range(-100..=100) as f64).collect();
        let m = CostMatrix::new(r, c, v).expect("finite");
        let fast = solve(&m);
        let slow = brute_force_solve(&m).expect("small");
        out.record(fast.total_cost == slow.total_cost, || format!("{m:?}: {fast:?} vs {slow:?}"));
    }
    out
}

pub fn check_rle_round_trip(cases: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("rle_round_trip");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let (h, w) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let density: f64 = rng.random();
        let b = Bitmap { height: h, width: w, data: (0..h * w).map(|_| rng.random_bool(density)).collect() };
        let ok = rle_encode(&b).and_then(|m| rle_decode(&m)).is_ok_and(|d| d == b);
        out.record(ok, || format!("{h}x{w} bitmap failed to round-trip"));
    }
    out
}

fn compare_hota(out: &mut CheckOutcome, gt: &[TrackFrame], pred: &[TrackFrame]) {
    let fast = eval_hota(gt, pred);
    let slow = hota_exhaustive(gt, pred);
    let ok = matches!((&fast, &slow), (Ok(a), Ok(b)) if a == b);
    out.record(ok, || format!("gt {gt:?}\npred {pred:?}\nfast {fast:?}\nslow {slow:?}"));
}

/// A random instance with ≤ 2 tracks per side over up to `max_frames` frames.
pub fn random_tiny_instance(rng: &mut ChaCha8Rng, max_frames: usize) -> (Vec<TrackFrame>, Vec<TrackFrame>) {
    let frames = rng.random_range(1..=max_frames);
    let cells: Vec<[Option<f64>; 4]> = (0..frames)
        .map(|_| {
            std::array::from_fn(|_| {
                let s = rng.random_range(0..=TINY_POSITIONS.len());
                s.checked_sub(1).map(|i| TINY_POSITIONS[i])
            })
        })
        .collect();
    tiny_instance(&cells)
}

/// HOTA against the exhaustive reference: every instance of the tiny
/// universe up to `exhaustive_frames` frames, plus `sampled` random
/// instances of up to 6 frames.
pub fn check_hota(exhaustive_frames: usize, sampled: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("hota_exhaustive_oracle");
    for f in 1..=exhaustive_frames {
        for (gt, pred) in enumerate_tiny_instances(f, &TINY_POSITIONS) {
            compare_hota(&mut out, &gt, &pred);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sampled {
        let (gt, pred) = random_tiny_instance(&mut rng, 6);
        compare_hota(&mut out, &gt, &pred);
    }
    out
}

/// Layouts for presence enumeration: all tracks co-located (matching decided
/// by alignment alone), and a mixed layout with IoUs 7/13, 1, 1/19 and 0.
pub const PRESENCE_LAYOUTS: [[f64; 4]; 2] = [[0.0; 4], [0.0, 12.0, 3.0, 12.0]];

/// HOTA against the exhaustive reference over every presence pattern of
/// each layout, for 1 to `max_frames` frames.
pub fn check_hota_presence(max_frames: usize) -> CheckOutcome {
    let mut out = CheckOutcome::new("hota_presence_oracle");
    for layout in PRESENCE_LAYOUTS {
        for f in 1..=max_frames {
            for (gt, pred) in enumerate_presence_multisets(f, layout) {
                compare_hota(&mut out, &gt, &pred);
            }
        }
    }
    out
}

/// The suites run by the `selfcheck` command.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        check_assignment(2000, 7, 1),
        check_rle_round_trip(500, 2),
        check_hota(2, 2000, 3),
        check_hota_presence(4),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_small() {
        assert!(check_assignment(200, 6, 10).passed());
        assert!(check_rle_round_trip(50, 11).passed());
        let h = check_hota(1, 300, 12);
        assert!(h.passed(), "{:?}", h.first_failure);
        assert_eq!(h.cases, 256 + 300);
    }
}
