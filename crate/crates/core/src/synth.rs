//! Deterministic synthetic videos: paired ground truth and detector streams.
//!
//! Objects move on sinusoidal paths. Each visible object occupies one query
//! slot, with slots shuffled every frame the way a set-prediction detector
//! reorders its queries. The embedding of object `k` is a fixed random unit
//! direction, rotated each frame by a Gaussian angle of std `embedding_drift`
//! in a random plane, so the cosine to the anchor is `cos θ` with
//! `E[cos θ] = exp(-σ²/2)`. Occluded objects and unused slots emit empty
//! slots: random embeddings and near-zero class probabilities.
//!
//! Randomness comes from ChaCha8 seeded with the config seed: stream 0 drives
//! slot order and empty slots, stream `k + 1` drives object `k`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::mask::{rle_encode, Bitmap, RleMask};
use crate::stream::{
    ClassDistribution, FramePrediction, GroundTruth, GroundTruthFrame, GroundTruthHeader, GroundTruthObject,
    QuerySlot, StreamHeader, VideoStream, FORMAT_VERSION,
};

pub const PRNG_NAME: &str = "chacha8";

/// Path of one object: `center(t) = anchor + (rx·sin(ωt + φ), ry·cos(ωt + φ))`
/// with the anchor and radii given as fractions of the frame size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub class: usize,
    pub anchor: [f64; 2],
    #[serde(default)]
    pub radius: [f64; 2],
    /// Angular step ω per frame, radians.
    #[serde(default)]
    pub omega: f64,
    /// Phase φ; drawn uniformly from the object's stream when absent.
    #[serde(default)]
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcclusionWindow {
    pub track: usize,
    pub start: u64,
    pub length: u64,
}

impl OcclusionWindow {
    pub fn covers(&self, track: usize, frame: u64) -> bool {
        self.track == track && frame >= self.start && frame < self.start + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_frames: u64,
    pub n_queries: usize,
    pub embed_dim: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub classes: Vec<String>,
    pub objects: Vec<ObjectSpec>,
    /// Box side in pixels.
    pub box_size: f64,
    /// Std of the per-frame embedding rotation angle, radians.
    pub embedding_drift: f64,
    /// Std of predicted box corner noise, pixels.
    pub box_jitter: f64,
    #[serde(default)]
    pub occlusions: Vec<OcclusionWindow>,
    /// Emit elliptical masks in both ground truth and predictions.
    #[serde(default)]
    pub masks: bool,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
}

impl SynthConfig {
    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_objects() > self.n_queries {
            return Err(Error::Capacity(format!(
                "{} objects do not fit in {} query slots",
                self.n_objects(),
                self.n_queries
            )));
        }
        if self.embed_dim < 2 {
            return Err(Error::Input("embed_dim must be at least 2".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Input("at least one class is required".into()));
        }
        if self.frame_height == 0 || self.frame_width == 0 {
            return Err(Error::Dimension("frame size must be positive".into()));
        }
        let side_ok = self.box_size > 0.0 && self.box_size <= self.frame_height.min(self.frame_width) as f64;
        if !side_ok {
            return Err(Error::Input(format!("box_size {} does not fit the frame", self.box_size)));
        }
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.embedding_drift) || !finite_nonneg(self.box_jitter) {
            return Err(Error::Input("embedding_drift and box_jitter must be finite and non-negative".into()));
        }
        for (k, o) in self.objects.iter().enumerate() {
            if o.class >= self.classes.len() {
                return Err(Error::Input(format!("object {k} has class {} of {}", o.class, self.classes.len())));
            }
            let nums = [o.anchor[0], o.anchor[1], o.radius[0], o.radius[1], o.omega, o.phase.unwrap_or(0.0)];
            if nums.iter().any(|x| !x.is_finite()) {
                return Err(Error::Input(format!("object {k} has a non-finite path parameter")));
            }
        }
        for w in &self.occlusions {
            if w.track >= self.n_objects() || w.length == 0 || w.start + w.length > self.n_frames {
                return Err(Error::Input(format!("occlusion window {w:?} is outside the video")));
            }
        }
        Ok(())
    }

    pub fn occluded(&self, track: usize, frame: u64) -> bool {
        self.occlusions.iter().any(|w| w.covers(track, frame))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthScenario {
    Static,
    Occlusion,
    LargeMotion,
    Swap,
    Drift,
}

impl SynthScenario {
    pub const ALL: [SynthScenario; 5] = [
        SynthScenario::Static,
        SynthScenario::Occlusion,
        SynthScenario::LargeMotion,
        SynthScenario::Swap,
        SynthScenario::Drift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SynthScenario::Static => "static",
            SynthScenario::Occlusion => "occlusion",
            SynthScenario::LargeMotion => "large_motion",
            SynthScenario::Swap => "swap",
            SynthScenario::Drift => "drift",
        }
    }

    pub fn config(self, seed: u64) -> SynthConfig {
        let obj = |class, anchor, radius, omega, phase| ObjectSpec { class, anchor, radius, omega, phase };
        let mut cfg = SynthConfig {
            n_frames: 60,
            n_queries: 10,
            embed_dim: 32,
            frame_height: 256,
            frame_width: 320,
            classes: vec!["AD".into(), "HP".into()],
            objects: vec![],
            box_size: 24.0,
            embedding_drift: 0.05,
            box_jitter: 0.5,
            occlusions: vec![],
            masks: false,
            seed,
            video_id: Some(format!("{}-{seed}", self.name())),
        };
        match self {
            SynthScenario::Static => {
                cfg.embedding_drift = 0.0;
                cfg.box_jitter = 0.0;
                cfg.objects = vec![
                    obj(0, [0.25, 0.3], [0.0, 0.0], 0.0, Some(0.0)),
                    obj(1, [0.5, 0.7], [0.0, 0.0], 0.0, Some(0.0)),
                    obj(0, [0.75, 0.3], [0.0, 0.0], 0.0, Some(0.0)),
                ];
            }
            SynthScenario::Occlusion => {
                // 8 px per step; five steps across a gap move the box well past its own size
                cfg.objects = vec![
                    obj(0, [0.25, 0.35], [0.12, 0.15], 0.21, None),
                    obj(1, [0.5, 0.65], [0.12, 0.15], 0.21, None),
                    obj(0, [0.75, 0.35], [0.12, 0.15], 0.21, None),
                ];
                cfg.occlusions = [(0, 12), (0, 36), (1, 20), (1, 44), (2, 28), (2, 52)]
                    .into_iter()
                    .map(|(track, start)| OcclusionWindow { track, start, length: 4 })
                    .collect();
                cfg.masks = true;
            }
            SynthScenario::LargeMotion => {
                // a 90 px circle at 0.6 rad per step: every step moves ≥ 37 px along some axis
                cfg.objects = vec![
                    obj(0, [0.5, 0.5], [0.28, 0.35], 0.6, None),
                    obj(1, [0.1, 0.12], [0.0, 0.0], 0.0, Some(0.0)),
                ];
            }
            SynthScenario::Swap => {
                cfg.objects = vec![
                    obj(0, [0.5, 0.5], [0.3, 0.0], 0.1, Some(0.0)),
                    obj(1, [0.5, 0.54], [0.3, 0.0], 0.1, Some(PI)),
                ];
            }
            SynthScenario::Drift => {
                cfg.embedding_drift = 0.15;
                cfg.objects = vec![
                    obj(0, [0.25, 0.5], [0.05, 0.05], 0.1, None),
                    obj(1, [0.5, 0.5], [0.05, 0.05], 0.1, None),
                    obj(1, [0.75, 0.5], [0.05, 0.05], 0.1, None),
                ];
            }
        }
        cfg
    }
}

impl fmt::Display for SynthScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthScenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown scenario {s:?}")))
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Rotates unit `u` by `theta` inside the plane spanned by `u` and a random
/// direction orthogonal to it.
fn rotate_in_random_plane(rng: &mut ChaCha8Rng, u: &[f64], theta: f64) -> Vec<f64> {
    let w = loop {
        let g: Vec<f64> = (0..u.len()).map(|_| normal(rng)).collect();
        let dot: f64 = g.iter().zip(u).map(|(a, b)| a * b).sum();
        let w: Vec<f64> = g.iter().zip(u).map(|(a, b)| a - dot * b).collect();
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            break w.into_iter().map(|x| x / n).collect::<Vec<f64>>();
        }
    };
    let (s, c) = theta.sin_cos();
    u.iter().zip(&w).map(|(a, b)| c * a + s * b).collect()
}

fn ellipse_mask(b: &BBox, height: usize, width: usize) -> Result<RleMask> {
    let mut bm = Bitmap::zeros(height, width);
    let (cx, cy) = b.center();
    let (ax, ay) = (b.width() / 2.0, b.height() / 2.0);
    let rows = (b.y1.floor().max(0.0) as usize)..(b.y2.ceil().min(height as f64) as usize);
    let cols = (b.x1.floor().max(0.0) as usize)..(b.x2.ceil().min(width as f64) as usize);
    for r in rows {
        for c in cols.clone() {
            let dx = (c as f64 + 0.5 - cx) / ax;
            let dy = (r as f64 + 0.5 - cy) / ay;
            if dx * dx + dy * dy <= 1.0 {
                bm.set(r, c, true);
            }
        }
    }
    rle_encode(&bm)
}

struct ObjectState {
    rng: ChaCha8Rng,
    direction: Vec<f64>,
    phase: f64,
}

impl SynthConfig {
    fn center(&self, obj: &ObjectSpec, phase: f64, t: u64) -> (f64, f64) {
        let (w, h) = (self.frame_width as f64, self.frame_height as f64);
        let a = obj.omega * t as f64 + phase;
        let half = self.box_size / 2.0;
        let cx = obj.anchor[0] * w + obj.radius[0] * w * a.sin();
        let cy = obj.anchor[1] * h + obj.radius[1] * h * a.cos();
        (cx.clamp(half, w - half), cy.clamp(half, h - half))
    }

    fn jittered(&self, rng: &mut ChaCha8Rng, b: &BBox) -> BBox {
        let (w, h) = (self.frame_width as f64, self.frame_height as f64);
        let mut j = |v: f64, hi: f64| (v + self.box_jitter * normal(rng)).clamp(0.0, hi);
        let (x1, y1, x2, y2) = (j(b.x1, w), j(b.y1, h), j(b.x2, w), j(b.y2, h));
        let fix = |lo: f64, hi: f64, max: f64| if hi - lo >= 1.0 { (lo, hi) } else { (lo.min(max - 1.0), lo.min(max - 1.0) + 1.0) };
        let (x1, x2) = fix(x1, x2, w);
        let (y1, y2) = fix(y1, y2, h);
        BBox::new(x1, y1, x2, y2)
    }

    fn empty_slot(&self, rng: &mut ChaCha8Rng) -> QuerySlot {
        let (w, h) = (self.frame_width as f64, self.frame_height as f64);
        let half = self.box_size / 2.0;
        let cx = rng.random_range(half..=w - half);
        let cy = rng.random_range(half..=h - half);
        QuerySlot {
            embedding: random_unit(rng, self.embed_dim),
            bbox: BBox::from_center(cx, cy, self.box_size, self.box_size),
            probs: ClassDistribution::new((0..self.classes.len()).map(|_| rng.random_range(0.001..0.01)).collect()),
            mask: None,
        }
    }

    fn object_probs(&self, rng: &mut ChaCha8Rng, class: usize) -> ClassDistribution {
        let c = self.classes.len();
        let others = (c - 1) as f64;
        let main = rng.random_range(0.75..0.95);
        let probs = (0..c)
            .map(|k| if k == class { main } else { rng.random_range(0.0..(1.0 - main) / (others + 1.0)) })
            .collect();
        ClassDistribution::new(probs)
    }
}

/// Ground truth and detector stream for `cfg`; deterministic in the config.
pub fn generate(cfg: &SynthConfig) -> Result<(GroundTruth, VideoStream)> {
    cfg.validate()?;
    let provenance = serde_json::json!({ "name": "qtrack-synth", "prng": PRNG_NAME, "config": cfg });
    let mut frame_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    frame_rng.set_stream(0);
    let mut objects: Vec<ObjectState> = cfg
        .objects
        .iter()
        .enumerate()
        .map(|(k, obj)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64 + 1);
            let direction = random_unit(&mut rng, cfg.embed_dim);
            let drawn = rng.random_range(0.0..2.0 * PI);
            ObjectState { rng, direction, phase: obj.phase.unwrap_or(drawn) }
        })
        .collect();

    let mut gt_frames = Vec::with_capacity(cfg.n_frames as usize);
    let mut frames = Vec::with_capacity(cfg.n_frames as usize);
    for t in 0..cfg.n_frames {
        let mut gt_objects = Vec::new();
        let mut live_slots = Vec::new();
        for (k, (obj, st)) in cfg.objects.iter().zip(&mut objects).enumerate() {
            // draw every frame so an object's stream does not depend on occlusions
            let theta = cfg.embedding_drift * normal(&mut st.rng);
            let embedding = rotate_in_random_plane(&mut st.rng, &st.direction, theta);
            let (cx, cy) = cfg.center(obj, st.phase, t);
            let gt_box = BBox::from_center(cx, cy, cfg.box_size, cfg.box_size);
            let pred_box = cfg.jittered(&mut st.rng, &gt_box);
            let probs = cfg.object_probs(&mut st.rng, obj.class);
            if cfg.occluded(k, t) {
                continue;
            }
            let (gt_mask, pred_mask) = if cfg.masks {
                (
                    Some(ellipse_mask(&gt_box, cfg.frame_height, cfg.frame_width)?),
                    Some(ellipse_mask(&pred_box, cfg.frame_height, cfg.frame_width)?),
                )
            } else {
                (None, None)
            };
            gt_objects.push(GroundTruthObject {
                gt_track_id: k as i64 + 1,
                bbox: gt_box,
                mask: gt_mask,
                class_label: cfg.classes[obj.class].clone(),
            });
            live_slots.push(QuerySlot { embedding, bbox: pred_box, probs, mask: pred_mask });
        }
        let mut slots: Vec<QuerySlot> = live_slots;
        while slots.len() < cfg.n_queries {
            slots.push(cfg.empty_slot(&mut frame_rng));
        }
        slots.shuffle(&mut frame_rng);
        gt_frames.push(GroundTruthFrame { frame_index: t, objects: gt_objects });
        frames.push(FramePrediction { frame_index: t, slots });
    }

    let gt = GroundTruth {
        header: GroundTruthHeader {
            version: FORMAT_VERSION,
            frame_height: cfg.frame_height,
            frame_width: cfg.frame_width,
            classes: cfg.classes.clone(),
            video_id: cfg.video_id.clone(),
            generator: Some(provenance.clone()),
        },
        frames: gt_frames,
    };
    let stream = VideoStream {
        header: StreamHeader {
            version: FORMAT_VERSION,
            n_queries: cfg.n_queries,
            embed_dim: cfg.embed_dim,
            frame_height: cfg.frame_height,
            frame_width: cfg.frame_width,
            classes: cfg.classes.clone(),
            video_id: cfg.video_id.clone(),
            generator: Some(provenance),
        },
        frames,
    };
    Ok((gt, stream))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub scenario: SynthScenario,
    pub gt: GroundTruth,
    pub stream: VideoStream,
}

/// The five fixed scenarios, generated with `seed`.
pub fn scenario_suite(seed: u64) -> Vec<ScenarioOutput> {
    SynthScenario::ALL
        .into_iter()
        .map(|scenario| {
            let (gt, stream) = generate(&scenario.config(seed)).expect("built-in scenarios are valid");
            ScenarioOutput { scenario, gt, stream }
        })
        .collect()
}
