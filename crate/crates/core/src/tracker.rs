//! Frame-to-frame association of query slots into tracks.
//!
//! Every live track contributes one matching row holding its last observed
//! embedding. A track whose row is matched to an empty slot (or left
//! unmatched) keeps that embedding and is carried into the next frame; it is
//! retired once its empty streak exceeds the death patience. Non-empty slots
//! that no live track claims start new tracks, in slot order.
//!
//! The IoU baseline uses the same scaffold but associates on box (or mask)
//! overlap with the track's last detection.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::assignment::{self, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{box_iou, BBox};
use crate::mask::{mask_iou, RleMask};
use crate::stream::{FramePrediction, QuerySlot, VideoStream};

pub type TrackId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// A slot is empty when its best foreground probability is below this.
    pub empty_threshold: f64,
    /// Consecutive empty frames a track survives.
    pub death_patience: u32,
    pub carry_forward: bool,
    /// Matches with cosine similarity below this are rejected.
    pub similarity_floor: Option<f64>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            empty_threshold: 0.5,
            death_patience: 5,
            carry_forward: true,
            similarity_floor: None,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.empty_threshold > 0.0 && self.empty_threshold < 1.0) {
            return Err(Error::Input(format!(
                "empty_threshold {} outside (0, 1)",
                self.empty_threshold
            )));
        }
        if self.death_patience == 0 {
            return Err(Error::Input("death_patience must be at least 1".into()));
        }
        Ok(())
    }
}

pub const DEFAULT_IOU_FLOOR: f64 = 0.1;

/// `a·b / (|a||b|)`; 0 when either vector is (numerically) zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("vector lengths {} and {}", a.len(), b.len())));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Negated cosine similarity, rows `prev`, columns `curr`.
pub fn build_cost_matrix(prev: &[&[f64]], curr: &[&[f64]]) -> Result<CostMatrix> {
    let mut values = Vec::with_capacity(prev.len() * curr.len());
    for p in prev {
        for c in curr {
            values.push(-cosine_similarity(p, c)?);
        }
    }
    CostMatrix::new(prev.len(), curr.len(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub frame_index: u64,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub track_id: TrackId,
    pub last_embedding: Vec<f64>,
    pub last_box: BBox,
    pub last_mask: Option<RleMask>,
    pub empty_streak: u32,
    pub observations: Vec<Observation>,
    /// Running sum of the observed class distributions.
    pub class_sum: Vec<f64>,
}

impl TrackRecord {
    fn born(track_id: TrackId, frame_index: u64, slot_index: usize, slot: &QuerySlot) -> Self {
        TrackRecord {
            track_id,
            last_embedding: slot.embedding.clone(),
            last_box: slot.bbox,
            last_mask: slot.mask.clone(),
            empty_streak: 0,
            observations: vec![Observation { frame_index, slot: slot_index }],
            class_sum: slot.probs.probs.clone(),
        }
    }

    fn observe(&mut self, frame_index: u64, slot_index: usize, slot: &QuerySlot) {
        self.last_embedding.clone_from(&slot.embedding);
        self.last_box = slot.bbox;
        self.last_mask.clone_from(&slot.mask);
        self.empty_streak = 0;
        self.observations.push(Observation { frame_index, slot: slot_index });
        for (acc, p) in self.class_sum.iter_mut().zip(&slot.probs.probs) {
            *acc += p;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackState {
    /// Ordered by track id.
    pub live: Vec<TrackRecord>,
    pub retired: Vec<TrackRecord>,
    pub next_id: TrackId,
    pub last_frame: Option<u64>,
    pub embed_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub slot: usize,
    pub track_id: TrackId,
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<RleMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAssignments {
    pub frame_index: u64,
    /// Sorted by slot.
    pub assignments: Vec<SlotAssignment>,
}

impl FrameAssignments {
    pub fn track_for_slot(&self, slot: usize) -> Option<TrackId> {
        self.assignments.iter().find(|a| a.slot == slot).map(|a| a.track_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub track_id: TrackId,
    pub observations: Vec<Observation>,
    pub mean_probs: Vec<f64>,
}

impl TrackSummary {
    fn from_record(r: &TrackRecord) -> Self {
        let n = r.observations.len().max(1) as f64;
        TrackSummary {
            track_id: r.track_id,
            observations: r.observations.clone(),
            mean_probs: r.class_sum.iter().map(|s| s / n).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingOutput {
    pub frames: Vec<FrameAssignments>,
    /// Sorted by track id.
    pub tracks: Vec<TrackSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Association {
    Query { similarity_floor: Option<f64> },
    Overlap { iou_floor: f64 },
}

fn overlap(track: &TrackRecord, slot: &QuerySlot) -> Result<f64> {
    match (&track.last_mask, &slot.mask) {
        (Some(a), Some(b)) => mask_iou(a, b),
        _ => Ok(box_iou(&track.last_box, &slot.bbox)),
    }
}

impl TrackState {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_frame(&self, frame: &FramePrediction) -> Result<usize> {
        if let Some(last) = self.last_frame {
            if frame.frame_index <= last {
                return Err(Error::Input(format!(
                    "frame_index {} does not follow {last}",
                    frame.frame_index
                )));
            }
        }
        let dim = self.embed_dim.or(frame.slots.first().map(|s| s.embedding.len())).unwrap_or(0);
        for (i, s) in frame.slots.iter().enumerate() {
            if s.embedding.len() != dim {
                return Err(Error::Input(format!(
                    "frame {}: slot {i} embedding length {} != {dim}",
                    frame.frame_index,
                    s.embedding.len()
                )));
            }
            if s.embedding.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("frame {}: slot {i} embedding not finite", frame.frame_index)));
            }
        }
        Ok(dim)
    }

    fn advance(
        &mut self,
        frame: &FramePrediction,
        cfg: &TrackerConfig,
        mode: Association,
    ) -> Result<FrameAssignments> {
        cfg.validate()?;
        let dim = self.check_frame(frame)?;
        let tau = cfg.empty_threshold;
        let non_empty: Vec<bool> = frame.slots.iter().map(|s| !s.probs.is_empty_under(tau)).collect();

        // track index -> accepted slot
        let mut matched: Vec<Option<usize>> = vec![None; self.live.len()];
        if !self.live.is_empty() {
            match mode {
                Association::Query { similarity_floor } => {
                    let rows: Vec<&[f64]> = self.live.iter().map(|t| t.last_embedding.as_slice()).collect();
                    let cols: Vec<&[f64]> = frame.slots.iter().map(|s| s.embedding.as_slice()).collect();
                    if !cols.is_empty() {
                        let cost = build_cost_matrix(&rows, &cols)?;
                        for (r, c) in assignment::solve(&cost).pairs {
                            let sim = -cost.get(r, c);
                            if non_empty[c] && similarity_floor.is_none_or(|f| sim >= f) {
                                matched[r] = Some(c);
                            }
                        }
                    }
                }
                Association::Overlap { iou_floor } => {
                    let cols: Vec<usize> = (0..frame.slots.len()).filter(|&i| non_empty[i]).collect();
                    if !cols.is_empty() {
                        let mut values = Vec::with_capacity(self.live.len() * cols.len());
                        for t in &self.live {
                            for &c in &cols {
                                values.push(-overlap(t, &frame.slots[c])?);
                            }
                        }
                        let cost = CostMatrix::new(self.live.len(), cols.len(), values)?;
                        for (r, ci) in assignment::solve(&cost).pairs {
                            if -cost.get(r, ci) >= iou_floor {
                                matched[r] = Some(cols[ci]);
                            }
                        }
                    }
                }
            }
        }

        // Everything fallible is done; mutate from here on.
        let fi = frame.frame_index;
        let mut owner: Vec<Option<TrackId>> = vec![None; frame.slots.len()];
        let mut survivors = Vec::with_capacity(self.live.len());
        for (mut track, m) in std::mem::take(&mut self.live).into_iter().zip(matched) {
            match m {
                Some(c) => {
                    track.observe(fi, c, &frame.slots[c]);
                    owner[c] = Some(track.track_id);
                    survivors.push(track);
                }
                None => {
                    track.empty_streak += 1;
                    if !cfg.carry_forward || track.empty_streak > cfg.death_patience {
                        self.retired.push(track);
                    } else {
                        survivors.push(track);
                    }
                }
            }
        }
        for (c, slot) in frame.slots.iter().enumerate() {
            if non_empty[c] && owner[c].is_none() {
                let id = self.next_id;
                self.next_id += 1;
                owner[c] = Some(id);
                survivors.push(TrackRecord::born(id, fi, c, slot));
            }
        }
        self.live = survivors;
        self.last_frame = Some(fi);
        self.embed_dim = Some(dim);

        let assignments = owner
            .iter()
            .enumerate()
            .filter_map(|(c, id)| {
                id.map(|track_id| SlotAssignment {
                    slot: c,
                    track_id,
                    bbox: frame.slots[c].bbox,
                    mask: frame.slots[c].mask.clone(),
                })
            })
            .collect();
        Ok(FrameAssignments { frame_index: fi, assignments })
    }

    /// Summaries of every track seen so far, live and retired.
    pub fn summaries(&self) -> Vec<TrackSummary> {
        let mut all: Vec<_> = self.live.iter().chain(&self.retired).map(TrackSummary::from_record).collect();
        all.sort_by_key(|t| t.track_id);
        all
    }
}

/// One query-space association step. On error the input state is untouched.
pub fn step(
    state: &TrackState,
    frame: &FramePrediction,
    cfg: &TrackerConfig,
) -> Result<(TrackState, FrameAssignments)> {
    let mut next = state.clone();
    let out = next.advance(frame, cfg, Association::Query { similarity_floor: cfg.similarity_floor })?;
    Ok((next, out))
}

/// Stateful query-space tracker for one video.
#[derive(Debug, Clone)]
pub struct QueryTracker {
    cfg: TrackerConfig,
    state: TrackState,
}

impl QueryTracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(QueryTracker { cfg, state: TrackState::new() })
    }

    pub fn update(&mut self, frame: &FramePrediction) -> Result<FrameAssignments> {
        let mode = Association::Query { similarity_floor: self.cfg.similarity_floor };
        let mut next = self.state.clone();
        let out = next.advance(frame, &self.cfg, mode)?;
        self.state = next;
        Ok(out)
    }

    pub fn state(&self) -> &TrackState {
        &self.state
    }
}

fn run(stream: &VideoStream, cfg: &TrackerConfig, mode: Association) -> Result<TrackingOutput> {
    cfg.validate()?;
    let mut state = TrackState::new();
    state.embed_dim = Some(stream.header.embed_dim);
    let frames = stream
        .frames
        .iter()
        .map(|f| state.advance(f, cfg, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrackingOutput { frames, tracks: state.summaries() })
}

pub fn track_video(stream: &VideoStream, cfg: &TrackerConfig) -> Result<TrackingOutput> {
    run(stream, cfg, Association::Query { similarity_floor: cfg.similarity_floor })
}

/// Overlap-based tracking: costs are negated box IoU (mask IoU when both the
/// track's last detection and the candidate carry masks), matches below
/// `iou_floor` are rejected. Empty slots are never candidates.
pub fn iou_baseline_track(stream: &VideoStream, cfg: &TrackerConfig, iou_floor: f64) -> Result<TrackingOutput> {
    run(stream, cfg, Association::Overlap { iou_floor })
}

#[derive(Serialize, Deserialize)]
struct TrackTableLine {
    tracks: Vec<TrackSummary>,
    #[serde(default)]
    config: serde_json::Value,
}

impl TrackingOutput {
    /// One line per frame, then a trailing track-table line carrying `config`.
    pub fn write_jsonl(&self, mut w: impl Write, config: &serde_json::Value) -> Result<()> {
        for f in &self.frames {
            serde_json::to_writer(&mut w, f)?;
            w.write_all(b"\n")?;
        }
        let table = TrackTableLine { tracks: self.tracks.clone(), config: config.clone() };
        serde_json::to_writer(&mut w, &table)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Reads what [`write_jsonl`](Self::write_jsonl) wrote; returns the config echo too.
    pub fn read_jsonl(r: impl BufRead) -> Result<(Self, serde_json::Value)> {
        let mut out = TrackingOutput::default();
        let mut config = serde_json::Value::Null;
        let mut saw_table = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |e: serde_json::Error| Error::Stream { line: i + 1, message: e.to_string() };
            let v: serde_json::Value = serde_json::from_str(&line).map_err(err)?;
            if v.get("tracks").is_some() {
                let t: TrackTableLine = serde_json::from_value(v).map_err(err)?;
                out.tracks = t.tracks;
                config = t.config;
                saw_table = true;
            } else {
                out.frames.push(serde_json::from_value(v).map_err(err)?);
            }
        }
        if !saw_table {
            return Err(Error::Stream { line: 0, message: "missing trailing track table".into() });
        }
        Ok((out, config))
    }
}
