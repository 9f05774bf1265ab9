//! Per-video exam report: one row per tracked polyp.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{ClassDistribution, FramePrediction, VideoStream};
use crate::tracker::TrackingOutput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolypReportEntry {
    pub polyp_id: u64,
    pub polyp_type: String,
    pub confidence: f64,
    pub frame_count: usize,
    pub first_frame: u64,
    pub last_frame: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamReport {
    pub video_id: String,
    /// Sorted by first frame, then id.
    pub entries: Vec<PolypReportEntry>,
    /// Settings that produced the report; filled in by the caller.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// One entry per track seen in at least `min_frames` frames. The type is the
/// argmax of the track's mean class distribution and the confidence is that
/// mean's maximum; the distributions are read back from `stream`.
pub fn generate_report(tracking: &TrackingOutput, stream: &VideoStream, min_frames: usize) -> Result<ExamReport> {
    let frames: HashMap<u64, &FramePrediction> = stream.frames.iter().map(|f| (f.frame_index, f)).collect();
    let classes = &stream.header.classes;
    let mut entries = Vec::new();
    for track in &tracking.tracks {
        let obs = &track.observations;
        if obs.is_empty() || obs.len() < min_frames {
            continue;
        }
        let mut sum = vec![0.0; classes.len()];
        for o in obs {
            let slot = frames
                .get(&o.frame_index)
                .and_then(|f| f.slots.get(o.slot))
                .ok_or_else(|| {
                    Error::Misaligned(format!(
                        "track {} observes frame {} slot {}, which the stream does not have",
                        track.track_id, o.frame_index, o.slot
                    ))
                })?;
            if slot.probs.probs.len() != sum.len() {
                return Err(Error::Misaligned(format!("frame {} has the wrong class count", o.frame_index)));
            }
            sum.iter_mut().zip(&slot.probs.probs).for_each(|(s, p)| *s += p);
        }
        let mean = ClassDistribution::new(sum.iter().map(|s| s / obs.len() as f64).collect());
        let (cls, confidence) = mean.argmax().unwrap_or((usize::MAX, 0.0));
        entries.push(PolypReportEntry {
            polyp_id: track.track_id,
            polyp_type: classes.get(cls).cloned().unwrap_or_else(|| "polyp".to_string()),
            confidence: confidence.clamp(0.0, 1.0),
            frame_count: obs.len(),
            first_frame: obs.iter().map(|o| o.frame_index).min().expect("non-empty"),
            last_frame: obs.iter().map(|o| o.frame_index).max().expect("non-empty"),
        });
    }
    entries.sort_by_key(|e| (e.first_frame, e.polyp_id));
    Ok(ExamReport {
        video_id: stream.header.video_id.clone().unwrap_or_default(),
        entries,
        config: serde_json::Value::Null,
    })
}

const TEXT_HEADER: [&str; 6] = ["ID", "Type", "Conf", "Fr.Ct.", "1st.Fr.", "Last Fr."];

pub fn render_report(report: &ExamReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string(report)? + "\n"),
        ReportFormat::Text => {
            let rows: Vec<[String; 6]> = report
                .entries
                .iter()
                .map(|e| {
                    [
                        e.polyp_id.to_string(),
                        e.polyp_type.clone(),
                        format!("{:.2}", e.confidence),
                        e.frame_count.to_string(),
                        e.first_frame.to_string(),
                        e.last_frame.to_string(),
                    ]
                })
                .collect();
            let mut widths = TEXT_HEADER.map(str::len);
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let mut out = String::new();
            let mut line = |cells: &[&str]| {
                let mut l = String::new();
                for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                    if i > 0 {
                        l.push_str("  ");
                    }
                    // the type column is text, everything else is numeric
                    if i == 1 {
                        let _ = write!(l, "{cell:<w$}");
                    } else {
                        let _ = write!(l, "{cell:>w$}");
                    }
                }
                out.push_str(l.trim_end());
                out.push('\n');
            };
            line(&TEXT_HEADER);
            for row in &rows {
                line(&row.each_ref().map(String::as_str));
            }
            Ok(out)
        }
    }
}

pub fn parse_report_json(s: &str) -> Result<ExamReport> {
    Ok(serde_json::from_str(s)?)
}
