//! Detection streams and ground truth: the data model and its JSON Lines form.
//!
//! A file is a header object on the first line followed by one frame per
//! line. Prediction frames carry exactly `n_queries` query slots; ground-truth
//! frames carry the annotated objects.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::mask::RleMask;

pub const FORMAT_VERSION: u32 = 1;

/// Foreground class probabilities. The no-object mass is whatever is left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ClassDistribution {
    pub probs: Vec<f64>,
}

impl ClassDistribution {
    pub fn new(probs: Vec<f64>) -> Self {
        ClassDistribution { probs }
    }

    pub fn no_object(&self) -> f64 {
        (1.0 - self.probs.iter().sum::<f64>()).max(0.0)
    }

    /// Highest-probability foreground class; the lowest index wins ties.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        self.probs.iter().copied().enumerate().fold(None, |best, (i, p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((i, p)),
        })
    }

    pub fn max_prob(&self) -> f64 {
        self.argmax().map_or(0.0, |(_, p)| p)
    }

    /// A slot is empty (∅) when no foreground class reaches `tau`.
    pub fn is_empty_under(&self, tau: f64) -> bool {
        self.max_prob() < tau
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySlot {
    pub embedding: Vec<f64>,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub probs: ClassDistribution,
    #[serde(default)]
    pub mask: Option<RleMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePrediction {
    pub frame_index: u64,
    pub slots: Vec<QuerySlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub version: u32,
    pub n_queries: usize,
    pub embed_dim: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    /// Free-form provenance, e.g. the synthetic generator and its config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoStream {
    pub header: StreamHeader,
    pub frames: Vec<FramePrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub gt_track_id: i64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(default)]
    pub mask: Option<RleMask>,
    #[serde(rename = "class")]
    pub class_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub frame_index: u64,
    pub objects: Vec<GroundTruthObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthHeader {
    pub version: u32,
    pub frame_height: usize,
    pub frame_width: usize,
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub header: GroundTruthHeader,
    pub frames: Vec<GroundTruthFrame>,
}

impl GroundTruth {
    pub fn class_index(&self, label: &str) -> Result<usize> {
        self.header
            .classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownClass(label.to_string()))
    }
}

fn read_envelope<H: DeserializeOwned, F: DeserializeOwned>(
    reader: impl BufRead,
) -> Result<(H, Vec<F>)> {
    let mut header = None;
    let mut frames = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| Error::Stream { line: i + 1, message: e.to_string() };
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(parse_err)?);
        } else {
            frames.push(serde_json::from_str(&line).map_err(parse_err)?);
        }
    }
    let header = header.ok_or(Error::Stream { line: 1, message: "missing header line".into() })?;
    Ok((header, frames))
}

fn write_envelope<H: Serialize, F: Serialize>(
    mut writer: impl Write,
    header: &H,
    frames: &[F],
) -> Result<()> {
    serde_json::to_writer(&mut writer, header)?;
    writer.write_all(b"\n")?;
    for f in frames {
        serde_json::to_writer(&mut writer, f)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

macro_rules! jsonl_file {
    ($ty:ident, $header:ty, $frame:ty) => {
        impl $ty {
            pub fn read(reader: impl BufRead) -> Result<Self> {
                let (header, frames) = read_envelope::<$header, $frame>(reader)?;
                Ok($ty { header, frames })
            }

            pub fn write(&self, writer: impl Write) -> Result<()> {
                write_envelope(writer, &self.header, &self.frames)
            }

            pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
                Self::read(BufReader::new(File::open(path)?))
            }

            pub fn to_path(&self, path: impl AsRef<Path>) -> Result<()> {
                self.write(BufWriter::new(File::create(path)?))
            }

            pub fn to_jsonl_string(&self) -> String {
                let mut buf = Vec::new();
                self.write(&mut buf).expect("in-memory write");
                String::from_utf8(buf).expect("json is utf-8")
            }
        }
    };
}

jsonl_file!(VideoStream, StreamHeader, FramePrediction);
jsonl_file!(GroundTruth, GroundTruthHeader, GroundTruthFrame);

/// One broken invariant, located as precisely as possible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.frame_index, self.slot) {
            (Some(fr), Some(s)) => write!(f, "frame {fr}, slot {s}: {}", self.message),
            (Some(fr), None) => write!(f, "frame {fr}: {}", self.message),
            _ => write!(f, "header: {}", self.message),
        }
    }
}

fn check_mask(mask: &RleMask, h: usize, w: usize) -> Option<String> {
    if mask.height != h || mask.width != w {
        return Some(format!("mask is {}x{}, frame is {h}x{w}", mask.height, mask.width));
    }
    mask.check().map(|m| format!("mask: {m}"))
}

/// All invariant violations in a prediction stream; empty when well formed.
pub fn validate_stream(stream: &VideoStream) -> Vec<Violation> {
    let hd = &stream.header;
    let mut out = Vec::new();
    let mut push = |frame_index, slot, message: String| {
        out.push(Violation { frame_index, slot, message })
    };

    if hd.version != FORMAT_VERSION {
        push(None, None, format!("unsupported version {}", hd.version));
    }
    if hd.n_queries == 0 || hd.embed_dim == 0 {
        push(None, None, "n_queries and embed_dim must be positive".into());
    }
    if hd.frame_height == 0 || hd.frame_width == 0 {
        push(None, None, "frame dimensions must be positive".into());
    }

    let mut prev: Option<u64> = None;
    for frame in &stream.frames {
        let fi = Some(frame.frame_index);
        if let Some(p) = prev {
            if frame.frame_index <= p {
                push(fi, None, format!("frame_index not increasing (previous {p})"));
            }
        }
        prev = Some(frame.frame_index);
        if frame.slots.len() != hd.n_queries {
            push(fi, None, format!("{} slots, header declares {}", frame.slots.len(), hd.n_queries));
        }
        for (si, slot) in frame.slots.iter().enumerate() {
            let s = Some(si);
            if slot.embedding.len() != hd.embed_dim {
                push(fi, s, format!("embedding length {} != {}", slot.embedding.len(), hd.embed_dim));
            }
            if slot.embedding.iter().any(|v| !v.is_finite()) {
                push(fi, s, "non-finite embedding value".into());
            }
            if !slot.bbox.is_valid() {
                push(fi, s, format!("invalid box {:?}", <[f64; 4]>::from(slot.bbox)));
            }
            let probs = &slot.probs.probs;
            if probs.len() != hd.classes.len() {
                push(fi, s, format!("{} class probs for {} classes", probs.len(), hd.classes.len()));
            }
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                push(fi, s, "class probability outside [0,1]".into());
            }
            if probs.iter().sum::<f64>() > 1.0 + 1e-9 {
                push(fi, s, "class probabilities sum above 1".into());
            }
            if let Some(m) = &slot.mask {
                if let Some(msg) = check_mask(m, hd.frame_height, hd.frame_width) {
                    push(fi, s, msg);
                }
            }
        }
    }
    out
}

/// Invariant violations in a ground-truth file. `slot` names the object index.
pub fn validate_ground_truth(gt: &GroundTruth) -> Vec<Violation> {
    let hd = &gt.header;
    let mut out = Vec::new();
    let mut prev: Option<u64> = None;
    for frame in &gt.frames {
        let fi = Some(frame.frame_index);
        if prev.is_some_and(|p| frame.frame_index <= p) {
            out.push(Violation { frame_index: fi, slot: None, message: "frame_index not increasing".into() });
        }
        prev = Some(frame.frame_index);
        let mut ids: Vec<i64> = frame.objects.iter().map(|o| o.gt_track_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            out.push(Violation { frame_index: fi, slot: None, message: "duplicate gt_track_id".into() });
        }
        for (oi, obj) in frame.objects.iter().enumerate() {
            let mut push = |message: String| {
                out.push(Violation { frame_index: fi, slot: Some(oi), message })
            };
            if !obj.bbox.is_valid() {
                push("invalid box".into());
            }
            if !hd.classes.contains(&obj.class_label) {
                push(format!("unknown class {:?}", obj.class_label));
            }
            if let Some(m) = &obj.mask {
                if let Some(msg) = check_mask(m, hd.frame_height, hd.frame_width) {
                    push(msg);
                }
            }
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn three_frames() -> VideoStream {
        let frames = (0..3)
            .map(|t| FramePrediction {
                frame_index: t,
                slots: vec![
                    slot(vec![1.0, 0.0], BBox::new(10.0, 10.0, 20.0, 20.0), [0.9, 0.05]),
                    empty_slot(vec![0.0, 1.0]),
                ],
            })
            .collect();
        VideoStream { header: header(2, 2), frames }
    }

    #[test]
    fn well_formed_stream_has_no_violations() {
        assert!(validate_stream(&three_frames()).is_empty());
    }

    #[test]
    fn short_frame_is_named() {
        let mut s = three_frames();
        s.frames[1].slots.pop();
        let v = validate_stream(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].frame_index, Some(1));
        assert_eq!(v[0].slot, None);
    }

    #[test]
    fn embedding_length_names_slot() {
        let mut s = three_frames();
        s.frames[2].slots[1].embedding.push(0.5);
        let v = validate_stream(&s);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].frame_index, v[0].slot), (Some(2), Some(1)));
    }

    #[test]
    fn non_increasing_frames_flagged() {
        let mut s = three_frames();
        s.frames[2].frame_index = 1;
        assert_eq!(validate_stream(&s).len(), 1);
    }

    #[test]
    fn jsonl_round_trip_preserves_floats() {
        let mut s = three_frames();
        s.frames[0].slots[0].embedding = vec![0.1 + 0.2, std::f64::consts::PI];
        s.frames[0].slots[0].mask = Some(RleMask { height: 100, width: 100, runs: vec![5, 10, 9985] });
        let text = s.to_jsonl_string();
        assert!(text.lines().next().unwrap().contains("\"n_queries\":2"));
        assert!(text.contains("\"mask\":null"));
        let back = VideoStream::read(text.as_bytes()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn parse_error_reports_line() {
        let text = format!("{}\n{{\"frame_index\": 0}}\n", serde_json::to_string(&header(1, 1)).unwrap());
        match VideoStream::read(text.as_bytes()) {
            Err(Error::Stream { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ground_truth_reads_wire_format() {
        let text = r#"{"version":1,"frame_height":4,"frame_width":4,"classes":["polyp"]}
{"frame_index":0,"objects":[{"gt_track_id":3,"box":[0,0,2,2],"mask":null,"class":"polyp"}]}
"#;
        let gt = GroundTruth::read(text.as_bytes()).unwrap();
        assert_eq!(gt.frames[0].objects[0].gt_track_id, 3);
        assert!(validate_ground_truth(&gt).is_empty());
        assert!(gt.class_index("AD").is_err());
    }

    #[test]
    fn distribution_helpers() {
        let d = ClassDistribution::new(vec![0.2, 0.55]);
        assert_eq!(d.argmax(), Some((1, 0.55)));
        assert!((d.no_object() - 0.25).abs() < 1e-12);
        assert!(!d.is_empty_under(0.5));
        assert!(d.is_empty_under(0.6));
    }
}
