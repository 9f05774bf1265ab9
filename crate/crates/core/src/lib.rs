//! Query-space multi-object tracking toolkit.
//!
//! Works on serialized per-frame detector outputs: every frame carries a fixed
//! number of query slots, each with an embedding, a box, class probabilities
//! and optionally a mask. The crate provides
//!
//! - the stream data model and its JSON Lines format ([`stream`], [`mask`], [`geometry`]),
//! - an exact rectangular assignment solver ([`assignment`]),
//! - set-prediction losses with mask supervision conditional on annotation ([`losses`]),
//! - the embedding-based tracker and an IoU baseline ([`tracker`]),
//! - detection, segmentation and tracking metrics ([`metrics`]),
//! - per-video exam reports ([`report`]) and a synthetic stream generator ([`synth`]).

pub mod assignment;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod selfcheck;
pub mod stream;
pub mod synth;
pub mod tracker;

pub use assignment::{Assignment, CostMatrix};
pub use error::{Error, Result};
pub use geometry::BBox;
pub use mask::RleMask;
pub use stream::{FramePrediction, GroundTruth, GroundTruthFrame, QuerySlot, VideoStream};
pub use tracker::{TrackerConfig, TrackingOutput};
