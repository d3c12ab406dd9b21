//! Online multi-object tracking on instance segmentation masks.
//!
//! Each live track's mask is carried into the next frame by interpolated
//! optical flow, compared with the new detections by pixel overlap and
//! matched with the Hungarian method. Unmatched tracks coast on their
//! prediction for a bounded number of frames.

pub mod association;
pub mod error;
pub mod flowops;
pub mod io;
pub mod metrics;
pub mod par;
pub mod synth;
pub mod tracker;
pub mod types;

pub use association::{affinity, solve_assignment, AffinityMatrix, Matching};
pub use error::{Error, Result};
pub use flowops::{dense_predict, GrayImage, PredictedMask};
pub use par::Execution;
pub use tracker::{run, FrameInput, FrameOutput, Track, TrackerConfig, TrackerState};
pub use types::{bbox_of, mask_from_positions, BBox, FlowField, GridDims, InstanceMask, PixelPos, PixelSet};
