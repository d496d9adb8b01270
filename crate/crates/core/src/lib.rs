//! Multi-camera player tracking from per-player thumbnails: tracklet
//! building, cross-camera stitching and jersey-number fusion with
//! Dempster-Shafer evidence.

pub mod assignment;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod quant;
pub mod sim;
pub mod stitch;
pub mod streams;
pub mod tracklets;

pub use assignment::{solve_assignment, Assignment};
pub use fusion::{FusionParams, MassFunction, NumberSet, NumberVerdict};
pub use io::PipelineParams;
pub use model::{GlobalTrack, Scenario, Thumbnail, Tracklet};
pub use stitch::StitchParams;
pub use streams::ThumbnailStreams;
pub use tracklets::TrackerParams;
