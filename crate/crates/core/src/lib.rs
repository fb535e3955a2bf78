//! Non-contact breathing and sleep-apnea analysis from video.
//!
//! Frames are decoded to grayscale ([`frame_io`]), edge-detected
//! ([`edge_detect`]) inside a region of interest over the torso ([`roi`]).
//! The motion of the edge centroid, projected on its principal direction,
//! gives a breathing signal ([`motion`]) whose peaks yield breath intervals
//! and windowed apnea severity ([`breath`]). [`pipeline`] ties the stages
//! together, [`synth`] renders test videos with known ground truth and
//! [`eval`] scores results against it.

pub mod breath;
pub mod edge_detect;
pub mod eval;
pub mod frame_io;
pub mod motion;
pub mod pipeline;
pub mod roi;
pub mod synth;

pub use breath::{ApneaReport, BreathReport, PeakRule};
pub use edge_detect::{detect_edges, EdgeMap, HysteresisMode};
pub use frame_io::{Fps, FrameSource, GrayFrame, InputFormat};
pub use pipeline::{analyze, Analysis, AnalyzeOptions};
pub use roi::{RoiRect, RoiSource, RoiTrack};
pub use synth::{GroundTruth, SynthConfig, Synthesizer};
