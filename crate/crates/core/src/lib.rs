//! Emotion inference from the motion telemetry of a teleoperated robot arm.
//!
//! Two classification pipelines share one data model:
//!
//! * end-effector trajectories are segmented, normalized and turned into
//!   multichannel kinematic/expressive feature sequences, which a dynamic
//!   time warping nearest-template classifier labels ([`dtw`]);
//! * joint-angle trajectories are rasterized into polar images
//!   ([`raster`]) and labeled by a small convolutional network ([`cnn`]).
//!
//! [`synth`] generates emotion-conditioned telemetry from a simulated 6-DOF
//! arm and [`eval`] runs subject-dependent and leave-one-subject-out
//! protocols over either pipeline.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.
//! Results are identical in both modes.

pub mod cnn;
pub mod dtw;
mod error;
pub mod eval;
pub mod features;
pub mod par;
pub mod preprocess;
pub mod raster;
pub mod synth;
pub mod telemetry;

pub use error::{Error, Result};
pub use telemetry::{EmotionLabel, TaskKind};

/// Sample rate every downstream stage works at, in Hz.
pub const SAMPLE_RATE_HZ: f64 = 50.0;
