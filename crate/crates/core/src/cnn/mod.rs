//! Convolutional classifier over polar trajectory images.
//!
//! The network is three conv/ReLU/max-pool blocks followed by dense layers
//! ([`CnnArchitecture::standard`]). Forward and backward passes use im2col
//! with a strided GEMM and are generic over the element type, so the same
//! code trains in `f32` and is gradient-checked in `f64`.

mod arch;
mod container;
mod net;
mod scalar;
mod train;

use std::borrow::Cow;
use std::path::PathBuf;

use thiserror::Error;

use crate::raster::PolarImage;
use crate::telemetry::EmotionLabel;

pub use arch::{BlockShape, CnnArchitecture, DropoutSpec, Padding};
pub use container::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use net::{softmax, Network};
pub use scalar::Scalar;
pub use train::{loss_and_gradients, predict, train, CnnModel, Prediction, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("InvalidArchitecture: {0}")]
    InvalidArchitecture(String),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("EmptyDataset")]
    EmptyDataset,
    #[error("LabelOutsideClassSet: {0}")]
    LabelOutsideClassSet(EmotionLabel),
    #[error("IoFailure: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("VersionMismatch: {0}")]
    VersionMismatch(String),
    #[error("ChecksumMismatch: {0}")]
    ChecksumMismatch(String),
}

/// Something that can be fed to the network as a flat CHW input.
pub trait AsInput {
    fn as_input(&self) -> Cow<'_, [f32]>;
}

impl AsInput for Vec<f32> {
    fn as_input(&self) -> Cow<'_, [f32]> {
        Cow::Borrowed(self)
    }
}

impl AsInput for [f32] {
    fn as_input(&self) -> Cow<'_, [f32]> {
        Cow::Borrowed(self)
    }
}

impl AsInput for PolarImage {
    fn as_input(&self) -> Cow<'_, [f32]> {
        Cow::Owned(image_to_input(self))
    }
}

/// Converts interleaved RGB bytes to planar CHW ink values in `[0, 1]`:
/// `1 - byte / 255`, so the white background maps to 0.
pub fn image_to_input(image: &PolarImage) -> Vec<f32> {
    let px = image.pixels();
    let plane = px.len() / 3;
    let mut out = vec![0.0f32; px.len()];
    for (i, rgb) in px.chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * plane + i] = 1.0 - rgb[c] as f32 / 255.0;
        }
    }
    out
}
