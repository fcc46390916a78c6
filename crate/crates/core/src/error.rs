use thiserror::Error;

use crate::{cnn::CnnError, dtw::DtwError, eval::EvalError, features::FeatureError};
use crate::{preprocess::PreprocessError, raster::RasterError, synth::SynthError};
use crate::telemetry::TelemetryError;

/// Crate-wide error, one variant per module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Dtw(#[from] DtwError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
