use std::collections::BTreeSet;

use super::EvalError;
use crate::cnn::{self, CnnArchitecture, CnnModel, TrainConfig};
use crate::dtw::{select_templates, DtwModel, FeatureSequence};
use crate::features::build_bundle;
use crate::preprocess::prepare;
use crate::raster::{rasterize, PolarImage, RasterStyle};
use crate::telemetry::{EmotionLabel, TaskInstance};

/// A classifier as the protocols see it.
pub trait Pipeline: Sync {
    type Repr: Send + Sync;
    type Model: Send;

    /// Per-instance representation, computed once per run.
    fn represent(&self, instance: &TaskInstance) -> Result<Self::Repr, EvalError>;
    fn fit(&self, train: &[(&Self::Repr, EmotionLabel)]) -> Result<Self::Model, EvalError>;
    fn predict(&self, model: &Self::Model, x: &Self::Repr) -> Result<EmotionLabel, EvalError>;
}

/// Prepared end-effector stream to the 15-channel DTW frame stack.
pub fn dtw_sequence(instance: &TaskInstance) -> Result<FeatureSequence, EvalError> {
    let (segment, raw) = prepare(&instance.ee)?;
    Ok(build_bundle(&segment, raw)?.sequence())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwPipeline {
    pub k_per_class: usize,
    pub band: Option<usize>,
}

impl Default for DtwPipeline {
    fn default() -> Self {
        Self {
            k_per_class: 1,
            band: None,
        }
    }
}

impl Pipeline for DtwPipeline {
    type Repr = FeatureSequence;
    type Model = DtwModel;

    fn represent(&self, instance: &TaskInstance) -> Result<FeatureSequence, EvalError> {
        dtw_sequence(instance)
    }

    fn fit(&self, train: &[(&FeatureSequence, EmotionLabel)]) -> Result<DtwModel, EvalError> {
        let owned: Vec<(FeatureSequence, EmotionLabel)> =
            train.iter().map(|(s, l)| ((*s).clone(), *l)).collect();
        Ok(select_templates(&owned, self.k_per_class, self.band)?)
    }

    fn predict(&self, model: &DtwModel, x: &FeatureSequence) -> Result<EmotionLabel, EvalError> {
        Ok(model.classify(x)?.label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnPipeline {
    pub config: TrainConfig,
    pub style: RasterStyle,
    /// Architecture used for every fold; `classes` is replaced by the number
    /// of labels in the fold's training set.
    pub arch: CnnArchitecture,
    /// Print epoch losses to standard error.
    pub log_epochs: bool,
}

impl Default for CnnPipeline {
    fn default() -> Self {
        Self {
            config: TrainConfig::default(),
            style: RasterStyle::default(),
            arch: CnnArchitecture::standard(5),
            log_epochs: false,
        }
    }
}

impl Pipeline for CnnPipeline {
    type Repr = PolarImage;
    type Model = CnnModel;

    fn represent(&self, instance: &TaskInstance) -> Result<PolarImage, EvalError> {
        Ok(rasterize(&instance.joints, &self.style)?)
    }

    fn fit(&self, train: &[(&PolarImage, EmotionLabel)]) -> Result<CnnModel, EvalError> {
        let labels: Vec<EmotionLabel> = train
            .iter()
            .map(|(_, l)| *l)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let arch = CnnArchitecture {
            classes: labels.len(),
            ..self.arch.clone()
        };
        let data: Vec<(PolarImage, EmotionLabel)> =
            train.iter().map(|(x, l)| ((*x).clone(), *l)).collect();
        let log = self.log_epochs;
        let outcome = cnn::train(&data, arch, &labels, &self.config, |epoch, loss| {
            if log {
                eprintln!("epoch {:>3}  loss {loss:.6}", epoch + 1);
            }
        })?;
        Ok(outcome.model)
    }

    fn predict(&self, model: &CnnModel, x: &PolarImage) -> Result<EmotionLabel, EvalError> {
        Ok(cnn::predict(model, x)?.label)
    }
}
