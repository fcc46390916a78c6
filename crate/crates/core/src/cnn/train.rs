use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{softmax, Network};
use super::{AsInput, CnnArchitecture, CnnError, Scalar};
use crate::par;
use crate::telemetry::EmotionLabel;

/// Optimizer and schedule. Adam moments are fixed at
/// `(0.9, 0.999, 1e-8)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub dropout: bool,
    /// Compute the per-sample gradients of a batch on the thread pool. The
    /// reduction order is fixed, so weights do not depend on this flag.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 8,
            epochs: 100,
            seed: 0,
            dropout: true,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CnnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CnnError::InvalidConfig(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(CnnError::InvalidConfig("batch size 0".into()));
        }
        Ok(())
    }
}

pub const ADAM_BETA1: f32 = 0.9;
pub const ADAM_BETA2: f32 = 0.999;
pub const ADAM_EPSILON: f32 = 1e-8;

/// Trained network plus the label of each output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub network: Network<f32>,
    pub class_labels: Vec<EmotionLabel>,
}

impl CnnModel {
    pub fn new(network: Network<f32>, class_labels: Vec<EmotionLabel>) -> Result<Self, CnnError> {
        if class_labels.len() != network.arch().classes {
            return Err(CnnError::ShapeMismatch(format!(
                "{} class labels for {} outputs",
                class_labels.len(),
                network.arch().classes
            )));
        }
        Ok(Self {
            network,
            class_labels,
        })
    }

    pub fn arch(&self) -> &CnnArchitecture {
        self.network.arch()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: CnnModel,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mean softmax cross-entropy over a batch of `(input, class index)` pairs
/// and its gradient with respect to the flat parameter vector. `masks`
/// holds one dropout mask per sample; `None` disables dropout.
pub fn loss_and_gradients<T: Scalar>(
    net: &Network<T>,
    batch: &[(&[T], usize)],
    masks: Option<&[Vec<T>]>,
    parallel: bool,
) -> Result<(T, Vec<T>), CnnError> {
    if batch.is_empty() {
        return Err(CnnError::EmptyDataset);
    }
    if let Some(m) = masks {
        if m.len() != batch.len() {
            return Err(CnnError::ShapeMismatch("one dropout mask per sample".into()));
        }
    }
    let one = |i: usize| -> Result<(T, Vec<T>), CnnError> {
        let (x, y) = batch[i];
        let mut g = vec![T::zero(); net.param_count()];
        let mask = masks.map(|m| m[i].as_slice());
        let loss = net.accumulate_gradient(x, y, mask, T::one(), &mut g)?;
        Ok((loss, g))
    };
    let per_sample = if parallel {
        par::try_map_range(batch.len(), one)?
    } else {
        (0..batch.len()).map(one).collect::<Result<Vec<_>, _>>()?
    };
    let inv = T::one() / T::from_f64(batch.len() as f64);
    let mut iter = per_sample.into_iter();
    let (mut loss, mut grad) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss = loss + l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a = *a + *b;
        }
    }
    for a in &mut grad {
        *a = *a * inv;
    }
    Ok((loss * inv, grad))
}

struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f32], grad: &[f32], lr: f32) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
}

/// Trains a freshly initialized network on `data`.
///
/// Weights are initialized from `cfg.seed`; shuffling and dropout masks come
/// from a second stream of the same generator, drawn sequentially, so a
/// fixed `(data, arch, labels, cfg)` always yields the same weights. `log`
/// is called after every epoch with `(epoch, mean loss)`.
pub fn train<S, F>(
    data: &[(S, EmotionLabel)],
    arch: CnnArchitecture,
    class_labels: &[EmotionLabel],
    cfg: &TrainConfig,
    mut log: F,
) -> Result<TrainOutcome, CnnError>
where
    S: AsInput + Sync,
    F: FnMut(usize, f64),
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(CnnError::EmptyDataset);
    }
    if class_labels.len() != arch.classes {
        return Err(CnnError::ShapeMismatch(format!(
            "{} class labels for {} outputs",
            class_labels.len(),
            arch.classes
        )));
    }
    let targets = data
        .iter()
        .map(|(_, l)| {
            class_labels
                .iter()
                .position(|c| c == l)
                .ok_or(CnnError::LabelOutsideClassSet(*l))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (x, _) in data {
        let n = x.as_input().len();
        if n != arch.input_len() {
            return Err(CnnError::ShapeMismatch(format!(
                "input has {n} values, expected {}",
                arch.input_len()
            )));
        }
    }

    let mut net = Network::<f32>::init(arch, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(net.param_count());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let masks: Option<Vec<Vec<f32>>> = if cfg.dropout && net.dropout_len().is_some() {
                Some(
                    chunk
                        .iter()
                        .map(|_| net.draw_dropout_mask(&mut rng).expect("dropout configured"))
                        .collect(),
                )
            } else {
                None
            };
            let inputs: Vec<_> = chunk.iter().map(|&i| data[i].0.as_input()).collect();
            let batch: Vec<(&[f32], usize)> = chunk
                .iter()
                .zip(&inputs)
                .map(|(&i, x)| (x.as_ref(), targets[i]))
                .collect();
            let (loss, grad) = loss_and_gradients(&net, &batch, masks.as_deref(), cfg.parallel)?;
            total += loss as f64 * chunk.len() as f64;
            adam.update(net.params_mut(), &grad, cfg.learning_rate);
        }
        let mean = total / data.len() as f64;
        log(epoch, mean);
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome {
        model: CnnModel::new(net, class_labels.to_vec())?,
        epoch_losses,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: EmotionLabel,
    pub probabilities: Vec<f64>,
}

/// Evaluation-mode forward pass; ties go to the earlier class.
pub fn predict<S: AsInput + ?Sized>(model: &CnnModel, input: &S) -> Result<Prediction, CnnError> {
    let logits = model.network.forward(&input.as_input(), None)?;
    let logits: Vec<f64> = logits.iter().map(|&v| v as f64).collect();
    let probabilities = softmax(&logits);
    let best = argmax(&probabilities);
    Ok(Prediction {
        label: model.class_labels[best],
        probabilities,
    })
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&softmax(&[3.0, 1.0, 1.0, 1.0, 1.0])), 0);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.2, 0.2]), 1);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_unknown_label_and_empty_data() {
        let arch = CnnArchitecture::reduced(2);
        let labels = [EmotionLabel::Joy, EmotionLabel::Neutral];
        let data = vec![(vec![0.0f32; 432], EmotionLabel::Sadness)];
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&data, arch.clone(), &labels, &cfg, |_, _| {}),
            Err(CnnError::LabelOutsideClassSet(EmotionLabel::Sadness))
        ));
        let empty: Vec<(Vec<f32>, EmotionLabel)> = Vec::new();
        assert!(matches!(
            train(&empty, arch, &labels, &cfg, |_, _| {}),
            Err(CnnError::EmptyDataset)
        ));
    }

    #[test]
    fn parallel_flag_does_not_change_weights() {
        let arch = CnnArchitecture::reduced(2);
        let labels = [EmotionLabel::Joy, EmotionLabel::Neutral];
        let data: Vec<(Vec<f32>, EmotionLabel)> = (0..10)
            .map(|i| {
                let x = (0..432).map(|j| ((i * 31 + j * 7) % 17) as f32 / 17.0).collect();
                (x, labels[i % 2])
            })
            .collect();
        let run = |parallel| {
            let cfg = TrainConfig {
                epochs: 3,
                batch_size: 4,
                learning_rate: 1e-2,
                parallel,
                ..TrainConfig::default()
            };
            train(&data, arch.clone(), &labels, &cfg, |_, _| {}).unwrap()
        };
        let (a, b) = (run(false), run(true));
        assert_eq!(a.model.network.params(), b.model.network.params());
        assert_eq!(a.epoch_losses.len(), 3);
    }
}
