//! Nearest-template emotion classification with dynamic time warping.
//!
//! Sequences are z-scored per channel with training statistics, then warped
//! jointly across all channels with a Euclidean frame cost. Each class keeps
//! the `k` training instances with the smallest summed DTW distance to the
//! rest of their class (medoids) as templates; a query takes the label of the
//! class whose nearest template is closest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::telemetry::EmotionLabel;

#[derive(Debug, Error)]
pub enum DtwError {
    #[error("EmptySequence")]
    EmptySequence,
    #[error("ChannelMismatch: {left} vs {right} channels")]
    ChannelMismatch { left: usize, right: usize },
    #[error("InvalidSequence: {0}")]
    InvalidSequence(String),
    #[error("InsufficientClassData: {0}")]
    InsufficientClassData(String),
    #[error("ModelFormat: {0}")]
    Format(String),
    #[error("IoFailure: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Frames of `channels` values stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    channels: usize,
    data: Vec<f64>,
}

impl FeatureSequence {
    pub fn new(channels: usize, data: Vec<f64>) -> Result<Self, DtwError> {
        if channels == 0 || !data.len().is_multiple_of(channels) {
            return Err(DtwError::InvalidSequence(format!(
                "{} values do not split into frames of {channels}",
                data.len()
            )));
        }
        Ok(Self { channels, data })
    }

    /// Builds a sequence from equal-length channel series.
    pub fn from_channels(channels: &[Vec<f64>]) -> Result<Self, DtwError> {
        let c = channels.len();
        let n = channels.first().map_or(0, Vec::len);
        if c == 0 || channels.iter().any(|ch| ch.len() != n) {
            return Err(DtwError::InvalidSequence("ragged channels".into()));
        }
        let mut data = Vec::with_capacity(c * n);
        for i in 0..n {
            data.extend(channels.iter().map(|ch| ch[i]));
        }
        Self::new(c, data)
    }

    /// Single-channel sequence.
    pub fn scalar(values: &[f64]) -> Self {
        Self {
            channels: 1,
            data: values.to_vec(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.channels)
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.frames().map(|f| f[c]).collect()
    }

    pub fn map_frames(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let c = self.channels;
        Self {
            channels: c,
            data: self
                .data
                .iter()
                .enumerate()
                .map(|(i, &v)| f(i % c, v))
                .collect(),
        }
    }
}

fn frame_cost(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Classic DTW (match/insert/delete, full matrix).
pub fn dtw_distance(a: &FeatureSequence, b: &FeatureSequence) -> Result<f64, DtwError> {
    dtw_distance_banded(a, b, None)
}

/// DTW restricted to `|i - j| <= band` (widened to the length difference so a
/// path always exists). `None` searches the full matrix.
pub fn dtw_distance_banded(
    a: &FeatureSequence,
    b: &FeatureSequence,
    band: Option<usize>,
) -> Result<f64, DtwError> {
    if a.is_empty() || b.is_empty() {
        return Err(DtwError::EmptySequence);
    }
    if a.channels != b.channels {
        return Err(DtwError::ChannelMismatch {
            left: a.channels,
            right: b.channels,
        });
    }
    let (n, m) = (a.len(), b.len());
    let w = band.map(|w| w.max(n.abs_diff(m)));
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur.fill(f64::INFINITY);
        let (lo, hi) = match w {
            Some(w) => (i.saturating_sub(w).max(1), (i + w).min(m)),
            None => (1, m),
        };
        let fa = a.frame(i - 1);
        for j in lo..=hi {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = frame_cost(fa, b.frame(j - 1)) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Per-channel z-scoring statistics from training frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelNorm {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero marks a constant channel, which
    /// is centred but not scaled.
    pub std: Vec<f64>,
}

impl ChannelNorm {
    pub fn fit<'a>(sequences: impl IntoIterator<Item = &'a FeatureSequence>) -> Result<Self, DtwError> {
        let mut channels = None;
        let mut count = 0usize;
        let mut sum = Vec::new();
        let mut sum_sq = Vec::new();
        let seqs: Vec<&FeatureSequence> = sequences.into_iter().collect();
        for s in &seqs {
            let c = *channels.get_or_insert(s.channels);
            if c != s.channels {
                return Err(DtwError::ChannelMismatch {
                    left: c,
                    right: s.channels,
                });
            }
        }
        let c = channels.ok_or(DtwError::EmptySequence)?;
        sum.resize(c, 0.0);
        for s in &seqs {
            for f in s.frames() {
                for (acc, v) in sum.iter_mut().zip(f) {
                    *acc += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(DtwError::EmptySequence);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        sum_sq.resize(c, 0.0);
        for s in &seqs {
            for f in s.frames() {
                for ((acc, v), m) in sum_sq.iter_mut().zip(f).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        let std = sum_sq.iter().map(|s| (s / count as f64).sqrt()).collect();
        Ok(Self { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Channels with zero spread.
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.std.len()).filter(|&c| self.std[c] == 0.0).collect()
    }

    pub fn apply(&self, seq: &FeatureSequence) -> Result<FeatureSequence, DtwError> {
        if seq.channels != self.channels() {
            return Err(DtwError::ChannelMismatch {
                left: self.channels(),
                right: seq.channels,
            });
        }
        Ok(seq.map_frames(|c, v| {
            let centred = v - self.mean[c];
            if self.std[c] > 0.0 {
                centred / self.std[c]
            } else {
                centred
            }
        }))
    }
}

/// Trained nearest-template classifier. Templates are stored normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwModel {
    pub templates: BTreeMap<EmotionLabel, Vec<FeatureSequence>>,
    pub k_per_class: usize,
    pub norm: ChannelNorm,
    pub band: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: EmotionLabel,
    /// Smallest template distance per class.
    pub scores: BTreeMap<EmotionLabel, f64>,
}

/// Picks the `k_per_class` medoids of each class.
///
/// Ties in summed distance go to the lower training index.
pub fn select_templates(
    training: &[(FeatureSequence, EmotionLabel)],
    k_per_class: usize,
    band: Option<usize>,
) -> Result<DtwModel, DtwError> {
    if k_per_class == 0 {
        return Err(DtwError::InsufficientClassData(
            "k_per_class must be at least 1".into(),
        ));
    }
    if training.is_empty() {
        return Err(DtwError::InsufficientClassData("empty training set".into()));
    }
    let norm = ChannelNorm::fit(training.iter().map(|(s, _)| s))?;
    let normalized = par::try_map(training, |(s, _)| norm.apply(s))?;

    let mut by_class: BTreeMap<EmotionLabel, Vec<usize>> = BTreeMap::new();
    for (i, (_, label)) in training.iter().enumerate() {
        by_class.entry(*label).or_default().push(i);
    }
    if let Some((label, members)) = by_class.iter().find(|(_, m)| m.len() < k_per_class) {
        return Err(DtwError::InsufficientClassData(format!(
            "class {label} has {} instances, {k_per_class} templates requested",
            members.len()
        )));
    }

    let pairs: Vec<(usize, usize)> = by_class
        .values()
        .flat_map(|members| {
            members
                .iter()
                .enumerate()
                .flat_map(move |(x, &a)| members[x + 1..].iter().map(move |&b| (a, b)))
        })
        .collect();
    let distances = par::try_map(&pairs, |&(a, b)| {
        dtw_distance_banded(&normalized[a], &normalized[b], band)
    })?;
    let mut totals = vec![0.0; training.len()];
    for (&(a, b), d) in pairs.iter().zip(&distances) {
        totals[a] += d;
        totals[b] += d;
    }

    let mut templates = BTreeMap::new();
    for (label, mut members) in by_class {
        members.sort_by(|&a, &b| totals[a].total_cmp(&totals[b]).then(a.cmp(&b)));
        templates.insert(
            label,
            members[..k_per_class]
                .iter()
                .map(|&i| normalized[i].clone())
                .collect(),
        );
    }
    Ok(DtwModel {
        templates,
        k_per_class,
        norm,
        band,
    })
}

impl DtwModel {
    pub fn classes(&self) -> Vec<EmotionLabel> {
        self.templates.keys().copied().collect()
    }

    pub fn template_count(&self) -> usize {
        self.templates.values().map(Vec::len).sum()
    }

    /// Labels `seq` by its nearest class. Exact ties go to the class that
    /// comes first in declaration order.
    pub fn classify(&self, seq: &FeatureSequence) -> Result<Classification, DtwError> {
        let query = self.norm.apply(seq)?;
        let mut scores = BTreeMap::new();
        let mut best: Option<(EmotionLabel, f64)> = None;
        for (&label, templates) in &self.templates {
            let mut d_min = f64::INFINITY;
            for t in templates {
                d_min = d_min.min(dtw_distance_banded(&query, t, self.band)?);
            }
            scores.insert(label, d_min);
            if best.is_none_or(|(_, d)| d_min < d) {
                best = Some((label, d_min));
            }
        }
        let (label, _) = best.ok_or_else(|| DtwError::Format("model has no templates".into()))?;
        Ok(Classification { label, scores })
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: FORMAT_TAG.to_string(),
            k_per_class: self.k_per_class,
            band: self.band,
            norm: self.norm.clone(),
            templates: self
                .templates
                .iter()
                .flat_map(|(label, ts)| {
                    ts.iter().map(|t| TemplateFile {
                        label: *label,
                        frames: t.len(),
                        channels: (0..t.channels()).map(|c| t.channel(c)).collect(),
                    })
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, DtwError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| DtwError::Format(e.to_string()))?;
        if file.format != FORMAT_TAG {
            return Err(DtwError::Format(format!(
                "format tag {:?}, expected {FORMAT_TAG:?}",
                file.format
            )));
        }
        let mut templates: BTreeMap<EmotionLabel, Vec<FeatureSequence>> = BTreeMap::new();
        for t in file.templates {
            let seq = FeatureSequence::from_channels(&t.channels)?;
            if seq.len() != t.frames || seq.channels() != file.norm.channels() {
                return Err(DtwError::Format(format!("template for {} has a bad shape", t.label)));
            }
            templates.entry(t.label).or_default().push(seq);
        }
        Ok(Self {
            templates,
            k_per_class: file.k_per_class,
            norm: file.norm,
            band: file.band,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DtwError> {
        fs::write(path, self.to_json()).map_err(|source| DtwError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DtwError> {
        let text = fs::read_to_string(path).map_err(|source| DtwError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

const FORMAT_TAG: &str = "dtw-v1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    k_per_class: usize,
    band: Option<usize>,
    norm: ChannelNorm,
    templates: Vec<TemplateFile>,
}

/// Channel-major template arrays.
#[derive(Serialize, Deserialize)]
struct TemplateFile {
    label: EmotionLabel,
    frames: usize,
    channels: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionLabel::*;

    fn s(v: &[f64]) -> FeatureSequence {
        FeatureSequence::scalar(v)
    }

    #[test]
    fn identical_is_zero() {
        let a = FeatureSequence::new(2, vec![1.0, 2.0, 0.5, -1.0, 3.0, 3.0]).unwrap();
        assert_eq!(dtw_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn shifted_ramp() {
        // Hand enumeration of the 13 monotone paths on the 3x3 grid: the
        // cheapest is (0,0),(1,0),(2,1),(2,2) with costs 1+0+0+1.
        assert_eq!(dtw_distance(&s(&[1.0, 2.0, 3.0]), &s(&[2.0, 3.0, 4.0])).unwrap(), 2.0);
    }

    #[test]
    fn single_frames() {
        let a = FeatureSequence::new(3, vec![1.0, 2.0, 2.0]).unwrap();
        let b = FeatureSequence::new(3, vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dtw_distance(&a, &b).unwrap(), 3.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            dtw_distance(&s(&[]), &s(&[1.0])),
            Err(DtwError::EmptySequence)
        ));
        let two = FeatureSequence::new(2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            dtw_distance(&s(&[1.0]), &two),
            Err(DtwError::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn band_covers_length_difference() {
        let a = s(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let b = s(&[0.0, 7.0]);
        assert_eq!(
            dtw_distance_banded(&a, &b, Some(0)).unwrap(),
            dtw_distance(&a, &b).unwrap()
        );
    }

    #[test]
    fn single_instance_class_is_its_own_template() {
        let model = select_templates(&[(s(&[1.0, 2.0]), Joy)], 1, None).unwrap();
        assert_eq!(model.template_count(), 1);
    }

    #[test]
    fn medoid_selected() {
        // 0 and 4 flank 2; summed distances 6, 4, 6 (times 4 frames).
        let train = vec![
            (s(&[0.0; 4]), Joy),
            (s(&[2.0; 4]), Joy),
            (s(&[4.0; 4]), Joy),
            (s(&[10.0; 4]), Sadness),
        ];
        let model = select_templates(&train, 1, None).unwrap();
        let t = &model.templates[&Joy][0];
        assert_eq!(t, &model.norm.apply(&s(&[2.0; 4])).unwrap());
    }

    #[test]
    fn medoid_tie_goes_to_lower_index() {
        let train = vec![(s(&[0.0; 3]), Neutral), (s(&[1.0; 3]), Neutral)];
        let model = select_templates(&train, 1, None).unwrap();
        assert_eq!(
            model.templates[&Neutral][0],
            model.norm.apply(&s(&[0.0; 3])).unwrap()
        );
    }

    #[test]
    fn insufficient_class_data() {
        let train = vec![(s(&[0.0]), Joy), (s(&[1.0]), Joy), (s(&[2.0]), Sadness)];
        assert!(matches!(
            select_templates(&train, 2, None),
            Err(DtwError::InsufficientClassData(_))
        ));
    }

    #[test]
    fn five_classes_five_templates() {
        let train: Vec<_> = EmotionLabel::ALL
            .iter()
            .enumerate()
            .flat_map(|(c, &l)| (0..3).map(move |r| (s(&[c as f64 * 10.0 + r as f64; 5]), l)))
            .collect();
        let model = select_templates(&train, 1, None).unwrap();
        assert_eq!(model.template_count(), 5);
        for (seq, label) in &train {
            assert_eq!(model.classify(seq).unwrap().label, *label);
        }
    }

    #[test]
    fn classify_exact_template_scores_zero() {
        let train = vec![
            (s(&[0.0, 1.0, 0.0]), Sadness),
            (s(&[5.0, 5.0, 5.0]), Joy),
        ];
        let model = select_templates(&train, 1, None).unwrap();
        let c = model.classify(&s(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(c.label, Sadness);
        assert_eq!(c.scores[&Sadness], 0.0);
    }

    #[test]
    fn exact_tie_prefers_declaration_order() {
        let train = vec![(s(&[-1.0; 2]), Neutral), (s(&[1.0; 2]), Joy)];
        let model = select_templates(&train, 1, None).unwrap();
        let c = model.classify(&s(&[0.0; 2])).unwrap();
        assert_eq!(c.scores[&Joy], c.scores[&Neutral]);
        assert_eq!(c.label, Joy);
    }

    #[test]
    fn constant_channel_flagged() {
        let a = FeatureSequence::new(2, vec![1.0, 7.0, 2.0, 7.0]).unwrap();
        let norm = ChannelNorm::fit([&a]).unwrap();
        assert_eq!(norm.flagged(), vec![1]);
        assert_eq!(norm.apply(&a).unwrap().channel(1), vec![0.0, 0.0]);
    }

    #[test]
    fn json_round_trip() {
        let train = vec![
            (FeatureSequence::new(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap(), Joy),
            (FeatureSequence::new(2, vec![1.0 / 3.0, 0.2, 0.7, 1e-9]).unwrap(), Pleasure),
        ];
        let model = select_templates(&train, 1, Some(4)).unwrap();
        let text = model.to_json();
        assert!(text.contains("\"dtw-v1\""));
        assert_eq!(DtwModel::from_json(&text).unwrap(), model);
        assert!(DtwModel::from_json(&text.replace("dtw-v1", "dtw-v0")).is_err());
    }
}
