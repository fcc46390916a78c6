//! Evaluation protocols: subject-dependent 50/50 splits and
//! leave-one-subject-out cross-validation, per-task, per-emotion and
//! per-class-count accuracy, confusion matrices.

mod pipeline;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cnn::CnnError;
use crate::dtw::DtwError;
use crate::features::FeatureError;
use crate::par;
use crate::preprocess::PreprocessError;
use crate::raster::RasterError;
use crate::synth::mix_seed;
use crate::telemetry::{Dataset, EmotionLabel, TaskKind};

pub use pipeline::{dtw_sequence, CnnPipeline, DtwPipeline, Pipeline};
pub use report::{emit_report, parse_csv_report, render_csv, render_markdown, ReportFormat};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("InsufficientData: {0}")]
    InsufficientData(String),
    #[error("EmptyInput: no predictions")]
    EmptyInput,
    #[error("IoFailure: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("UnknownProtocol: {0:?}")]
    UnknownProtocol(String),
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
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    SubjectDependent,
    LeaveOneSubjectOut,
}

impl Protocol {
    pub fn slug(self) -> &'static str {
        match self {
            Protocol::SubjectDependent => "subject-dependent",
            Protocol::LeaveOneSubjectOut => "loso",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Protocol {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "subject-dependent" => Ok(Protocol::SubjectDependent),
            "loso" => Ok(Protocol::LeaveOneSubjectOut),
            other => Err(EvalError::UnknownProtocol(other.to_string())),
        }
    }
}

/// One train/test round. Classifiers are always trained per task.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub task: TaskKind,
    /// The subject the fold is about: trained on (subject-dependent) or held
    /// out (LOSO).
    pub subject: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub protocol: Protocol,
    pub folds: Vec<Fold>,
    pub seed: u64,
}

fn labeled(dataset: &Dataset) -> Vec<(usize, EmotionLabel)> {
    dataset
        .instances()
        .iter()
        .enumerate()
        .filter_map(|(i, inst)| inst.label.map(|l| (i, l)))
        .collect()
}

/// Builds the folds of `protocol`; unlabeled instances are left out.
///
/// Subject-dependent: one fold per (subject, task); each class is shuffled
/// and its first `ceil(n / 2)` instances train. LOSO: per task, one fold per
/// subject holding out all of that subject's instances.
pub fn make_splits(dataset: &Dataset, protocol: Protocol, seed: u64) -> Result<SplitPlan, EvalError> {
    let insts = dataset.instances();
    let mut groups: BTreeMap<(TaskKind, String), BTreeMap<EmotionLabel, Vec<usize>>> = BTreeMap::new();
    for (i, label) in labeled(dataset) {
        let inst = &insts[i];
        groups
            .entry((inst.task, inst.subject_id.clone()))
            .or_default()
            .entry(label)
            .or_default()
            .push(i);
    }
    if groups.is_empty() {
        return Err(EvalError::InsufficientData("no labeled instances".into()));
    }
    let mut folds = Vec::new();
    match protocol {
        Protocol::SubjectDependent => {
            for ((task, subject), classes) in &groups {
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (label, members) in classes {
                    if members.len() < 2 {
                        return Err(EvalError::InsufficientData(format!(
                            "{subject} has {} {label} instance(s) of {task}, need 2",
                            members.len()
                        )));
                    }
                    let mut shuffled = members.clone();
                    let key = [
                        2,
                        task_index(*task),
                        subject_key(subject),
                        label.index() as u64,
                    ];
                    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, &key)));
                    let cut = shuffled.len().div_ceil(2);
                    train.extend_from_slice(&shuffled[..cut]);
                    test.extend_from_slice(&shuffled[cut..]);
                }
                train.sort_unstable();
                test.sort_unstable();
                folds.push(Fold {
                    task: *task,
                    subject: subject.clone(),
                    train,
                    test,
                });
            }
        }
        Protocol::LeaveOneSubjectOut => {
            let mut by_task: BTreeMap<TaskKind, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
            for ((task, subject), classes) in &groups {
                let mut all: Vec<usize> = classes.values().flatten().copied().collect();
                all.sort_unstable();
                by_task.entry(*task).or_default().insert(subject, all);
            }
            for (task, subjects) in by_task {
                if subjects.len() < 2 {
                    return Err(EvalError::InsufficientData(format!(
                        "{task} has {} subject(s), leave-one-subject-out needs 2",
                        subjects.len()
                    )));
                }
                for (held_out, test) in &subjects {
                    let mut train: Vec<usize> = subjects
                        .iter()
                        .filter(|(s, _)| s != &held_out)
                        .flat_map(|(_, v)| v.iter().copied())
                        .collect();
                    train.sort_unstable();
                    folds.push(Fold {
                        task,
                        subject: held_out.to_string(),
                        train,
                        test: test.clone(),
                    });
                }
            }
        }
    }
    Ok(SplitPlan {
        protocol,
        folds,
        seed,
    })
}

fn task_index(task: TaskKind) -> u64 {
    TaskKind::all().iter().position(|&t| t == task).unwrap_or(usize::MAX) as u64
}

fn subject_key(subject: &str) -> u64 {
    // FNV-1a; stable across platforms and releases
    subject.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub truth: EmotionLabel,
    pub predicted: EmotionLabel,
    pub task: TaskKind,
    pub subject: String,
}

/// Accuracy tables of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Row and column order of `confusion`.
    pub classes: Vec<EmotionLabel>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
    pub correct: usize,
    /// Pooled over every prediction: trace / total.
    pub accuracy_overall: f64,
    /// Unweighted mean of the per-subject accuracies.
    pub mean_over_subjects: f64,
    /// Unweighted mean of the per-task accuracies.
    pub mean_over_tasks: f64,
    pub accuracy_by_task: BTreeMap<String, f64>,
    /// Per-class recall.
    pub accuracy_by_emotion: BTreeMap<EmotionLabel, f64>,
    pub accuracy_by_subject: BTreeMap<String, f64>,
    pub accuracy_by_class_count: BTreeMap<usize, f64>,
}

fn ratio(correct: usize, total: usize) -> f64 {
    correct as f64 / total as f64
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Tallies predictions into an [`EvalReport`].
pub fn evaluate(predictions: &[Prediction]) -> Result<EvalReport, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let classes: Vec<EmotionLabel> = predictions
        .iter()
        .flat_map(|p| [p.truth, p.predicted])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos = |l: EmotionLabel| classes.binary_search(&l).expect("class collected");
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    let mut by_task: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut by_subject: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in predictions {
        confusion[pos(p.truth)][pos(p.predicted)] += 1;
        let hit = (p.truth == p.predicted) as usize;
        for (map, key) in [(&mut by_task, p.task.slug()), (&mut by_subject, p.subject.clone())] {
            let e = map.entry(key).or_default();
            e.0 += hit;
            e.1 += 1;
        }
    }
    let correct = (0..classes.len()).map(|i| confusion[i][i]).sum();
    let total = predictions.len();
    let accuracy_by_emotion = classes
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| {
            let row: usize = confusion[i].iter().sum();
            (row > 0).then(|| (l, ratio(confusion[i][i], row)))
        })
        .collect();
    let to_acc = |m: BTreeMap<String, (usize, usize)>| -> BTreeMap<String, f64> {
        m.into_iter().map(|(k, (c, n))| (k, ratio(c, n))).collect()
    };
    let accuracy_by_task = to_acc(by_task);
    let accuracy_by_subject = to_acc(by_subject);
    Ok(EvalReport {
        confusion,
        total,
        correct,
        accuracy_overall: ratio(correct, total),
        mean_over_subjects: mean(accuracy_by_subject.values().copied()),
        mean_over_tasks: mean(accuracy_by_task.values().copied()),
        accuracy_by_task,
        accuracy_by_emotion,
        accuracy_by_subject,
        accuracy_by_class_count: BTreeMap::new(),
        classes,
    })
}

/// Outcome of running a pipeline over a split plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub report: EvalReport,
    /// In fold order, then test-index order within a fold.
    pub predictions: Vec<Prediction>,
    /// `(test size, accuracy)` per fold.
    pub fold_accuracies: Vec<(usize, f64)>,
}

/// Represents every instance once, then fits and tests each fold.
pub fn run_protocol<P: Pipeline>(dataset: &Dataset, pipeline: &P, plan: &SplitPlan) -> Result<ProtocolRun, EvalError> {
    let insts = dataset.instances();
    let needed: BTreeSet<usize> = plan
        .folds
        .iter()
        .flat_map(|f| f.train.iter().chain(&f.test).copied())
        .collect();
    let needed: Vec<usize> = needed.into_iter().collect();
    let reprs = par::try_map(&needed, |&i| pipeline.represent(&insts[i]))?;
    let slot: BTreeMap<usize, usize> = needed.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let label = |i: usize| insts[i].label.expect("split plans only hold labeled instances");

    let per_fold = par::try_map(&plan.folds, |fold| -> Result<Vec<Prediction>, EvalError> {
        let train: Vec<(&P::Repr, EmotionLabel)> = fold
            .train
            .iter()
            .map(|&i| (&reprs[slot[&i]], label(i)))
            .collect();
        let model = pipeline.fit(&train)?;
        fold.test
            .iter()
            .map(|&i| {
                Ok(Prediction {
                    truth: label(i),
                    predicted: pipeline.predict(&model, &reprs[slot[&i]])?,
                    task: insts[i].task,
                    subject: insts[i].subject_id.clone(),
                })
            })
            .collect()
    })?;
    let fold_accuracies = per_fold
        .iter()
        .map(|p| {
            let hits = p.iter().filter(|x| x.truth == x.predicted).count();
            (p.len(), if p.is_empty() { 0.0 } else { ratio(hits, p.len()) })
        })
        .collect();
    let predictions: Vec<Prediction> = per_fold.into_iter().flatten().collect();
    Ok(ProtocolRun {
        report: evaluate(&predictions)?,
        predictions,
        fold_accuracies,
    })
}

/// Class subsets of increasing size, each adding to Neutral and the
/// high-arousal labels first.
pub fn default_subsets() -> Vec<Vec<EmotionLabel>> {
    use EmotionLabel::*;
    vec![
        vec![Annoyance, Neutral],
        vec![Joy, Annoyance, Neutral],
        vec![Joy, Sadness, Annoyance, Neutral],
        vec![Joy, Pleasure, Sadness, Annoyance, Neutral],
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    pub labels: Vec<EmotionLabel>,
    pub report: EvalReport,
}

/// Retrains and evaluates on each class subset. Returns per-subset results
/// and the overall accuracy keyed by subset size (a later subset of the same
/// size replaces an earlier one).
pub fn class_subset_sweep<P: Pipeline>(
    dataset: &Dataset,
    pipeline: &P,
    subsets: &[Vec<EmotionLabel>],
    protocol: Protocol,
    seed: u64,
) -> Result<(Vec<SubsetResult>, BTreeMap<usize, f64>), EvalError> {
    let mut results = Vec::with_capacity(subsets.len());
    let mut by_size = BTreeMap::new();
    for subset in subsets {
        let distinct: BTreeSet<EmotionLabel> = subset.iter().copied().collect();
        if distinct.len() < 2 {
            return Err(EvalError::InsufficientData(format!(
                "class subset {subset:?} needs at least 2 labels"
            )));
        }
        let filtered = dataset.filter(|i| i.label.is_some_and(|l| distinct.contains(&l)));
        let plan = make_splits(&filtered, protocol, seed)?;
        let run = run_protocol(&filtered, pipeline, &plan)?;
        by_size.insert(distinct.len(), run.report.accuracy_overall);
        results.push(SubsetResult {
            labels: distinct.into_iter().collect(),
            report: run.report,
        });
    }
    Ok((results, by_size))
}
