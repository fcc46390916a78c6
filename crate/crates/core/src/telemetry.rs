//! Data model and on-disk format for robot motion telemetry.
//!
//! A dataset directory holds one JSON metadata file per task instance plus
//! two CSV files (end-effector and joint samples):
//!
//! ```text
//! <root>/<subject>/<task>_<category>/<label>_<rep>.json
//! <root>/<subject>/<task>_<category>/<label>_<rep>_ee.csv      t,x,y,z
//! <root>/<subject>/<task>_<category>/<label>_<rep>_joints.csv  t,q1,...,q6
//! ```
//!
//! Numbers are written as the shortest decimal text that parses back to the
//! same `f64`, so a write/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("EmptyInput: no data rows")]
    EmptyInput,
    #[error("NonMonotonicTime: timestamp at row {row} does not increase")]
    NonMonotonicTime { row: usize },
    #[error("MalformedRow: row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("InvalidInstance: {0}")]
    InvalidInstance(String),
    #[error("UnknownName: {0:?}")]
    UnknownName(String),
    #[error("IoFailure: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("SchemaViolation: {path}: {message}")]
    SchemaViolation { path: PathBuf, message: String },
}

impl TelemetryError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn schema(path: &Path, message: impl fmt::Display) -> Self {
        Self::SchemaViolation {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

/// The five affective states, one per circumplex quadrant plus the origin.
///
/// Declaration order is the canonical class order used for tie-breaking
/// and report layout.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Joy,
    Pleasure,
    Sadness,
    Annoyance,
    Neutral,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 5] = [
        EmotionLabel::Joy,
        EmotionLabel::Pleasure,
        EmotionLabel::Sadness,
        EmotionLabel::Annoyance,
        EmotionLabel::Neutral,
    ];

    pub fn valence_sign(self) -> i8 {
        match self {
            Self::Joy | Self::Pleasure => 1,
            Self::Sadness | Self::Annoyance => -1,
            Self::Neutral => 0,
        }
    }

    pub fn arousal_sign(self) -> i8 {
        match self {
            Self::Joy | Self::Annoyance => 1,
            Self::Pleasure | Self::Sadness => -1,
            Self::Neutral => 0,
        }
    }

    /// Position in [`EmotionLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Joy => "joy",
            Self::Pleasure => "pleasure",
            Self::Sadness => "sadness",
            Self::Annoyance => "annoyance",
            Self::Neutral => "neutral",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| TelemetryError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskName {
    Lw,
    Star,
    Stir,
    S,
    Triangle,
    Drink,
    Knock,
    Throw,
    Wave,
}

impl TaskName {
    pub const ALL: [TaskName; 9] = [
        TaskName::Lw,
        TaskName::Star,
        TaskName::Stir,
        TaskName::S,
        TaskName::Triangle,
        TaskName::Drink,
        TaskName::Knock,
        TaskName::Throw,
        TaskName::Wave,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Self::Lw => "lw",
            Self::Star => "star",
            Self::Stir => "stir",
            Self::S => "s",
            Self::Triangle => "triangle",
            Self::Drink => "drink",
            Self::Knock => "knock",
            Self::Throw => "throw",
            Self::Wave => "wave",
        }
    }

    /// Drawing tasks can also be performed as line tracing.
    pub fn supports_line_tracing(self) -> bool {
        matches!(
            self,
            Self::Lw | Self::Star | Self::Stir | Self::S | Self::Triangle
        )
    }
}

impl FromStr for TaskName {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.slug().eq_ignore_ascii_case(s))
            .ok_or_else(|| TelemetryError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskCategory {
    MidAir,
    LineTracing,
}

impl TaskCategory {
    pub fn slug(self) -> &'static str {
        match self {
            Self::MidAir => "air",
            Self::LineTracing => "trace",
        }
    }
}

impl FromStr for TaskCategory {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "air" => Ok(Self::MidAir),
            "trace" => Ok(Self::LineTracing),
            _ => Err(TelemetryError::UnknownName(s.to_string())),
        }
    }
}

/// A (gesture, category) pair; 14 combinations are valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskKind {
    name: TaskName,
    category: TaskCategory,
}

impl TaskKind {
    pub fn new(name: TaskName, category: TaskCategory) -> Result<Self, TelemetryError> {
        if category == TaskCategory::LineTracing && !name.supports_line_tracing() {
            return Err(TelemetryError::UnknownName(format!(
                "{}_{}",
                name.slug(),
                category.slug()
            )));
        }
        Ok(Self { name, category })
    }

    pub fn name(self) -> TaskName {
        self.name
    }

    pub fn category(self) -> TaskCategory {
        self.category
    }

    /// All 14 valid tasks: nine mid-air gestures, then five line-tracing tasks.
    pub fn all() -> Vec<TaskKind> {
        let air = TaskName::ALL.into_iter().map(|name| TaskKind {
            name,
            category: TaskCategory::MidAir,
        });
        let trace = TaskName::ALL
            .into_iter()
            .filter(|n| n.supports_line_tracing())
            .map(|name| TaskKind {
                name,
                category: TaskCategory::LineTracing,
            });
        air.chain(trace).collect()
    }

    /// `<task>_<category>`, e.g. `lw_air`.
    pub fn slug(self) -> String {
        format!("{}_{}", self.name.slug(), self.category.slug())
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

impl FromStr for TaskKind {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, category) = s
            .rsplit_once('_')
            .ok_or_else(|| TelemetryError::UnknownName(s.to_string()))?;
        TaskKind::new(name.parse()?, category.parse()?)
    }
}

/// One timestamped sample with `N` value channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const N: usize> {
    pub t: f64,
    pub values: [f64; N],
}

/// A time-ordered sample stream: non-empty, strictly increasing
/// timestamps, finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream<const N: usize> {
    samples: Vec<Sample<N>>,
}

/// End-effector positions in meters.
pub type EndEffectorStream = Stream<3>;
/// Six joint angles in radians.
pub type JointStream = Stream<6>;

impl<const N: usize> Stream<N> {
    pub fn new(samples: Vec<Sample<N>>) -> Result<Self, TelemetryError> {
        if samples.is_empty() {
            return Err(TelemetryError::EmptyInput);
        }
        for (row, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || s.values.iter().any(|v| !v.is_finite()) {
                return Err(TelemetryError::MalformedRow {
                    row,
                    reason: "non-finite value".into(),
                });
            }
            if row > 0 && s.t <= samples[row - 1].t {
                return Err(TelemetryError::NonMonotonicTime { row });
            }
        }
        Ok(Self { samples })
    }

    /// Builds a stream from parallel time and value slices.
    pub fn from_parts(times: &[f64], values: &[[f64; N]]) -> Result<Self, TelemetryError> {
        if times.len() != values.len() {
            return Err(TelemetryError::InvalidInstance(format!(
                "{} timestamps for {} samples",
                times.len(),
                values.len()
            )));
        }
        Self::new(
            times
                .iter()
                .zip(values)
                .map(|(&t, &values)| Sample { t, values })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[Sample<N>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn values(&self) -> Vec<[f64; N]> {
        self.samples.iter().map(|s| s.values).collect()
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Mean spacing between samples; zero for a single sample.
    pub fn mean_period(&self) -> f64 {
        if self.samples.len() < 2 {
            0.0
        } else {
            self.duration() / (self.samples.len() - 1) as f64
        }
    }

    /// Sub-stream over the inclusive index range.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            samples: self.samples[start..=end].to_vec(),
        }
    }

    /// Applies `f` to each value vector, keeping timestamps.
    pub fn map_values(&self, f: impl Fn(&[f64; N]) -> [f64; N]) -> Result<Self, TelemetryError> {
        Self::new(
            self.samples
                .iter()
                .map(|s| Sample {
                    t: s.t,
                    values: f(&s.values),
                })
                .collect(),
        )
    }

    fn to_csv(&self, header: &[&str]) -> String {
        let mut out = header.join(",");
        out.push('\n');
        for s in &self.samples {
            out.push_str(&fmt_number(s.t));
            for v in &s.values {
                out.push(',');
                out.push_str(&fmt_number(*v));
            }
            out.push('\n');
        }
        out
    }
}

const EE_HEADER: [&str; 4] = ["t", "x", "y", "z"];
const JOINT_HEADER: [&str; 7] = ["t", "q1", "q2", "q3", "q4", "q5", "q6"];

/// Shortest decimal text that round-trips to the same `f64`.
fn fmt_number(v: f64) -> String {
    format!("{v}")
}

fn parse_stream<const N: usize>(text: &str, header: &[&str]) -> Result<Stream<N>, TelemetryError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| TelemetryError::MalformedRow {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(TelemetryError::MalformedRow {
            row: 0,
            reason: format!("expected header {}", header.join(",")),
        });
    }
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| TelemetryError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if record.len() != N + 1 {
            return Err(TelemetryError::MalformedRow {
                row,
                reason: format!("expected {} fields, found {}", N + 1, record.len()),
            });
        }
        let mut fields = [0.0; 8];
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| TelemetryError::MalformedRow {
                row,
                reason: format!("non-numeric field {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(TelemetryError::MalformedRow {
                    row,
                    reason: format!("non-finite field {field:?}"),
                });
            }
            fields[i] = v;
        }
        let mut values = [0.0; N];
        values.copy_from_slice(&fields[1..=N]);
        if let Some(prev) = samples.last().map(|s: &Sample<N>| s.t) {
            if fields[0] <= prev {
                return Err(TelemetryError::NonMonotonicTime { row });
            }
        }
        samples.push(Sample {
            t: fields[0],
            values,
        });
    }
    Stream::new(samples)
}

/// Parses an end-effector CSV with header `t,x,y,z`.
pub fn parse_ee_stream(text: &str) -> Result<EndEffectorStream, TelemetryError> {
    parse_stream(text, &EE_HEADER)
}

/// Parses a joint CSV with header `t,q1,...,q6`.
pub fn parse_joint_stream(text: &str) -> Result<JointStream, TelemetryError> {
    parse_stream(text, &JOINT_HEADER)
}

pub fn ee_stream_to_csv(stream: &EndEffectorStream) -> String {
    stream.to_csv(&EE_HEADER)
}

pub fn joint_stream_to_csv(stream: &JointStream) -> String {
    stream.to_csv(&JOINT_HEADER)
}

/// Fewest end-effector samples an instance may have: jerk takes three
/// derivative passes.
pub const MIN_INSTANCE_SAMPLES: usize = 8;

/// One segmented repetition of a task by one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub subject_id: String,
    pub task: TaskKind,
    pub label: Option<EmotionLabel>,
    pub repetition: u32,
    pub ee: EndEffectorStream,
    pub joints: JointStream,
}

impl TaskInstance {
    pub fn new(
        subject_id: impl Into<String>,
        task: TaskKind,
        label: Option<EmotionLabel>,
        repetition: u32,
        ee: EndEffectorStream,
        joints: JointStream,
    ) -> Result<Self, TelemetryError> {
        let instance = Self {
            subject_id: subject_id.into(),
            task,
            label,
            repetition,
            ee,
            joints,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<(), TelemetryError> {
        if self.subject_id.is_empty()
            || self
                .subject_id
                .contains(|c: char| c == '/' || c == '\\' || c.is_whitespace())
        {
            return Err(TelemetryError::InvalidInstance(format!(
                "subject id {:?} is not a valid path component",
                self.subject_id
            )));
        }
        if self.ee.len() < MIN_INSTANCE_SAMPLES {
            return Err(TelemetryError::InvalidInstance(format!(
                "{} end-effector samples, need at least {MIN_INSTANCE_SAMPLES}",
                self.ee.len()
            )));
        }
        let period = self.ee.mean_period().max(self.joints.mean_period());
        let tol = period * (1.0 + 1e-9);
        if (self.ee.start_time() - self.joints.start_time()).abs() > tol
            || (self.ee.end_time() - self.joints.end_time()).abs() > tol
        {
            return Err(TelemetryError::InvalidInstance(format!(
                "end-effector [{}, {}] and joint [{}, {}] intervals differ by more than one sample period",
                self.ee.start_time(),
                self.ee.end_time(),
                self.joints.start_time(),
                self.joints.end_time()
            )));
        }
        Ok(())
    }

    /// `<label>_<rep>` with the repetition zero-padded to two digits.
    pub fn file_stem(&self) -> String {
        let label = self.label.map_or("unlabeled", EmotionLabel::name);
        format!("{label}_{:02}", self.repetition)
    }
}

/// Key of the per-cell instance counts kept alongside a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ManifestKey {
    pub subject: String,
    pub task: TaskKind,
    pub label: Option<EmotionLabel>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    instances: Vec<TaskInstance>,
    manifest: BTreeMap<ManifestKey, usize>,
}

impl Dataset {
    pub fn new(instances: Vec<TaskInstance>) -> Self {
        let mut manifest = BTreeMap::new();
        for inst in &instances {
            *manifest
                .entry(ManifestKey {
                    subject: inst.subject_id.clone(),
                    task: inst.task,
                    label: inst.label,
                })
                .or_insert(0) += 1;
        }
        Self {
            instances,
            manifest,
        }
    }

    pub fn instances(&self) -> &[TaskInstance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<TaskInstance> {
        self.instances
    }

    pub fn manifest(&self) -> &BTreeMap<ManifestKey, usize> {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self
            .manifest
            .keys()
            .map(|k| k.subject.clone())
            .collect();
        s.dedup();
        s
    }

    pub fn tasks(&self) -> Vec<TaskKind> {
        let mut t: Vec<TaskKind> = self.manifest.keys().map(|k| k.task).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn labels(&self) -> Vec<EmotionLabel> {
        let mut l: Vec<EmotionLabel> = self.manifest.keys().filter_map(|k| k.label).collect();
        l.sort();
        l.dedup();
        l
    }

    /// Instances for which `keep` holds, in their original order.
    pub fn filter(&self, keep: impl Fn(&TaskInstance) -> bool) -> Dataset {
        Dataset::new(self.instances.iter().filter(|i| keep(i)).cloned().collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceMeta {
    subject: String,
    task: String,
    category: String,
    label: Option<EmotionLabel>,
    repetition: u32,
    ee_file: String,
    joints_file: String,
}

/// Where `write_instance` put an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub metadata_path: PathBuf,
    pub key: ManifestKey,
    pub repetition: u32,
}

/// Writes the metadata JSON and both CSV files for one instance.
pub fn write_instance(instance: &TaskInstance, dir: &Path) -> Result<ManifestEntry, TelemetryError> {
    instance.validate()?;
    let cell = dir.join(&instance.subject_id).join(instance.task.slug());
    fs::create_dir_all(&cell).map_err(|e| TelemetryError::io(&cell, e))?;
    let stem = instance.file_stem();
    let ee_file = format!("{stem}_ee.csv");
    let joints_file = format!("{stem}_joints.csv");
    let meta = InstanceMeta {
        subject: instance.subject_id.clone(),
        task: instance.task.name().slug().to_string(),
        category: instance.task.category().slug().to_string(),
        label: instance.label,
        repetition: instance.repetition,
        ee_file: ee_file.clone(),
        joints_file: joints_file.clone(),
    };
    let write = |path: PathBuf, body: String| -> Result<(), TelemetryError> {
        fs::write(&path, body).map_err(|e| TelemetryError::io(&path, e))
    };
    write(cell.join(&ee_file), ee_stream_to_csv(&instance.ee))?;
    write(cell.join(&joints_file), joint_stream_to_csv(&instance.joints))?;
    let metadata_path = cell.join(format!("{stem}.json"));
    let mut json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    json.push('\n');
    write(metadata_path.clone(), json)?;
    Ok(ManifestEntry {
        metadata_path,
        key: ManifestKey {
            subject: instance.subject_id.clone(),
            task: instance.task,
            label: instance.label,
        },
        repetition: instance.repetition,
    })
}

pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<Vec<ManifestEntry>, TelemetryError> {
    par::try_map(dataset.instances(), |inst| write_instance(inst, dir))
}

fn load_instance(meta_path: &Path) -> Result<TaskInstance, TelemetryError> {
    let read = |path: &Path| fs::read_to_string(path).map_err(|e| TelemetryError::io(path, e));
    let meta: InstanceMeta = serde_json::from_str(&read(meta_path)?)
        .map_err(|e| TelemetryError::schema(meta_path, e))?;
    let task = TaskKind::new(
        meta.task
            .parse()
            .map_err(|e| TelemetryError::schema(meta_path, e))?,
        meta.category
            .parse()
            .map_err(|e| TelemetryError::schema(meta_path, e))?,
    )
    .map_err(|e| TelemetryError::schema(meta_path, e))?;
    let base = meta_path.parent().unwrap_or(Path::new("."));
    let ee_path = base.join(&meta.ee_file);
    let joints_path = base.join(&meta.joints_file);
    let ee = parse_ee_stream(&read(&ee_path)?).map_err(|e| TelemetryError::schema(&ee_path, e))?;
    let joints = parse_joint_stream(&read(&joints_path)?)
        .map_err(|e| TelemetryError::schema(&joints_path, e))?;
    TaskInstance::new(meta.subject, task, meta.label, meta.repetition, ee, joints)
        .map_err(|e| TelemetryError::schema(meta_path, e))
}

/// Source of datasets in a foreign on-disk layout.
///
/// External corpora whose column layout differs from the native one plug in
/// here and hand back a validated [`Dataset`].
pub trait DatasetAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn load(&self, root: &Path) -> Result<Dataset, TelemetryError>;
}

/// The layout written by [`write_instance`].
#[derive(Debug, Clone, Copy, Default)]
pub struct NativeLayout;

impl DatasetAdapter for NativeLayout {
    fn name(&self) -> &str {
        "native"
    }

    fn load(&self, root: &Path) -> Result<Dataset, TelemetryError> {
        load_dataset(root)
    }
}

/// Loads every instance under `dir`, ordered lexicographically by
/// metadata path.
pub fn load_dataset(dir: &Path) -> Result<Dataset, TelemetryError> {
    if !dir.is_dir() {
        return Err(TelemetryError::io(
            dir,
            io::Error::new(io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut paths = Vec::new();
    for entry in walkdir::WalkDir::new(dir).min_depth(3).max_depth(3) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            TelemetryError::Io {
                path,
                source: e.into_io_error().unwrap_or_else(|| io::Error::other("walk failed")),
            }
        })?;
        if entry.file_type().is_file()
            && entry.path().extension().is_some_and(|ext| ext == "json")
        {
            paths.push(entry.into_path());
        }
    }
    paths.sort();
    let instances = par::try_map(&paths, |p| load_instance(p))?;
    Ok(Dataset::new(instances))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_instance(label: Option<EmotionLabel>) -> TaskInstance {
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.02).collect();
        let ee: Vec<[f64; 3]> = (0..10).map(|i| [i as f64 * 0.1, 0.5, -0.25]).collect();
        let q: Vec<[f64; 6]> = (0..10)
            .map(|i| [0.1 * i as f64, -1.0, 1.0 / 3.0, 2.0, 1e-7, 6.5])
            .collect();
        TaskInstance::new(
            "s01",
            "lw_air".parse().unwrap(),
            label,
            3,
            EndEffectorStream::from_parts(&times, &ee).unwrap(),
            JointStream::from_parts(&times, &q).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn emotion_signs_match_circumplex() {
        use EmotionLabel::*;
        let signs: Vec<(i8, i8)> = EmotionLabel::ALL
            .iter()
            .map(|l| (l.valence_sign(), l.arousal_sign()))
            .collect();
        assert_eq!(signs, vec![(1, 1), (1, -1), (-1, -1), (-1, 1), (0, 0)]);
        assert_eq!(Annoyance.index(), 3);
        assert_eq!("Sadness".parse::<EmotionLabel>().unwrap(), Sadness);
    }

    #[test]
    fn fourteen_tasks() {
        let all = TaskKind::all();
        assert_eq!(all.len(), 14);
        assert!(TaskKind::new(TaskName::Wave, TaskCategory::LineTracing).is_err());
        for t in all {
            assert_eq!(t.slug().parse::<TaskKind>().unwrap(), t);
        }
        assert_eq!("s_trace".parse::<TaskKind>().unwrap().name(), TaskName::S);
    }

    #[test]
    fn parse_ee_examples() {
        assert!(matches!(
            parse_ee_stream("t,x,y,z\n"),
            Err(TelemetryError::EmptyInput)
        ));
        let s = parse_ee_stream("t,x,y,z\n0,0,0,0\n0.02,0.1,0,0\n0.04,0.2,0,0\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.duration(), 0.04);
        assert_eq!(s.samples()[1].values, [0.1, 0.0, 0.0]);
        assert!(matches!(
            parse_ee_stream("t,x,y,z\n0,0,0,0\n0.02,0,0,0\n0.01,0,0,0\n"),
            Err(TelemetryError::NonMonotonicTime { row: 2 })
        ));
        assert!(matches!(
            parse_ee_stream("t,x,y,z\n0,0,0\n"),
            Err(TelemetryError::MalformedRow { .. })
        ));
        assert!(matches!(
            parse_ee_stream("t,x,y,z\n0,a,0,0\n"),
            Err(TelemetryError::MalformedRow { .. })
        ));
    }

    #[test]
    fn parse_joint_examples() {
        let s = parse_joint_stream("t,q1,q2,q3,q4,q5,q6\n0,1,2,3,4,5,6\n0.1,1,2,3,4,5,6\n").unwrap();
        assert_eq!(s.len(), 2);
        assert!(matches!(
            parse_joint_stream("t,q1,q2,q3,q4,q5,q6\n0,1,2,3,4,5\n"),
            Err(TelemetryError::MalformedRow { .. })
        ));
        assert!(matches!(
            parse_joint_stream("t,q1,q2,q3,q4,q5,q6\n0,1,2,NaN,4,5,6\n"),
            Err(TelemetryError::MalformedRow { .. })
        ));
    }

    #[test]
    fn instance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let inst = ramp_instance(Some(EmotionLabel::Joy));
        let entry = write_instance(&inst, dir.path()).unwrap();
        assert!(entry.metadata_path.ends_with("s01/lw_air/joy_03.json"));
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.instances(), &[inst]);
    }

    #[test]
    fn unlabeled_instance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let inst = ramp_instance(None);
        let entry = write_instance(&inst, dir.path()).unwrap();
        let json = fs::read_to_string(entry.metadata_path).unwrap();
        assert!(json.contains("\"label\": null"));
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.instances()[0].label, None);
    }

    #[test]
    fn unwritable_dir_is_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_instance(&ramp_instance(None), &blocker).unwrap_err();
        assert!(matches!(err, TelemetryError::Io { .. }));
    }

    #[test]
    fn corrupt_csv_names_file() {
        let dir = tempfile::tempdir().unwrap();
        for rep in 0..3 {
            let mut inst = ramp_instance(Some(EmotionLabel::Neutral));
            inst.repetition = rep;
            write_instance(&inst, dir.path()).unwrap();
        }
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.len(), 3);
        let key = ds.manifest().keys().next().unwrap();
        assert_eq!(ds.manifest()[key], 3);

        let bad = dir.path().join("s01/lw_air/neutral_01_ee.csv");
        fs::write(&bad, "t,x,y,z\n0,0,0,0\n0.01,zz,0,0\n").unwrap();
        match load_dataset(dir.path()) {
            Err(TelemetryError::SchemaViolation { path, .. }) => assert_eq!(path, bad),
            other => panic!("expected schema violation, got {other:?}"),
        }
    }

    #[test]
    fn short_instance_rejected() {
        let times = [0.0, 0.02, 0.04];
        let ee = EndEffectorStream::from_parts(&times, &[[0.0; 3]; 3]).unwrap();
        let q = JointStream::from_parts(&times, &[[0.0; 6]; 3]).unwrap();
        let err = TaskInstance::new("s01", "s_air".parse().unwrap(), None, 0, ee, q).unwrap_err();
        assert!(matches!(err, TelemetryError::InvalidInstance(_)));
    }
}
