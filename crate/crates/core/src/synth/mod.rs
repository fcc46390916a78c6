//! Emotion-conditioned synthetic teleoperation data.
//!
//! A task template ([`task_path`]) is time-parameterized and perturbed
//! according to an [`EmotionProfile`] and a [`SubjectStyle`] ([`perturb`]),
//! then tracked by a six-joint arm ([`track`]) to produce paired end-effector
//! and joint streams. [`gen_dataset`] does this for every
//! (subject, task, emotion, repetition) cell with seeds derived from the
//! cell indices, so parallel and sequential generation agree exactly.

mod arm;
mod motion;
mod path;
mod profile;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::telemetry::{
    write_dataset, Dataset, EmotionLabel, EndEffectorStream, Stream, TaskInstance,
    TaskKind, TelemetryError,
};

pub use arm::{track, ArmModel, MAX_TRACKING_ERROR};
pub use motion::{perturb, Placement, BASE_SPEED};
pub use path::{task_path, TaskPath, CORNER_THRESHOLD};
pub use profile::{EmotionProfile, SubjectStyle, STYLE_RANGE};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("OutOfWorkspace: {0}")]
    OutOfWorkspace(String),
    #[error("IkDivergence: frame {frame} off by {error} m")]
    IkDivergence { frame: usize, error: f64 },
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error("IoFailure: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from a base seed and a list of indices.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Rounds to 9 significant digits.
pub fn quantize(v: f64) -> f64 {
    format!("{v:.8e}").parse().expect("formatted float parses")
}

fn quantize_stream<const N: usize>(s: &Stream<N>) -> Result<Stream<N>, TelemetryError> {
    s.map_values(|v| v.map(quantize))
}

pub fn subject_id(index: usize) -> String {
    format!("s{:02}", index + 1)
}

/// Everything besides the counts that determines a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub profiles: [EmotionProfile; 5],
    pub arm: ArmModel,
    pub placement: Placement,
}

impl Default for Generator {
    fn default() -> Self {
        Self {
            profiles: EmotionProfile::defaults(),
            arm: ArmModel::ur3_like(),
            placement: Placement::default(),
        }
    }
}

impl Generator {
    pub fn profile(&self, label: EmotionLabel) -> &EmotionProfile {
        &self.profiles[label.index()]
    }

    /// One labeled repetition.
    pub fn instance(
        &self,
        style: &SubjectStyle,
        task: TaskKind,
        label: EmotionLabel,
        repetition: u32,
        seed: u64,
    ) -> Result<TaskInstance, SynthError> {
        let hand = perturb(&task_path(task), &self.placement, self.profile(label), style, seed)?;
        let (joints, ee) = track(&self.arm, &hand)?;
        Ok(TaskInstance::new(
            style.subject_id.clone(),
            task,
            Some(label),
            repetition,
            quantize_stream::<3>(&ee)?,
            quantize_stream::<6>(&joints)?,
        )?)
    }

    /// `n_subjects x tasks x 5 emotions x reps` labeled instances, ordered by
    /// subject, task, emotion, then repetition.
    pub fn dataset(
        &self,
        n_subjects: usize,
        tasks: &[TaskKind],
        reps: usize,
        seed: u64,
    ) -> Result<Dataset, SynthError> {
        if n_subjects == 0 || tasks.is_empty() || reps == 0 {
            return Err(SynthError::InvalidConfig(
                "subjects, tasks and repetitions must all be at least 1".into(),
            ));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        let styles: Vec<SubjectStyle> = (0..n_subjects)
            .map(|s| SubjectStyle::draw(&subject_id(s), s as u64, seed))
            .collect();
        let per_subject = tasks.len() * 5 * reps;
        let instances = par::try_map_range(n_subjects * per_subject, |cell| {
            let s = cell / per_subject;
            let rest = cell % per_subject;
            let t = rest / (5 * reps);
            let e = rest / reps % 5;
            let r = rest % reps;
            let cell_seed = mix_seed(seed, &[1, s as u64, task_code(tasks[t]), e as u64, r as u64]);
            self.instance(&styles[s], tasks[t], EmotionLabel::ALL[e], r as u32, cell_seed)
        })?;
        Ok(Dataset::new(instances))
    }
}

fn task_code(task: TaskKind) -> u64 {
    TaskKind::all()
        .iter()
        .position(|&t| t == task)
        .expect("valid task") as u64
}

/// [`Generator::dataset`] with the default generator.
pub fn gen_dataset(
    n_subjects: usize,
    tasks: &[TaskKind],
    reps: usize,
    seed: u64,
) -> Result<Dataset, SynthError> {
    Generator::default().dataset(n_subjects, tasks, reps, seed)
}

/// File written next to a generated dataset.
pub const MANIFEST_FILE: &str = "generation_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationManifest {
    pub seed: u64,
    pub subjects: usize,
    pub tasks: Vec<String>,
    pub reps_per_cell: usize,
    pub instances: usize,
    pub profiles: Vec<EmotionProfile>,
    pub styles: Vec<SubjectStyle>,
    pub note: String,
}

impl GenerationManifest {
    pub fn new(generator: &Generator, subjects: usize, tasks: &[TaskKind], reps: usize, seed: u64) -> Self {
        Self {
            seed,
            subjects,
            tasks: tasks.iter().map(|t| t.slug()).collect(),
            reps_per_cell: reps,
            instances: subjects * tasks.len() * 5 * reps,
            profiles: generator.profiles.to_vec(),
            styles: (0..subjects)
                .map(|s| SubjectStyle::draw(&subject_id(s), s as u64, seed))
                .collect(),
            note: "profile magnitudes are generator calibration, not measured effect sizes".into(),
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{} instances: {} subjects x {} tasks ({}) x 5 emotions x {} reps, seed {}",
            self.instances,
            self.subjects,
            self.tasks.len(),
            self.tasks.join(","),
            self.reps_per_cell,
            self.seed
        )
    }
}

/// Writes the dataset in the native layout plus [`MANIFEST_FILE`].
pub fn write_generated(dataset: &Dataset, manifest: &GenerationManifest, dir: &Path) -> Result<(), SynthError> {
    write_dataset(dataset, dir)?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|source| SynthError::Io { path, source })
}

/// Concatenates movements separated by `rest` seconds of stillness, shifting
/// times so the result is one continuous 50 Hz recording.
pub fn session(moves: &[EndEffectorStream], rest: f64) -> Result<EndEffectorStream, SynthError> {
    let dt = 1.0 / crate::SAMPLE_RATE_HZ;
    let rest_samples = (rest * crate::SAMPLE_RATE_HZ).round() as usize;
    let mut points: Vec<[f64; 3]> = Vec::new();
    let hold = |points: &mut Vec<[f64; 3]>, p: [f64; 3]| {
        for _ in 0..rest_samples {
            points.push(p);
        }
    };
    for m in moves {
        let v = m.values();
        hold(&mut points, v[0]);
        points.extend(v.iter().copied());
    }
    if let Some(&last) = points.last() {
        hold(&mut points, last);
    }
    let times: Vec<f64> = (0..points.len()).map(|k| k as f64 * dt).collect();
    Ok(EndEffectorStream::from_parts(&times, &points)?)
}
