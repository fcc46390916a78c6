use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::path::TaskPath;
use super::profile::{EmotionProfile, SubjectStyle};
use super::SynthError;
use crate::telemetry::EndEffectorStream;
use crate::SAMPLE_RATE_HZ;

/// Hand speed of a neutral operator, m/s.
pub const BASE_SPEED: f64 = 0.15;

/// Maps the unit task box into the arm's workspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    /// Workspace position of the unit box centre, m.
    pub center: [f64; 3],
    /// Edge length of the unit box in the workspace, m.
    pub scale: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            center: [-0.35, -0.11, 0.22],
            scale: 0.2,
        }
    }
}

impl Placement {
    pub fn place(&self, u: [f64; 3]) -> [f64; 3] {
        [
            self.center[0] + self.scale * (u[0] - 0.5),
            self.center[1] + self.scale * (u[1] - 0.5),
            self.center[2] + self.scale * (u[2] - 0.5),
        ]
    }
}

const SUBSTEPS: usize = 10;
const NOISE_RAMP: f64 = 0.4;
const JERK_COMPONENTS: usize = 4;
const JERK_BAND: (f64, f64) = (3.0, 8.0);
/// Fraction of the nominal speed kept at the bottom of a micro-pause.
const PAUSE_FLOOR: f64 = 0.25;
/// Per-repetition spread of the nominal duration.
const DURATION_JITTER: f64 = 0.08;
/// Per-repetition spread of the task size.
const EXTENT_JITTER: f64 = 0.04;

struct Pause {
    center: f64,
    width: f64,
}

/// Smooth 0 -> 1 ramp at both ends of `[0, total]`.
fn envelope(t: f64, total: f64) -> f64 {
    let r = (t / NOISE_RAMP).min((total - t) / NOISE_RAMP).clamp(0.0, 1.0);
    (0.5 * PI * r).sin().powi(2)
}

/// Simulated hand trajectory along `path` at 50 Hz, in workspace meters.
///
/// The task is drawn `extent_scale` times larger than `placement.scale`
/// (with a small per-repetition spread) about the same centre.
/// Progress along the path follows a raised-cosine speed profile whose mean
/// is `BASE_SPEED * speed_scale * style.speed`, modulated by a slow speed
/// wobble and by micro-pauses that drop the speed to a quarter. Jerk noise
/// (a sum of random sinusoids in the 3-8 Hz band with jerk amplitude
/// `jerk_noise_amp`) and a tremor sinusoid are added on top, faded in and out
/// at the ends.
pub fn perturb(
    path: &TaskPath,
    placement: &Placement,
    profile: &EmotionProfile,
    style: &SubjectStyle,
    seed: u64,
) -> Result<EndEffectorStream, SynthError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speed = BASE_SPEED * profile.speed_scale * style.speed;
    let jitter = 1.0 + rng.gen_range(-DURATION_JITTER..=DURATION_JITTER);
    let size = profile.extent_scale * (1.0 + rng.gen_range(-EXTENT_JITTER..=EXTENT_JITTER));
    let placement = Placement {
        scale: placement.scale * size,
        ..*placement
    };
    let nominal = path.length() * placement.scale / speed * profile.duration_scale * jitter;

    let mut pauses = Vec::new();
    if profile.pause_prob > 0.0 {
        let mut t = 0.0;
        loop {
            t += -rng.gen_range(f64::EPSILON..1.0f64).ln() / profile.pause_prob;
            if t >= nominal {
                break;
            }
            pauses.push(Pause {
                center: t,
                width: rng.gen_range(0.25..0.5),
            });
        }
    }
    let total = nominal
        + pauses
            .iter()
            .map(|p| 0.5 * (1.0 - PAUSE_FLOOR) * p.width)
            .sum::<f64>();
    let wobble_freq = rng.gen_range(0.8..1.6);
    let wobble_phase = rng.gen_range(0.0..TAU);

    let weight = |t: f64| {
        let mut w = 1.0 - (TAU * t / total).cos();
        w *= 1.0 + profile.speed_wobble * (TAU * wobble_freq * t + wobble_phase).sin();
        for p in &pauses {
            let x = (t - p.center) / p.width;
            if x.abs() < 0.5 {
                w *= 1.0 - (1.0 - PAUSE_FLOOR) * (PI * x).cos().powi(2);
            }
        }
        w
    };

    let n = (total * SAMPLE_RATE_HZ).floor() as usize + 1;
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let h = dt / SUBSTEPS as f64;
    let mut progress = vec![0.0; n];
    let mut acc = 0.0;
    let mut prev = weight(0.0);
    for k in 1..n {
        for j in 1..=SUBSTEPS {
            let t = (k - 1) as f64 * dt + j as f64 * h;
            let w = weight(t);
            acc += 0.5 * (prev + w) * h;
            prev = w;
        }
        progress[k] = acc;
    }
    let finish = {
        // integrate the remainder up to `total` so the path ends on time
        let mut rest = acc;
        let t_last = (n - 1) as f64 * dt;
        let steps = SUBSTEPS;
        let hr = (total - t_last) / steps as f64;
        let mut p = weight(t_last);
        for j in 1..=steps {
            let w = weight(t_last + j as f64 * hr);
            rest += 0.5 * (p + w) * hr;
            p = w;
        }
        rest
    };
    let length = path.length();

    let jerk_amp = profile.jerk_noise_amp * style.jerk;
    let mut components = Vec::with_capacity(3 * JERK_COMPONENTS);
    for axis in 0..3 {
        for _ in 0..JERK_COMPONENTS {
            let f = rng.gen_range(JERK_BAND.0..JERK_BAND.1);
            let amp = jerk_amp / (TAU * f).powi(3) / JERK_COMPONENTS as f64;
            components.push((axis, f, rng.gen_range(0.0..TAU), amp));
        }
    }
    let tremor_amp = profile.tremor_amp * style.tremor;
    let tremor_freq = profile.tremor_freq * rng.gen_range(0.95..1.05);
    let tremor_phase = rng.gen_range(0.0..TAU);
    let tremor_dir = {
        let v: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-9);
        v.map(|c| c / norm)
    };

    let mut times = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for (k, &s) in progress.iter().enumerate() {
        let t = k as f64 * dt;
        let mut p = placement.place(path.point_at(s / finish * length));
        let env = envelope(t, total);
        if env > 0.0 {
            for &(axis, f, phase, amp) in &components {
                p[axis] += env * amp * (TAU * f * t + phase).sin();
            }
            if tremor_amp > 0.0 {
                let tr = env * tremor_amp * (TAU * tremor_freq * t + tremor_phase).sin();
                for axis in 0..3 {
                    p[axis] += tr * tremor_dir[axis];
                }
            }
        }
        times.push(t);
        points.push(p);
    }
    Ok(EndEffectorStream::from_parts(&times, &points)?)
}
