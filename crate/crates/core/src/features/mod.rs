//! Emotion-related trajectory features.
//!
//! From a prepared (uniformly sampled, unit-box, origin-aligned) segment we
//! derive 13 kinematic sequences (position, velocity, acceleration and jerk
//! per axis plus the step length between samples), two expressive sequences
//! (slope angle and curvature) and five scalars (speed entropy, the raw
//! spatial extent per axis and the duration). The 39-value static summary is
//! the mean, variance and standard deviation of each kinematic sequence.

mod pca;

pub use pca::{pca_fit, pca_project, PcaModel, PcaOptions};

use thiserror::Error;

use crate::dtw::FeatureSequence;
use crate::preprocess::{norm3, sub3, RawExtent};
use crate::telemetry::EndEffectorStream;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("TooShort: {0}")]
    TooShort(String),
    #[error("NonUniformSampling: sample spacing varies by {0:e} s")]
    NonUniformSampling(f64),
    #[error("InsufficientData: {0}")]
    InsufficientData(String),
    #[error("DegenerateData: {0}")]
    DegenerateData(String),
    #[error("DimensionMismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub const KINEMATIC_CHANNELS: usize = 13;
pub const SEQUENCE_CHANNELS: usize = 15;
pub const STATIC_LEN: usize = 3 * KINEMATIC_CHANNELS;
pub const ENERGY_BINS: usize = 32;

pub const KINEMATIC_CHANNEL_NAMES: [&str; KINEMATIC_CHANNELS] = [
    "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az", "jx", "jy", "jz", "pos_diff",
];

pub const SCALAR_NAMES: [&str; 5] = ["energy", "extent_x", "extent_y", "extent_z", "time_range"];

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub velocity: Vec<[f64; 3]>,
    pub acceleration: Vec<[f64; 3]>,
    pub jerk: Vec<[f64; 3]>,
}

/// First derivative on a uniform grid: central differences inside and
/// second-order one-sided stencils at both ends, so quadratics are
/// differentiated exactly everywhere.
fn differentiate(x: &[[f64; 3]], dt: f64) -> Vec<[f64; 3]> {
    let n = x.len();
    let h2 = 2.0 * dt;
    let mut d = vec![[0.0; 3]; n];
    for a in 0..3 {
        d[0][a] = (-3.0 * x[0][a] + 4.0 * x[1][a] - x[2][a]) / h2;
        for i in 1..n - 1 {
            d[i][a] = (x[i + 1][a] - x[i - 1][a]) / h2;
        }
        d[n - 1][a] = (3.0 * x[n - 1][a] - 4.0 * x[n - 2][a] + x[n - 3][a]) / h2;
    }
    d
}

/// Velocity, acceleration and jerk by repeated differentiation.
pub fn derivatives(positions: &[[f64; 3]], dt: f64) -> Result<Derivatives, FeatureError> {
    if positions.len() < crate::telemetry::MIN_INSTANCE_SAMPLES {
        return Err(FeatureError::TooShort(format!(
            "{} samples, derivatives need {}",
            positions.len(),
            crate::telemetry::MIN_INSTANCE_SAMPLES
        )));
    }
    let velocity = differentiate(positions, dt);
    let acceleration = differentiate(&velocity, dt);
    let jerk = differentiate(&acceleration, dt);
    Ok(Derivatives {
        velocity,
        acceleration,
        jerk,
    })
}

fn need(points: &[[f64; 3]], n: usize, what: &str) -> Result<(), FeatureError> {
    if points.len() < n {
        return Err(FeatureError::TooShort(format!(
            "{what} needs {n} samples, got {}",
            points.len()
        )));
    }
    Ok(())
}

/// Euclidean length of each step, `n - 1` values.
pub fn position_difference(points: &[[f64; 3]]) -> Result<Vec<f64>, FeatureError> {
    need(points, 2, "position difference")?;
    Ok(points.windows(2).map(|w| norm3(sub3(w[1], w[0]))).collect())
}

/// Elevation of each step above the horizontal plane, in `[-pi/2, pi/2]`.
/// Zero-length steps give 0.
pub fn slope_angle(points: &[[f64; 3]]) -> Result<Vec<f64>, FeatureError> {
    need(points, 2, "slope angle")?;
    Ok(points
        .windows(2)
        .map(|w| {
            let d = sub3(w[1], w[0]);
            d[2].atan2(d[0].hypot(d[1]))
        })
        .collect())
}

/// Menger curvature of the circle through three points; 0 when collinear.
pub fn menger_curvature(p1: [f64; 3], p2: [f64; 3], p3: [f64; 3]) -> f64 {
    let a = sub3(p2, p1);
    let b = sub3(p3, p2);
    let c = sub3(p3, p1);
    let cross = [
        a[1] * c[2] - a[2] * c[1],
        a[2] * c[0] - a[0] * c[2],
        a[0] * c[1] - a[1] * c[0],
    ];
    let denom = norm3(a) * norm3(b) * norm3(c);
    if denom == 0.0 {
        return 0.0;
    }
    // 4 * area = 2 * |a x c|
    2.0 * norm3(cross) / denom
}

/// Curvature of each consecutive point triple, `n - 2` values.
pub fn curvature(points: &[[f64; 3]]) -> Result<Vec<f64>, FeatureError> {
    need(points, 3, "curvature")?;
    Ok(points
        .windows(3)
        .map(|w| menger_curvature(w[0], w[1], w[2]))
        .collect())
}

/// Shannon entropy in bits of a 32-bin histogram spanning `[0, max]`.
pub fn speed_entropy(speeds: &[f64]) -> f64 {
    let max = speeds.iter().copied().fold(0.0, f64::max);
    if speeds.is_empty() || max <= 0.0 {
        return 0.0;
    }
    let mut bins = [0usize; ENERGY_BINS];
    for &s in speeds {
        let b = ((s / max) * ENERGY_BINS as f64).floor() as usize;
        bins[b.min(ENERGY_BINS - 1)] += 1;
    }
    let n = speeds.len() as f64;
    bins.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Trajectory energy: entropy of the speed distribution, in bits.
pub fn energy(segment: &EndEffectorStream) -> Result<f64, FeatureError> {
    let pts = segment.values();
    need(&pts, 2, "energy")?;
    let speeds: Vec<f64> = if pts.len() >= 3 {
        differentiate(&pts, segment.mean_period())
            .into_iter()
            .map(norm3)
            .collect()
    } else {
        vec![norm3(sub3(pts[1], pts[0])) / segment.duration(); 2]
    };
    Ok(speed_entropy(&speeds))
}

/// Population mean, variance and standard deviation.
pub fn mean_var_std(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var, var.sqrt())
}

/// The 20 features of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub position: Vec<[f64; 3]>,
    pub velocity: Vec<[f64; 3]>,
    pub acceleration: Vec<[f64; 3]>,
    pub jerk: Vec<[f64; 3]>,
    pub position_difference: Vec<f64>,
    pub slope_angle: Vec<f64>,
    pub curvature: Vec<f64>,
    pub energy: f64,
    pub spatial_extent: [f64; 3],
    pub time_range: f64,
    /// `(mean, variance, std)` per kinematic channel, in
    /// [`KINEMATIC_CHANNEL_NAMES`] order.
    pub statics: Vec<f64>,
}

impl FeatureBundle {
    /// The 13 kinematic sequences in [`KINEMATIC_CHANNEL_NAMES`] order.
    pub fn kinematic_channels(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(KINEMATIC_CHANNELS);
        for series in [&self.position, &self.velocity, &self.acceleration, &self.jerk] {
            for a in 0..3 {
                out.push(series.iter().map(|v| v[a]).collect());
            }
        }
        out.push(self.position_difference.clone());
        out
    }

    /// `[energy, extent_x, extent_y, extent_z, time_range]`.
    pub fn scalars(&self) -> [f64; 5] {
        [
            self.energy,
            self.spatial_extent[0],
            self.spatial_extent[1],
            self.spatial_extent[2],
            self.time_range,
        ]
    }

    /// The 15-channel frame stack fed to DTW.
    ///
    /// Frames sit on the interior samples `1..n-1`: point-wise channels are
    /// read at the sample, the step length and slope of the step arriving at
    /// it, and the curvature of the triple centred on it.
    pub fn sequence(&self) -> FeatureSequence {
        let n = self.position.len();
        let mut frames = Vec::with_capacity((n - 2) * SEQUENCE_CHANNELS);
        for k in 1..n - 1 {
            for series in [&self.position, &self.velocity, &self.acceleration, &self.jerk] {
                frames.extend_from_slice(&series[k]);
            }
            frames.push(self.position_difference[k - 1]);
            frames.push(self.slope_angle[k - 1]);
            frames.push(self.curvature[k - 1]);
        }
        FeatureSequence::new(SEQUENCE_CHANNELS, frames).expect("frame stack is well formed")
    }
}

/// Extracts every feature from a prepared segment.
pub fn build_bundle(segment: &EndEffectorStream, raw: RawExtent) -> Result<FeatureBundle, FeatureError> {
    let times = segment.times();
    let dt = segment.mean_period();
    let jitter = times
        .windows(2)
        .map(|w| ((w[1] - w[0]) - dt).abs())
        .fold(0.0, f64::max);
    if jitter > 1e-6 * dt.max(1e-9) + 1e-12 {
        return Err(FeatureError::NonUniformSampling(jitter));
    }
    let position = segment.values();
    let d = derivatives(&position, dt)?;
    let position_difference = position_difference(&position)?;
    let speeds: Vec<f64> = d.velocity.iter().copied().map(norm3).collect();
    let mut bundle = FeatureBundle {
        slope_angle: slope_angle(&position)?,
        curvature: curvature(&position)?,
        energy: speed_entropy(&speeds),
        spatial_extent: raw.extent,
        time_range: raw.duration,
        position,
        velocity: d.velocity,
        acceleration: d.acceleration,
        jerk: d.jerk,
        position_difference,
        statics: Vec::new(),
    };
    bundle.statics = bundle
        .kinematic_channels()
        .iter()
        .flat_map(|c| {
            let (m, v, s) = mean_var_std(c);
            [m, v, s]
        })
        .collect();
    debug_assert!(bundle.statics.iter().all(|v| v.is_finite()));
    Ok(bundle)
}
