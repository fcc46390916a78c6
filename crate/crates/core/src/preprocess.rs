//! Segmentation, uniform resampling, bounding-box normalization and origin
//! alignment of end-effector trajectories.

use thiserror::Error;

use crate::telemetry::{EndEffectorStream, Sample, Stream, TelemetryError};
use crate::SAMPLE_RATE_HZ;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("DegenerateSegment: all three axes have zero extent")]
    DegenerateSegment,
    #[error("TooShort: {0}")]
    TooShort(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationConfig {
    /// Speed (m/s) at or above which the arm counts as moving.
    pub speed_threshold: f64,
    /// Segments shorter than this (seconds) are dropped.
    pub min_duration: f64,
    /// Consecutive samples needed to enter or leave the moving state.
    pub hysteresis_dwell: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            speed_threshold: 0.02,
            min_duration: 0.5,
            hysteresis_dwell: 5,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.speed_threshold.is_finite() && self.speed_threshold > 0.0) {
            return Err(PreprocessError::InvalidConfig(
                "speed_threshold must be positive".into(),
            ));
        }
        if !(self.min_duration.is_finite() && self.min_duration >= 0.0) {
            return Err(PreprocessError::InvalidConfig(
                "min_duration must be non-negative".into(),
            ));
        }
        if self.hysteresis_dwell == 0 {
            return Err(PreprocessError::InvalidConfig(
                "hysteresis_dwell must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Size of a segment before normalization erases it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawExtent {
    /// Per-axis `max - min` in meters.
    pub extent: [f64; 3],
    /// Seconds from first to last sample.
    pub duration: f64,
}

impl RawExtent {
    pub fn of(stream: &EndEffectorStream) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for s in stream.samples() {
            for a in 0..3 {
                lo[a] = lo[a].min(s.values[a]);
                hi[a] = hi[a].max(s.values[a]);
            }
        }
        Self {
            extent: [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]],
            duration: stream.duration(),
        }
    }
}

/// A segment located in its source stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Inclusive index range in the source stream.
    pub start: usize,
    pub end: usize,
    pub stream: EndEffectorStream,
    pub raw_extent: RawExtent,
}

/// Speed magnitude per sample: central differences inside, one-sided at
/// the ends.
pub fn speed_profile(stream: &EndEffectorStream) -> Vec<f64> {
    let s = stream.samples();
    let n = s.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            norm3(sub3(s[b].values, s[a].values)) / (s[b].t - s[a].t)
        })
        .collect()
}

/// Splits a continuous stream into motion segments.
///
/// Motion starts at the first of `hysteresis_dwell` consecutive samples at or
/// above the threshold and ends at the last such sample before
/// `hysteresis_dwell` consecutive samples below it.
pub fn segment(
    stream: &EndEffectorStream,
    cfg: &SegmentationConfig,
) -> Result<Vec<Segment>, PreprocessError> {
    cfg.validate()?;
    let speed = speed_profile(stream);
    let dwell = cfg.hysteresis_dwell;
    let mut ranges = Vec::new();
    let mut moving = false;
    let mut run = 0;
    let mut start = 0;
    let mut last_above = 0;
    for (i, &v) in speed.iter().enumerate() {
        let above = v >= cfg.speed_threshold;
        if !moving {
            run = if above { run + 1 } else { 0 };
            if run == dwell {
                moving = true;
                start = i + 1 - dwell;
                last_above = i;
                run = 0;
            }
        } else if above {
            last_above = i;
            run = 0;
        } else {
            run += 1;
            if run == dwell {
                ranges.push((start, last_above));
                moving = false;
                run = 0;
            }
        }
    }
    if moving {
        ranges.push((start, last_above));
    }

    let samples = stream.samples();
    Ok(ranges
        .into_iter()
        .filter(|&(a, b)| b > a && samples[b].t - samples[a].t >= cfg.min_duration)
        .map(|(a, b)| {
            let seg = stream.slice(a, b);
            Segment {
                start: a,
                end: b,
                raw_extent: RawExtent::of(&seg),
                stream: seg,
            }
        })
        .collect())
}

/// Scales each axis with nonzero extent onto `[0, 1]`; flat axes pass
/// through untouched.
pub fn normalize_bbox(segment: &EndEffectorStream) -> Result<EndEffectorStream, PreprocessError> {
    if segment.len() < 2 {
        return Err(PreprocessError::TooShort(
            "bounding-box normalization needs at least 2 samples".into(),
        ));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for s in segment.samples() {
        for a in 0..3 {
            lo[a] = lo[a].min(s.values[a]);
            hi[a] = hi[a].max(s.values[a]);
        }
    }
    let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    if ext.iter().all(|&e| e == 0.0) {
        return Err(PreprocessError::DegenerateSegment);
    }
    Ok(segment.map_values(|p| {
        let mut out = *p;
        for a in 0..3 {
            if ext[a] > 0.0 {
                out[a] = (p[a] - lo[a]) / ext[a];
            }
        }
        out
    })?)
}

/// Translates the segment so its first sample sits at the origin.
pub fn align_origin(segment: &EndEffectorStream) -> EndEffectorStream {
    let origin = segment.samples()[0].values;
    segment
        .map_values(|p| sub3(*p, origin))
        .expect("translation keeps samples valid")
}

/// Linearly interpolates onto timestamps `t0 + k / rate`.
pub fn resample_uniform<const N: usize>(
    stream: &Stream<N>,
    rate: f64,
) -> Result<Stream<N>, PreprocessError> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(PreprocessError::InvalidConfig(format!("rate {rate}")));
    }
    let span = stream.duration();
    if span * rate <= 1.0 {
        return Err(PreprocessError::TooShort(format!(
            "span {span} s does not exceed one period at {rate} Hz"
        )));
    }
    let src = stream.samples();
    let t0 = src[0].t;
    let t_end = src[src.len() - 1].t;
    let count = (span * rate + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    for k in 0..count {
        let t = (t0 + k as f64 / rate).min(t_end);
        while j + 2 < src.len() && src[j + 1].t < t {
            j += 1;
        }
        let (a, b) = (&src[j], &src[j + 1]);
        let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let mut values = [0.0; N];
        for (c, v) in values.iter_mut().enumerate() {
            *v = if w == 0.0 {
                a.values[c]
            } else if w == 1.0 {
                b.values[c]
            } else {
                a.values[c] + w * (b.values[c] - a.values[c])
            };
        }
        out.push(Sample { t, values });
    }
    // `min(t_end)` can collapse the final two stamps when span * rate is integral.
    out.dedup_by(|b, a| b.t <= a.t);
    Ok(Stream::new(out)?)
}

/// Full end-effector preparation for feature extraction: resample at the
/// working rate, normalize into the unit box, move the start to the origin.
/// The raw extent is taken from the untouched input.
pub fn prepare(ee: &EndEffectorStream) -> Result<(EndEffectorStream, RawExtent), PreprocessError> {
    let raw = RawExtent::of(ee);
    let uniform = resample_uniform(ee, SAMPLE_RATE_HZ)?;
    let boxed = normalize_bbox(&uniform)?;
    Ok((align_origin(&boxed), raw))
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::JointStream;

    fn stream(points: &[[f64; 3]], dt: f64) -> EndEffectorStream {
        let times: Vec<f64> = (0..points.len()).map(|i| i as f64 * dt).collect();
        EndEffectorStream::from_parts(&times, points).unwrap()
    }

    #[test]
    fn stationary_stream_has_no_segments() {
        let s = stream(&[[0.3, 0.1, 0.2]; 200], 0.02);
        assert!(segment(&s, &SegmentationConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn short_burst_is_dropped() {
        // 0.1 s of motion at 0.5 m/s inside 2 s of rest.
        let mut pts = Vec::new();
        let mut x = 0.0;
        for i in 0..100 {
            if (50..55).contains(&i) {
                x += 0.01;
            }
            pts.push([x, 0.0, 0.0]);
        }
        let cfg = SegmentationConfig {
            hysteresis_dwell: 2,
            ..Default::default()
        };
        assert!(segment(&stream(&pts, 0.02), &cfg).unwrap().is_empty());
    }

    #[test]
    fn raw_extent_is_pre_normalization() {
        let pts: Vec<[f64; 3]> = (0..100).map(|i| [i as f64 * 0.004, 0.0, 0.0]).collect();
        let segs = segment(&stream(&pts, 0.02), &SegmentationConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert!((segs[0].raw_extent.extent[0] - 0.396).abs() < 1e-12);
        assert!((segs[0].raw_extent.duration - 1.98).abs() < 1e-12);
    }

    #[test]
    fn normalize_examples() {
        let line = stream(&[[0.0, 0.0, 0.0], [1.0, 2.0, 4.0], [2.0, 4.0, 8.0]], 0.02);
        let n = normalize_bbox(&line).unwrap();
        assert_eq!(RawExtent::of(&n).extent, [1.0, 1.0, 1.0]);

        let planar = stream(&[[0.0, 0.0, 3.0], [5.0, 1.0, 3.0], [2.0, 7.0, 3.0]], 0.02);
        let n = normalize_bbox(&planar).unwrap();
        let e = RawExtent::of(&n).extent;
        assert_eq!((e[0], e[1]), (1.0, 1.0));
        assert!(n.samples().iter().all(|s| s.values[2] == 3.0));

        let unit = stream(&[[0.0, 0.0, 0.0], [0.5, 1.0, 0.25], [1.0, 0.0, 1.0]], 0.02);
        assert_eq!(normalize_bbox(&unit).unwrap(), unit);

        let flat = stream(&[[1.0, 1.0, 1.0]; 4], 0.02);
        assert!(matches!(
            normalize_bbox(&flat),
            Err(PreprocessError::DegenerateSegment)
        ));
    }

    #[test]
    fn align_examples() {
        let s = stream(&[[5.0, 5.0, 5.0], [6.0, 4.0, 5.5]], 0.02);
        let a = align_origin(&s);
        assert_eq!(a.samples()[0].values, [0.0; 3]);
        assert_eq!(a.samples()[1].values, [1.0, -1.0, 0.5]);
        assert_eq!(align_origin(&a), a);
    }

    #[test]
    fn resample_identity_and_linear() {
        let pts: Vec<[f64; 3]> = (0..30).map(|i| [(i as f64).sin(), 0.5, i as f64]).collect();
        let s = stream(&pts, 0.02);
        let r = resample_uniform(&s, 50.0).unwrap();
        assert_eq!(r.len(), s.len());
        for (a, b) in r.samples().iter().zip(s.samples()) {
            for c in 0..3 {
                assert!((a.values[c] - b.values[c]).abs() < 1e-12);
            }
        }

        // irregular stamps on a ramp stay on the ramp
        let times = [0.0, 0.013, 0.05, 0.051, 0.09, 0.2, 0.31];
        let q: Vec<[f64; 6]> = times.iter().map(|&t| [3.0 * t - 1.0; 6]).collect();
        let js = JointStream::from_parts(&times, &q).unwrap();
        for rate in [17.0, 50.0, 333.0] {
            let r = resample_uniform(&js, rate).unwrap();
            for s in r.samples() {
                assert!((s.values[4] - (3.0 * s.t - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resample_too_short() {
        let s = stream(&[[0.0; 3], [1.0, 0.0, 0.0]], 0.01);
        assert!(matches!(
            resample_uniform(&s, 50.0),
            Err(PreprocessError::TooShort(_))
        ));
    }

    #[test]
    fn resample_sinusoid_within_interpolation_bound() {
        // f(t) = A sin(2 pi f t) sampled at 120 Hz, read back at 50 Hz. The
        // linear interpolation error on a grid of step h is bounded by
        // h^2 max|f''| / 8 = h^2 A (2 pi f)^2 / 8.
        let (amp, freq, h) = (0.3, 1.5, 1.0 / 120.0);
        let f = |t: f64| amp * (2.0 * std::f64::consts::PI * freq * t).sin();
        let times: Vec<f64> = (0..480).map(|i| i as f64 * h).collect();
        let pts: Vec<[f64; 3]> = times.iter().map(|&t| [f(t), 0.0, 0.0]).collect();
        let r = resample_uniform(&EndEffectorStream::from_parts(&times, &pts).unwrap(), 50.0)
            .unwrap();
        let bound = h * h * amp * (2.0 * std::f64::consts::PI * freq).powi(2) / 8.0;
        for s in r.samples() {
            assert!((s.values[0] - f(s.t)).abs() <= bound + 1e-15);
        }
        assert!((r.end_time() - times[479]).abs() < 1.0 / 50.0);
    }
}
