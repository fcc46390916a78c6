use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mix_seed, SynthError};
use crate::telemetry::EmotionLabel;

/// How one emotion shapes the motion of a task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionProfile {
    pub label: EmotionLabel,
    /// Multiplier on the base hand speed.
    pub speed_scale: f64,
    /// Jerk amplitude of the band-limited noise, m/s^3.
    pub jerk_noise_amp: f64,
    /// Hz; ignored when `tremor_amp` is 0.
    pub tremor_freq: f64,
    /// Tremor displacement amplitude, m.
    pub tremor_amp: f64,
    /// Expected micro-pauses per second.
    pub pause_prob: f64,
    pub duration_scale: f64,
    /// Relative amplitude of slow speed fluctuations, in `[0, 1)`.
    pub speed_wobble: f64,
    /// Multiplier on the size of the task in the workspace.
    pub extent_scale: f64,
}

impl EmotionProfile {
    /// Calibrated defaults. Magnitudes are a tuning of this generator, not
    /// measurements.
    pub fn default_for(label: EmotionLabel) -> Self {
        use EmotionLabel::*;
        let (speed_scale, jerk_noise_amp, tremor_freq, tremor_amp, pause_prob) = match label {
            Joy => (1.7, 15.0, 6.0, 0.0005, 0.0),
            Pleasure => (0.78, 4.0, 2.0, 0.0015, 0.05),
            Sadness => (0.7, 2.0, 0.0, 0.0, 0.35),
            Annoyance => (2.8, 30.0, 9.0, 0.0006, 0.15),
            Neutral => (1.0, 2.5, 0.0, 0.0, 0.0),
        };
        let (duration_scale, speed_wobble, extent_scale) = match label {
            Joy => (1.0, 0.1, 1.1),
            Pleasure => (1.0, 0.35, 0.95),
            Sadness => (1.1, 0.1, 0.9),
            Annoyance => (1.0, 0.15, 1.2),
            Neutral => (1.0, 0.05, 1.0),
        };
        Self {
            label,
            speed_scale,
            jerk_noise_amp,
            tremor_freq,
            tremor_amp,
            pause_prob,
            duration_scale,
            speed_wobble,
            extent_scale,
        }
    }

    /// Default table in label declaration order.
    pub fn defaults() -> [Self; 5] {
        EmotionLabel::ALL.map(Self::default_for)
    }

    /// Noise-free profile: the hand follows the path exactly.
    pub fn quiet(label: EmotionLabel) -> Self {
        Self {
            jerk_noise_amp: 0.0,
            tremor_amp: 0.0,
            pause_prob: 0.0,
            ..Self::default_for(label)
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.speed_scale) || !positive(self.duration_scale) || !positive(self.extent_scale) {
            return Err(SynthError::InvalidConfig(format!(
                "{}: speed, duration and extent scales must be positive",
                self.label
            )));
        }
        if !non_negative(self.jerk_noise_amp)
            || !non_negative(self.tremor_amp)
            || !non_negative(self.tremor_freq)
            || !non_negative(self.pause_prob)
            || !(0.0..1.0).contains(&self.speed_wobble)
        {
            return Err(SynthError::InvalidConfig(format!(
                "{}: noise parameters out of range",
                self.label
            )));
        }
        if self.tremor_amp > 0.0 && !(self.tremor_freq > 0.0 && self.tremor_freq < 25.0) {
            return Err(SynthError::InvalidConfig(format!(
                "{}: tremor frequency must lie in (0, 25) Hz",
                self.label
            )));
        }
        Ok(())
    }
}

pub const STYLE_RANGE: (f64, f64) = (0.7, 1.3);

/// Per-subject multipliers on the profile's speed, jerk and tremor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectStyle {
    pub subject_id: String,
    pub speed: f64,
    pub jerk: f64,
    pub tremor: f64,
}

impl SubjectStyle {
    /// Multipliers drawn uniformly from [`STYLE_RANGE`].
    pub fn draw(subject_id: &str, subject_index: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x5u64, subject_index]));
        let mut m = || rng.gen_range(STYLE_RANGE.0..=STYLE_RANGE.1);
        Self {
            subject_id: subject_id.to_string(),
            speed: m(),
            jerk: m(),
            tremor: m(),
        }
    }

    /// All multipliers 1.
    pub fn neutral(subject_id: &str) -> Self {
        Self {
            subject_id: subject_id.to_string(),
            speed: 1.0,
            jerk: 1.0,
            tremor: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionLabel::*;

    #[test]
    fn defaults_respect_arousal_and_speed_ordering() {
        let p = EmotionProfile::default_for;
        for high in [Joy, Annoyance] {
            for low in [Sadness, Pleasure, Neutral] {
                assert!(p(high).jerk_noise_amp > p(low).jerk_noise_amp);
            }
        }
        assert!(p(Annoyance).speed_scale > p(Joy).speed_scale);
        assert!(p(Joy).speed_scale > p(Neutral).speed_scale);
        for prof in EmotionProfile::defaults() {
            prof.validate().unwrap();
        }
    }

    #[test]
    fn styles_stay_in_range() {
        for i in 0..200 {
            let s = SubjectStyle::draw("s", i, 99);
            for m in [s.speed, s.jerk, s.tremor] {
                assert!((STYLE_RANGE.0..=STYLE_RANGE.1).contains(&m));
            }
        }
        assert_eq!(SubjectStyle::draw("a", 3, 1), SubjectStyle::draw("a", 3, 1));
    }

    #[test]
    fn invalid_profiles_rejected() {
        let mut p = EmotionProfile::default_for(Joy);
        p.speed_scale = 0.0;
        assert!(p.validate().is_err());
        let mut p = EmotionProfile::default_for(Joy);
        p.tremor_freq = 30.0;
        assert!(p.validate().is_err());
    }
}
