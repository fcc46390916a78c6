//! Polar rasterization of joint-angle trajectories.
//!
//! Each joint is drawn as a polyline whose angle is the joint angle and whose
//! radius is relative time, so the whole instance spans the disc from centre
//! to rim. Every joint has its own hue and darkens from start to end.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::telemetry::{EmotionLabel, JointStream, TaskInstance};

pub const WIDTH: usize = 150;
pub const HEIGHT: usize = 150;
const PPM_HEADER: &[u8] = b"P6\n150 150\n255\n";

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("TooShort: need at least 2 frames, got {0}")]
    TooShort(usize),
    #[error("InvalidStyle: {0}")]
    InvalidStyle(String),
    #[error("InvalidImage: {0}")]
    InvalidImage(String),
    #[error("IoFailure: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A 150x150 RGB image, row-major, 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolarImage {
    pixels: Vec<u8>,
}

impl PolarImage {
    pub fn filled(rgb: [u8; 3]) -> Self {
        Self {
            pixels: rgb.repeat(WIDTH * HEIGHT),
        }
    }

    pub fn from_pixels(pixels: Vec<u8>) -> Result<Self, RasterError> {
        if pixels.len() != WIDTH * HEIGHT * 3 {
            return Err(RasterError::InvalidImage(format!(
                "{} bytes, expected {}",
                pixels.len(),
                WIDTH * HEIGHT * 3
            )));
        }
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * WIDTH + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if (0..WIDTH as i64).contains(&x) && (0..HEIGHT as i64).contains(&y) {
            let i = 3 * (y as usize * WIDTH + x as usize);
            self.pixels[i..i + 3].copy_from_slice(&rgb);
        }
    }

    /// Coordinates of every pixel that differs from `background`.
    pub fn painted(&self, background: [u8; 3]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..HEIGHT {
            for x in 0..WIDTH {
                if self.get(x, y) != background {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterStyle {
    /// Hue in degrees for joints 1 to 6.
    pub joint_hues: [f64; 6],
    /// HSL lightness of the first frame.
    pub lightness_start: f64,
    /// HSL lightness of the last frame.
    pub lightness_end: f64,
    pub background: [u8; 3],
    /// Outermost radius as a fraction of half the image size.
    pub max_radius_fraction: f64,
}

impl Default for RasterStyle {
    fn default() -> Self {
        Self {
            joint_hues: [0.0, 60.0, 120.0, 180.0, 240.0, 300.0],
            lightness_start: 0.85,
            lightness_end: 0.25,
            background: [255, 255, 255],
            max_radius_fraction: 0.95,
        }
    }
}

impl RasterStyle {
    pub fn validate(&self) -> Result<(), RasterError> {
        for i in 0..6 {
            for j in i + 1..6 {
                let d = (self.joint_hues[i] - self.joint_hues[j]).rem_euclid(360.0);
                if d.min(360.0 - d) < 30.0 {
                    return Err(RasterError::InvalidStyle(format!(
                        "hues of joints {} and {} are closer than 30 degrees",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.lightness_start)
            || !unit.contains(&self.lightness_end)
            || !(self.max_radius_fraction > 0.0 && self.max_radius_fraction <= 1.0)
        {
            return Err(RasterError::InvalidStyle("value outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// HSL to 8-bit RGB with full saturation.
pub fn hsl_to_rgb(hue_deg: f64, lightness: f64) -> [u8; 3] {
    let h = hue_deg.rem_euclid(360.0) / 60.0;
    let c = 1.0 - (2.0 * lightness - 1.0).abs();
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = lightness - c / 2.0;
    let q = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Pixel centre of the polar origin.
pub const CENTER: f64 = 75.0;

/// Pixel position of frame `i` of `frames` at joint angle `angle`.
pub fn polar_pixel(style: &RasterStyle, i: usize, frames: usize, angle: f64) -> (i64, i64) {
    let r = style.max_radius_fraction * CENTER * i as f64 / (frames - 1) as f64;
    let theta = angle.rem_euclid(std::f64::consts::TAU);
    let x = CENTER + r * theta.cos();
    let y = CENTER - r * theta.sin();
    (x.round() as i64, y.round() as i64)
}

/// Integer midpoint (Bresenham) line, both endpoints included.
pub fn line_pixels(from: (i64, i64), to: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == to {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Draws all six joints; later joints overwrite earlier ones. Each segment
/// takes the colour of the frame it ends on.
pub fn rasterize(joints: &JointStream, style: &RasterStyle) -> Result<PolarImage, RasterError> {
    style.validate()?;
    let frames = joints.len();
    if frames < 2 {
        return Err(RasterError::TooShort(frames));
    }
    let mut img = PolarImage::filled(style.background);
    let samples = joints.samples();
    let span = (frames - 1) as f64;
    for (j, &hue) in style.joint_hues.iter().enumerate() {
        let colour = |i: usize| {
            let l = style.lightness_start
                + (style.lightness_end - style.lightness_start) * i as f64 / span;
            hsl_to_rgb(hue, l)
        };
        let mut prev = polar_pixel(style, 0, frames, samples[0].values[j]);
        img.put(prev.0, prev.1, colour(0));
        for (i, s) in samples.iter().enumerate().skip(1) {
            let next = polar_pixel(style, i, frames, s.values[j]);
            let c = colour(i);
            for (x, y) in line_pixels(prev, next) {
                img.put(x, y, c);
            }
            prev = next;
        }
    }
    Ok(img)
}

pub fn encode_ppm(image: &PolarImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(PPM_HEADER.len() + image.pixels.len());
    out.extend_from_slice(PPM_HEADER);
    out.extend_from_slice(&image.pixels);
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<PolarImage, RasterError> {
    let payload = bytes
        .strip_prefix(PPM_HEADER)
        .ok_or_else(|| RasterError::InvalidImage("not a 150x150 8-bit P6 file".into()))?;
    PolarImage::from_pixels(payload.to_vec())
}

/// Writes a binary PPM (P6).
pub fn write_ppm(image: &PolarImage, path: &Path) -> Result<(), RasterError> {
    fs::write(path, encode_ppm(image)).map_err(|source| RasterError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_ppm(path: &Path) -> Result<PolarImage, RasterError> {
    let bytes = fs::read(path).map_err(|source| RasterError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_ppm(&bytes)
}

/// `<subject>_<task>_<label>_<rep>.ppm`
pub fn image_file_name(instance: &TaskInstance) -> String {
    format!(
        "{}_{}_{}_{:02}.ppm",
        instance.subject_id,
        instance.task.slug(),
        instance.label.map_or("unlabeled", EmotionLabel::name),
        instance.repetition
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(angles: [f64; 6], frames: usize) -> JointStream {
        let t: Vec<f64> = (0..frames).map(|i| i as f64 * 0.02).collect();
        JointStream::from_parts(&t, &vec![angles; frames]).unwrap()
    }

    #[test]
    fn zero_angle_paints_only_the_spoke() {
        let style = RasterStyle::default();
        let img = rasterize(&constant([0.0; 6], 40), &style).unwrap();
        let tip = (CENTER + 0.95 * CENTER).round() as usize;
        let painted = img.painted(style.background);
        assert!(!painted.is_empty());
        for (x, y) in painted {
            assert_eq!(y, 75);
            assert!((75..=tip).contains(&x));
        }
        // the last joint wins everywhere
        assert_eq!(img.get(tip, 75), hsl_to_rgb(300.0, 0.25));
    }

    #[test]
    fn rotated_spoke_follows_offset() {
        let style = RasterStyle::default();
        for delta in [0.3, 1.2, 2.5, 4.0, 5.9] {
            let img = rasterize(&constant([delta; 6], 60), &style).unwrap();
            let (ux, uy) = (f64::cos(delta), -f64::sin(delta));
            for (x, y) in img.painted(style.background) {
                let (px, py) = (x as f64 - CENTER, y as f64 - CENTER);
                let along = px * ux + py * uy;
                let across = (px * uy - py * ux).abs();
                assert!(across <= 1.0, "pixel ({x},{y}) off the ray at {delta}");
                assert!(along >= -1.0);
            }
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            rasterize(&constant([0.0; 6], 1), &RasterStyle::default()),
            Err(RasterError::TooShort(1))
        ));
    }

    #[test]
    fn close_hues_rejected() {
        let style = RasterStyle {
            joint_hues: [0.0, 20.0, 120.0, 180.0, 240.0, 300.0],
            ..Default::default()
        };
        assert!(style.validate().is_err());
        let wrap = RasterStyle {
            joint_hues: [5.0, 60.0, 120.0, 180.0, 240.0, 350.0],
            ..Default::default()
        };
        assert!(wrap.validate().is_err());
    }

    #[test]
    fn lines_cover_all_octants() {
        for to in [(5, 2), (2, 5), (-2, 5), (-5, 2), (-5, -2), (-2, -5), (2, -5), (5, -2)] {
            let p = line_pixels((0, 0), to);
            assert_eq!(p[0], (0, 0));
            assert_eq!(*p.last().unwrap(), to);
            assert_eq!(p.len() as i64, to.0.abs().max(to.1.abs()) + 1);
            for w in p.windows(2) {
                assert!((w[1].0 - w[0].0).abs() <= 1 && (w[1].1 - w[0].1).abs() <= 1);
            }
        }
    }

    #[test]
    fn hsl_primaries() {
        assert_eq!(hsl_to_rgb(0.0, 0.5), [255, 0, 0]);
        assert_eq!(hsl_to_rgb(120.0, 0.5), [0, 255, 0]);
        assert_eq!(hsl_to_rgb(240.0, 0.5), [0, 0, 255]);
        assert_eq!(hsl_to_rgb(60.0, 1.0), [255, 255, 255]);
    }

    #[test]
    fn ppm_size_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("white.ppm");
        let white = PolarImage::filled([255; 3]);
        write_ppm(&white, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 15 + 67_500);
        assert!(bytes[15..].iter().all(|&b| b == 0xFF));

        let img = rasterize(&constant([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 30), &RasterStyle::default())
            .unwrap();
        write_ppm(&img, &path).unwrap();
        assert_eq!(read_ppm(&path).unwrap(), img);
    }
}
