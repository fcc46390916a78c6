use emokin::raster::*;
use emokin::synth::gen_dataset;
use emokin::telemetry::JointStream;
use emokin::TaskKind;
use proptest::prelude::*;

fn joints(angles: &[[f64; 6]]) -> JointStream {
    let t: Vec<f64> = (0..angles.len()).map(|i| i as f64 * 0.02).collect();
    JointStream::from_parts(&t, angles).unwrap()
}

/// Pixels of the sixth joint: hue 300 keeps red equal to blue above green.
fn sixth_joint(img: &PolarImage) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            let [r, g, b] = img.get(x, y);
            if r == b && r > g {
                out.push((x as f64, y as f64));
            }
        }
    }
    out
}

fn rotate(p: (f64, f64), delta: f64) -> (f64, f64) {
    // image y grows downwards
    let (dx, dy) = (p.0 - CENTER, CENTER - p.1);
    let (s, c) = delta.sin_cos();
    (CENTER + dx * c - dy * s, CENTER - (dx * s + dy * c))
}

fn painted_fraction(img: &PolarImage) -> f64 {
    img.painted([255, 255, 255]).len() as f64 / (WIDTH * HEIGHT) as f64
}

#[test]
fn synthetic_instances_leave_most_of_the_disc_blank() {
    let tasks = TaskKind::all();
    let data = gen_dataset(1, &tasks, 1, 3).unwrap();
    for inst in data.instances() {
        assert!(inst.joints.len() <= 1000);
        let img = rasterize(&inst.joints, &RasterStyle::default()).unwrap();
        assert!(painted_fraction(&img) < 0.5, "{}", inst.file_stem());
    }
}

#[test]
fn ppm_is_header_plus_raw_pixels() {
    let img = rasterize(&joints(&[[0.0; 6], [1.0; 6], [2.0; 6]]), &RasterStyle::default()).unwrap();
    let bytes = encode_ppm(&img);
    assert_eq!(bytes.len(), 67_515);
    assert!(bytes.starts_with(b"P6\n150 150\n255\n"));
    assert_eq!(decode_ppm(&bytes).unwrap(), img);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.ppm");
    write_ppm(&img, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_an_angle_offset_rotates_the_joint(
        series in prop::collection::vec(-3.0f64..3.0, 2..40),
        delta in -3.0f64..3.0,
    ) {
        // joint 6 is drawn last and so never hidden
        let frames = |shift: f64| -> Vec<[f64; 6]> {
            series.iter().map(|&a| [0.0, 0.0, 0.0, 0.0, 0.0, a + shift]).collect()
        };
        let style = RasterStyle::default();
        let base = sixth_joint(&rasterize(&joints(&frames(0.0)), &style).unwrap());
        let moved = sixth_joint(&rasterize(&joints(&frames(delta)), &style).unwrap());
        prop_assert!(!base.is_empty() && !moved.is_empty());
        for p in &moved {
            let q = rotate(*p, -delta);
            let nearest = base.iter().map(|b| (b.0 - q.0).hypot(b.1 - q.1)).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= 2.0, "pixel {p:?} lands {nearest} px from the original");
        }
    }

    #[test]
    fn radius_grows_with_frame_index(
        series in prop::collection::vec(-10.0f64..10.0, 2..300),
    ) {
        let style = RasterStyle::default();
        let n = series.len();
        let radius = |i: usize, a: f64| {
            let (x, y) = polar_pixel(&style, i, n, a);
            (x as f64 - CENTER).hypot(y as f64 - CENTER)
        };
        let mut ceiling: f64 = 0.0;
        for (i, &a) in series.iter().enumerate() {
            let r = radius(i, a);
            let exact = style.max_radius_fraction * CENTER * i as f64 / (n - 1) as f64;
            // rounding to the pixel grid moves a point by at most half a diagonal
            prop_assert!((r - exact).abs() <= std::f64::consts::FRAC_1_SQRT_2 + 1e-9);
            prop_assert!(r + std::f64::consts::SQRT_2 + 1e-9 >= ceiling);
            ceiling = ceiling.max(r);
        }
        let spoke: Vec<f64> = (0..n).map(|i| radius(i, 0.0)).collect();
        prop_assert!(spoke.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn rendering_is_deterministic(series in prop::collection::vec(prop::array::uniform6(-4.0f64..4.0), 2..60)) {
        let s = joints(&series);
        let style = RasterStyle::default();
        prop_assert_eq!(encode_ppm(&rasterize(&s, &style).unwrap()), encode_ppm(&rasterize(&s, &style).unwrap()));
    }
}
