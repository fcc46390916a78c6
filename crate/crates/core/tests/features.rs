use emokin::features::*;
use emokin::preprocess::RawExtent;
use emokin::telemetry::EndEffectorStream;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stream(points: &[[f64; 3]], dt: f64) -> EndEffectorStream {
    let t: Vec<f64> = (0..points.len()).map(|i| i as f64 * dt).collect();
    EndEffectorStream::from_parts(&t, points).unwrap()
}

fn bundle(points: &[[f64; 3]], dt: f64) -> FeatureBundle {
    let s = stream(points, dt);
    build_bundle(&s, RawExtent::of(&s)).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Population mean and variance from raw power sums.
fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let s1: f64 = xs.iter().sum();
    let s2: f64 = xs.iter().map(|x| x * x).sum();
    let mean = s1 / n;
    (mean, s2 / n - mean * mean)
}

#[test]
fn statics_of_a_hand_built_segment() {
    // x = a t^2, y = b t, z = c: every derivative is exact on the grid
    let (a, b, c, dt) = (1.5, -0.4, 0.25, 0.02);
    let t: Vec<f64> = (0..10).map(|i| i as f64 * dt).collect();
    let pts: Vec<[f64; 3]> = t.iter().map(|&t| [a * t * t, b * t, c]).collect();
    let f = bundle(&pts, dt);
    assert_eq!(f.statics.len(), STATIC_LEN);

    let steps: Vec<f64> = t
        .windows(2)
        .map(|w| (a * (w[1] * w[1] - w[0] * w[0])).hypot(b * dt))
        .collect();
    let expected: Vec<(f64, f64)> = vec![
        moments(&t.iter().map(|t| a * t * t).collect::<Vec<_>>()),
        (b * 4.5 * dt, b * b * 99.0 / 12.0 * dt * dt),
        (c, 0.0),
        (2.0 * a * 4.5 * dt, 4.0 * a * a * 99.0 / 12.0 * dt * dt),
        (b, 0.0),
        (0.0, 0.0),
        (2.0 * a, 0.0),
        (0.0, 0.0),
        (0.0, 0.0),
        (0.0, 0.0),
        (0.0, 0.0),
        (0.0, 0.0),
        moments(&steps),
    ];
    for (k, (name, &(mean, var))) in KINEMATIC_CHANNEL_NAMES.iter().zip(&expected).enumerate() {
        let got = &f.statics[3 * k..3 * k + 3];
        assert!((got[0] - mean).abs() < 1e-9, "{name} mean {} vs {mean}", got[0]);
        assert!((got[1] - var).abs() < 1e-9, "{name} var {} vs {var}", got[1]);
        assert!((got[2] - var.max(0.0).sqrt()).abs() < 1e-6, "{name} std");
    }
    assert_eq!(f.scalars()[1..4], [a * t[9] * t[9], (b * t[9]).abs(), 0.0]);
    assert!((f.time_range - 0.18).abs() < 1e-15);
}

#[test]
fn derivative_integration_recovers_position() {
    let (omega, dt, n) = (std::f64::consts::PI, 0.02, 101);
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            [(omega * t).sin(), (omega * t).cos(), 0.3 * t]
        })
        .collect();
    let d = derivatives(&pts, dt).unwrap();
    let span = (n - 1) as f64 * dt;
    // central-difference plus trapezoid error, both O(dt^2) with |x'''| <= omega^3
    let tol = span * dt * dt * omega.powi(3) * (1.0 / 6.0 + 1.0 / 12.0) + dt * dt * dt * omega.powi(3);
    for axis in 0..3 {
        let mut x = pts[0][axis];
        let mut worst: f64 = 0.0;
        for i in 1..n {
            x += 0.5 * dt * (d.velocity[i - 1][axis] + d.velocity[i][axis]);
            worst = worst.max((x - pts[i][axis]).abs());
        }
        assert!(worst <= tol, "axis {axis}: {worst:e} > {tol:e}");
    }
}

#[test]
fn circle_curvature_is_inverse_radius() {
    let r = 2.0;
    let pts: Vec<[f64; 3]> = (0..200)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 200.0;
            [r * a.cos(), r * a.sin(), 1.0]
        })
        .collect();
    assert!(curvature(&pts).unwrap().iter().all(|k| (k - 0.5).abs() < 1e-6));
}

/// Top two eigenpairs of a symmetric matrix by power iteration with
/// deflation.
fn power_eigen(m: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
    let d = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut out = Vec::new();
    for _ in 0..2 {
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 * 0.1).collect();
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| a[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda = v.iter().zip(&w).map(|(x, y)| x * y).sum();
            v = w.iter().map(|x| x / norm).collect();
        }
        for i in 0..d {
            for j in 0..d {
                a[i][j] -= lambda * v[i] * v[j];
            }
        }
        out.push((lambda, v));
    }
    out
}

#[test]
fn pca_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let d = 6;
    let spread = [3.0, 1.5, 0.6, 0.3, 0.2, 0.1];
    let data: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            let z: Vec<f64> = spread.iter().map(|s| s * rng.gen_range(-1.0..1.0)).collect();
            // mix the axes with a fixed rotation in the (0, 2) and (1, 3) planes
            vec![
                0.8 * z[0] - 0.6 * z[2] + 1.0,
                0.6 * z[1] + 0.8 * z[3] - 2.0,
                0.6 * z[0] + 0.8 * z[2],
                -0.8 * z[1] + 0.6 * z[3],
                z[4] + 5.0,
                z[5],
            ]
        })
        .collect();
    let n = data.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| data.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| data.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect();
    let model = pca_fit(&data, PcaOptions { standardize: false }).unwrap();
    for (k, (lambda, v)) in power_eigen(&cov).into_iter().enumerate() {
        assert!(close(model.explained_variance[k], lambda, 1e-9), "{k}: {} vs {lambda}", model.explained_variance[k]);
        let dot: f64 = v.iter().zip(&model.components[k]).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-9);
    }
    for i in 0..2 {
        for j in 0..2 {
            let dot: f64 = model.components[i].iter().zip(&model.components[j]).map(|(a, b)| a * b).sum();
            assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
        }
    }
}

fn path_strategy() -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 8..40)
}

fn assert_scaled(a: &[[f64; 3]], b: &[[f64; 3]], s: f64) -> Result<(), TestCaseError> {
    for (p, q) in a.iter().zip(b) {
        for k in 0..3 {
            prop_assert!(close(p[k] * s, q[k], 1e-9), "{} vs {}", p[k] * s, q[k]);
        }
    }
    Ok(())
}

proptest! {
    #[test]
    fn features_scale_covariantly(pts in path_strategy(), s in 0.1f64..10.0) {
        let scaled: Vec<[f64; 3]> = pts.iter().map(|p| [p[0] * s, p[1] * s, p[2] * s]).collect();
        let a = bundle(&pts, 0.02);
        let b = bundle(&scaled, 0.02);
        assert_scaled(&a.velocity, &b.velocity, s)?;
        assert_scaled(&a.acceleration, &b.acceleration, s)?;
        assert_scaled(&a.jerk, &b.jerk, s)?;
        for (x, y) in a.position_difference.iter().zip(&b.position_difference) {
            prop_assert!(close(x * s, *y, 1e-9));
        }
        for (x, y) in a.slope_angle.iter().zip(&b.slope_angle) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in a.curvature.iter().zip(&b.curvature) {
            prop_assert!(close(x / s, *y, 1e-9));
        }
    }

    #[test]
    fn energy_ignores_time_reversal(pts in path_strategy()) {
        let s = stream(&pts, 0.02);
        let reversed: Vec<[f64; 3]> = pts.iter().rev().copied().collect();
        let r = stream(&reversed, 0.02);
        prop_assert!((energy(&s).unwrap() - energy(&r).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn statics_are_mean_variance_std(pts in path_strategy()) {
        let f = bundle(&pts, 0.02);
        for (k, channel) in f.kinematic_channels().iter().enumerate() {
            let (mean, var) = moments(channel);
            let got = &f.statics[3 * k..3 * k + 3];
            prop_assert!(close(got[0], mean, 1e-9));
            prop_assert!((got[1] - var).abs() <= 1e-9 * var.abs().max(1.0));
            prop_assert!(got[2] >= 0.0 && close(got[2] * got[2], got[1], 1e-9));
        }
    }

    #[test]
    fn entropy_is_bounded_by_bin_count(speeds in prop::collection::vec(0.0f64..3.0, 1..200)) {
        let h = speed_entropy(&speeds);
        prop_assert!((0.0..=5.0 + 1e-12).contains(&h));
    }

    #[test]
    fn rank_two_data_reconstructs_exactly(
        dim in 3usize..30,
        n in 5usize..30,
        seed in any::<u64>(),
        standardize in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut axis = || (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (origin, u, v) = (axis(), axis(), axis());
        let data: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                (0..dim).map(|i| origin[i] + a * u[i] + b * v[i]).collect()
            })
            .collect();
        let model = pca_fit(&data, PcaOptions { standardize }).unwrap();
        for x in &data {
            let back = model.back_project(model.project(x).unwrap());
            let err = x.iter().zip(&back).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-8, "reconstruction error {err:e}");
        }
    }
}
