use emokin::dtw::*;
use emokin::EmotionLabel;
use proptest::prelude::*;

fn seq(channels: usize, frames: &[Vec<f64>]) -> FeatureSequence {
    FeatureSequence::new(channels, frames.concat()).unwrap()
}

/// Minimum cost over every monotone warping path, summed in path order.
fn exhaustive(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn walk(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64) {
        let d: f64 = a[i].iter().zip(&b[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let acc = acc + d;
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

fn frames(channels: usize, max_len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec((0u8..=4).prop_map(f64::from), channels),
        1..=max_len,
    )
}

fn pair() -> impl Strategy<Value = (usize, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (1usize..=3).prop_flat_map(|c| (Just(c), frames(c, 6), frames(c, 6)))
}

/// Piecewise-constant sequence from `(value, run length)` pairs.
fn runs(spec: &[(f64, usize)]) -> Vec<Vec<f64>> {
    spec.iter().flat_map(|&(v, n)| std::iter::repeat_n(vec![v], n)).collect()
}

fn separated_training() -> Vec<(FeatureSequence, EmotionLabel)> {
    let mut out = Vec::new();
    for (k, label) in EmotionLabel::ALL.into_iter().enumerate() {
        for r in 0..4 {
            let base = 10.0 * k as f64;
            let f: Vec<Vec<f64>> = (0..8 + r)
                .map(|i| vec![base + (i as f64 * 0.7 + r as f64).sin(), base * 0.5 - i as f64 * 0.1])
                .collect();
            out.push((seq(2, &f), label));
        }
    }
    out
}

#[test]
fn stretched_runs_cost_nothing_against_the_original() {
    let a = runs(&[(0.0, 2), (3.0, 1), (1.0, 3), (4.0, 1)]);
    let retimed = runs(&[(0.0, 1), (3.0, 4), (1.0, 1), (4.0, 2)]);
    let stretched: Vec<Vec<f64>> = a.iter().flat_map(|f| [f.clone(), f.clone()]).collect();
    let d = |x: &[Vec<f64>], y: &[Vec<f64>]| dtw_distance(&seq(1, x), &seq(1, y)).unwrap();
    assert_eq!(d(&a, &a), 0.0);
    assert_eq!(d(&stretched, &a), 0.0);
    assert_eq!(d(&retimed, &a), 0.0);
    let other = runs(&[(2.0, 3), (0.0, 2), (4.0, 2)]);
    assert_eq!(d(&stretched, &other), d(&runs(&[(0.0, 4), (3.0, 2), (1.0, 6), (4.0, 2)]), &other));
}

#[test]
fn medoid_training_classifies_its_own_data() {
    let train = separated_training();
    let model = select_templates(&train, 1, None).unwrap();
    assert_eq!(model.template_count(), 5);
    for (s, label) in &train {
        assert_eq!(model.classify(s).unwrap().label, *label);
    }
    let back = DtwModel::from_json(&model.to_json()).unwrap();
    assert_eq!(back, model);
}

#[test]
fn channel_rescaling_leaves_classification_unchanged() {
    let train = separated_training();
    let gains = [3.5, 0.02];
    let rescale = |s: &FeatureSequence| s.map_frames(|c, v| v * gains[c]);
    let scaled: Vec<(FeatureSequence, EmotionLabel)> = train.iter().map(|(s, l)| (rescale(s), *l)).collect();
    let a = select_templates(&train, 2, Some(3)).unwrap();
    let b = select_templates(&scaled, 2, Some(3)).unwrap();
    let probes: Vec<FeatureSequence> = (0..10)
        .map(|k| {
            let f: Vec<Vec<f64>> = (0..9).map(|i| vec![k as f64 * 4.7 + (i as f64).cos(), k as f64 * 2.3 - 0.2 * i as f64]).collect();
            seq(2, &f)
        })
        .collect();
    for p in &probes {
        let (x, y) = (a.classify(p).unwrap(), b.classify(&rescale(p)).unwrap());
        assert_eq!(x.label, y.label);
        for (label, d) in &x.scores {
            assert!((d - y.scores[label]).abs() <= 1e-9 * d.max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_exhaustive_path_search((c, a, b) in pair()) {
        prop_assert_eq!(dtw_distance(&seq(c, &a), &seq(c, &b)).unwrap(), exhaustive(&a, &b));
    }

    #[test]
    fn is_symmetric_and_non_negative((c, a, b) in pair()) {
        let (x, y) = (seq(c, &a), seq(c, &b));
        let d = dtw_distance(&x, &y).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, dtw_distance(&y, &x).unwrap());
        prop_assert_eq!(dtw_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn stretching_never_shortens_the_distance((c, a, b) in pair()) {
        let stretched: Vec<Vec<f64>> = a.iter().flat_map(|f| [f.clone(), f.clone()]).collect();
        let d = dtw_distance(&seq(c, &a), &seq(c, &b)).unwrap();
        prop_assert!(dtw_distance(&seq(c, &stretched), &seq(c, &b)).unwrap() >= d);
    }

    #[test]
    fn wide_band_equals_full_search((c, a, b) in pair(), extra in 0usize..3) {
        let (x, y) = (seq(c, &a), seq(c, &b));
        let band = a.len().max(b.len()) + extra;
        prop_assert_eq!(dtw_distance_banded(&x, &y, Some(band)).unwrap(), dtw_distance(&x, &y).unwrap());
        prop_assert!(dtw_distance_banded(&x, &y, Some(0)).unwrap() >= dtw_distance(&x, &y).unwrap());
    }
}
