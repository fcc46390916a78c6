use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::preprocess::{norm3, sub3};
use crate::telemetry::{TaskCategory, TaskKind, TaskName};

/// Turning angle above which a polyline vertex counts as a corner.
pub const CORNER_THRESHOLD: f64 = 30.0 * PI / 180.0;

/// Angular step used when sampling arcs.
const ARC_STEP: f64 = 3.0 * PI / 180.0;

/// Polyline parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskPath {
    points: Vec<[f64; 3]>,
    cumulative: Vec<f64>,
}

impl TaskPath {
    /// Drops repeated points. Needs at least two distinct points.
    pub fn from_points(points: Vec<[f64; 3]>) -> Self {
        let mut clean: Vec<[f64; 3]> = Vec::with_capacity(points.len());
        for p in points {
            if clean.last().is_none_or(|&q| norm3(sub3(p, q)) > 1e-12) {
                clean.push(p);
            }
        }
        assert!(clean.len() >= 2, "path needs two distinct points");
        let mut cumulative = vec![0.0];
        for w in clean.windows(2) {
            let last = *cumulative.last().expect("non-empty");
            cumulative.push(last + norm3(sub3(w[1], w[0])));
        }
        Self {
            points: clean,
            cumulative,
        }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    /// Point at arc length `s`, clamped to the ends.
    pub fn point_at(&self, s: f64) -> [f64; 3] {
        let s = s.clamp(0.0, self.length());
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => return self.points[i],
            Err(i) => i - 1,
        };
        let span = self.cumulative[i + 1] - self.cumulative[i];
        let f = (s - self.cumulative[i]) / span;
        let (a, b) = (self.points[i], self.points[i + 1]);
        [
            a[0] + f * (b[0] - a[0]),
            a[1] + f * (b[1] - a[1]),
            a[2] + f * (b[2] - a[2]),
        ]
    }

    /// Angle between consecutive segment directions at each interior vertex.
    pub fn turning_angles(&self) -> Vec<f64> {
        self.points
            .windows(3)
            .map(|w| {
                let (u, v) = (sub3(w[1], w[0]), sub3(w[2], w[1]));
                let cos = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (norm3(u) * norm3(v));
                cos.clamp(-1.0, 1.0).acos()
            })
            .collect()
    }

    /// Interior vertices turning by more than [`CORNER_THRESHOLD`].
    pub fn corner_count(&self) -> usize {
        self.turning_angles()
            .iter()
            .filter(|&&a| a > CORNER_THRESHOLD)
            .count()
    }

    pub fn extents(&self) -> [f64; 3] {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]]
    }
}

fn arc(center: [f64; 2], radius: f64, from: f64, to: f64) -> Vec<[f64; 2]> {
    let steps = ((to - from).abs() / ARC_STEP).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| {
            let a = from + (to - from) * i as f64 / steps as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

fn planar(points: &[[f64; 2]]) -> Vec<[f64; 3]> {
    points.iter().map(|p| [p[0], p[1], 0.0]).collect()
}

/// Adds a single smooth lift along the path, turning a table-top tracing
/// into a mid-air gesture.
fn lift(points: Vec<[f64; 3]>, height: f64) -> Vec<[f64; 3]> {
    let flat = TaskPath::from_points(points);
    let total = flat.length();
    let mut s = 0.0;
    let mut out = Vec::with_capacity(flat.points.len());
    for (i, p) in flat.points.iter().enumerate() {
        if i > 0 {
            s += norm3(sub3(*p, flat.points[i - 1]));
        }
        out.push([p[0], p[1], p[2] + height * (PI * s / total).sin()]);
    }
    out
}

/// Translates to the origin and scales uniformly so the largest extent is 1.
fn fit_unit_box(points: Vec<[f64; 3]>) -> TaskPath {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    TaskPath::from_points(
        points
            .into_iter()
            .map(|p| [(p[0] - lo[0]) / span, (p[1] - lo[1]) / span, (p[2] - lo[2]) / span])
            .collect(),
    )
}

fn lw() -> Vec<[f64; 3]> {
    let mut pts = vec![[0.0, 1.0], [0.0, 0.0]];
    let n = 120;
    for i in 0..=n {
        let x = 0.3 + 0.7 * i as f64 / n as f64;
        pts.push([x, 0.4 * (TAU * (x - 0.3) / 0.7).sin().abs()]);
    }
    planar(&pts)
}

fn star() -> Vec<[f64; 3]> {
    let vertex = |k: usize| {
        let a = FRAC_PI_2 + k as f64 * TAU / 5.0;
        [0.5 + 0.5 * a.cos(), 0.5 + 0.5 * a.sin()]
    };
    planar(&[0, 2, 4, 1, 3, 0].map(vertex))
}

fn stir() -> Vec<[f64; 3]> {
    planar(&arc([0.5, 0.5], 0.5, 0.0, 2.5 * TAU))
}

fn s_curve() -> Vec<[f64; 3]> {
    let mut pts = arc([0.5, 0.75], 0.25, 0.0, 1.5 * PI);
    pts.extend(arc([0.5, 0.25], 0.25, FRAC_PI_2, -PI).into_iter().skip(1));
    planar(&pts)
}

fn triangle() -> Vec<[f64; 3]> {
    let h = 3f64.sqrt() / 2.0;
    planar(&[[0.5, 0.0], [1.0, 0.0], [0.5, h], [0.0, 0.0], [0.5, 0.0]])
}

fn drink() -> Vec<[f64; 3]> {
    let mut pts = vec![[0.0, 0.0, 0.0], [0.6, 0.0, 0.0]];
    for a in arc([0.6, 0.4], 0.4, -FRAC_PI_2, FRAC_PI_2).into_iter().skip(1) {
        pts.push([a[0], 0.1 * (a[1] / 0.8 * PI).sin(), a[1]]);
    }
    for i in 1..=10 {
        let f = i as f64 / 10.0;
        pts.push([0.6 - 0.6 * f, 0.0, 0.8 - 0.8 * f]);
    }
    pts
}

fn knock() -> Vec<[f64; 3]> {
    let mut pts = vec![[0.0, 0.0, 0.0], [0.7, 0.0, 0.4]];
    for _ in 0..3 {
        pts.push([0.55, 0.0, 0.42]);
        pts.push([0.7, 0.0, 0.4]);
    }
    pts.push([0.0, 0.05, 0.0]);
    pts
}

fn throw() -> Vec<[f64; 3]> {
    let mut pts = Vec::new();
    for a in arc([0.3, 0.3], 0.3, -FRAC_PI_2, -PI - FRAC_PI_2) {
        pts.push([a[0] - 0.3, 0.05 * (a[1] * PI).sin(), a[1]]);
    }
    for a in arc([0.0, 0.0], 0.6, FRAC_PI_2, 0.0).into_iter().skip(1) {
        pts.push([a[0] + 0.0, 0.0, a[1]]);
    }
    pts
}

fn wave() -> Vec<[f64; 3]> {
    let mut pts = vec![[0.0, 0.0, 0.0]];
    let n = 150;
    for i in 0..=n {
        let f = i as f64 / n as f64;
        pts.push([0.2, 0.3 * (3.0 * TAU * f).sin(), 0.6 + 0.05 * (PI * f).sin()]);
    }
    pts.push([0.0, 0.0, 0.05]);
    pts
}

/// Closed-form template of a task inside the unit box. Tracing variants lie
/// in the `z = 0` plane; mid-air variants of the tracing shapes add a smooth
/// lift.
pub fn task_path(task: TaskKind) -> TaskPath {
    let base = match task.name() {
        TaskName::Lw => lw(),
        TaskName::Star => star(),
        TaskName::Stir => stir(),
        TaskName::S => s_curve(),
        TaskName::Triangle => triangle(),
        TaskName::Drink => drink(),
        TaskName::Knock => knock(),
        TaskName::Throw => throw(),
        TaskName::Wave => wave(),
    };
    let shaped = match (task.category(), task.name().supports_line_tracing()) {
        (TaskCategory::MidAir, true) => lift(base, 0.3),
        _ => base,
    };
    fit_unit_box(shaped)
}
