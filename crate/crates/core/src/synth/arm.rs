use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Matrix3x6, Matrix4, Vector3, Vector6};

use super::SynthError;
use crate::telemetry::{EndEffectorStream, JointStream};

/// Tracking error above which [`track`] gives up, in meters.
pub const MAX_TRACKING_ERROR: f64 = 0.005;

/// Six-joint revolute arm in standard Denavit-Hartenberg form.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub d: [f64; 6],
    pub a: [f64; 6],
    pub alpha: [f64; 6],
    pub joint_limits: [(f64, f64); 6],
    pub base: [f64; 3],
    /// Configuration the solver starts from.
    pub home: [f64; 6],
    /// Damping of the least-squares step, m.
    pub damping: f64,
}

impl Default for ArmModel {
    fn default() -> Self {
        Self::ur3_like()
    }
}

impl ArmModel {
    /// Link proportions of a UR3-class arm.
    pub fn ur3_like() -> Self {
        Self {
            d: [0.1519, 0.0, 0.0, 0.11235, 0.08535, 0.0819],
            a: [0.0, -0.24365, -0.21325, 0.0, 0.0, 0.0],
            alpha: [FRAC_PI_2, 0.0, 0.0, FRAC_PI_2, -FRAC_PI_2, 0.0],
            joint_limits: [(-2.0 * PI, 2.0 * PI); 6],
            base: [0.0; 3],
            home: [0.0, -1.2, 1.6, -1.97, -FRAC_PI_2, 0.0],
            damping: 0.01,
        }
    }

    /// `d1, |a2|, |a3|, d4, d5, d6`.
    pub fn link_lengths(&self) -> [f64; 6] {
        [
            self.d[0],
            self.a[1].abs(),
            self.a[2].abs(),
            self.d[3],
            self.d[4],
            self.d[5],
        ]
    }

    fn shoulder(&self) -> Vector3<f64> {
        Vector3::new(self.base[0], self.base[1], self.base[2] + self.d[0])
    }

    /// Upper bound on the distance from the shoulder to any reachable point.
    pub fn reach(&self) -> f64 {
        self.link_lengths()[1..].iter().sum()
    }

    pub fn within_reach(&self, p: [f64; 3]) -> bool {
        (Vector3::from(p) - self.shoulder()).norm() < self.reach()
    }

    fn link(&self, i: usize, q: f64) -> Matrix4<f64> {
        let (st, ct) = q.sin_cos();
        let (sa, ca) = self.alpha[i].sin_cos();
        Matrix4::new(
            ct,
            -st * ca,
            st * sa,
            self.a[i] * ct,
            st,
            ct * ca,
            -ct * sa,
            self.a[i] * st,
            0.0,
            sa,
            ca,
            self.d[i],
            0.0,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Origin and z axis of frames 0..=6.
    fn frames(&self, q: &[f64; 6]) -> [(Vector3<f64>, Vector3<f64>); 7] {
        let mut t = Matrix4::identity();
        t[(0, 3)] = self.base[0];
        t[(1, 3)] = self.base[1];
        t[(2, 3)] = self.base[2];
        let mut out = [(Vector3::zeros(), Vector3::z()); 7];
        out[0] = (Vector3::from(self.base), Vector3::z());
        for i in 0..6 {
            t *= self.link(i, q[i]);
            out[i + 1] = (
                Vector3::new(t[(0, 3)], t[(1, 3)], t[(2, 3)]),
                Vector3::new(t[(0, 2)], t[(1, 2)], t[(2, 2)]),
            );
        }
        out
    }

    /// End-effector position.
    pub fn fk(&self, q: &[f64; 6]) -> [f64; 3] {
        self.frames(q)[6].0.into()
    }

    /// Position rows of the geometric Jacobian.
    pub fn jacobian(&self, q: &[f64; 6]) -> Matrix3x6<f64> {
        let f = self.frames(q);
        let tip = f[6].0;
        let mut j = Matrix3x6::zeros();
        for i in 0..6 {
            let (origin, axis) = f[i];
            j.set_column(i, &axis.cross(&(tip - origin)));
        }
        j
    }

    /// Damped least-squares iterations from `q0` towards `target`. Returns
    /// the final configuration and its position error.
    pub fn solve(&self, target: [f64; 3], q0: [f64; 6], tol: f64, max_iter: usize) -> ([f64; 6], f64) {
        let target = Vector3::from(target);
        let mut q = Vector6::from(q0);
        let lambda2 = self.damping * self.damping;
        let mut err = f64::INFINITY;
        for _ in 0..=max_iter {
            let qa: [f64; 6] = q.into();
            let e = target - Vector3::from(self.fk(&qa));
            err = e.norm();
            if err < tol {
                break;
            }
            let j = self.jacobian(&qa);
            let jjt = j * j.transpose() + Matrix3::identity() * lambda2;
            let Some(y) = jjt.cholesky().map(|c| c.solve(&e)) else {
                break;
            };
            q += j.transpose() * y;
        }
        (q.into(), err)
    }

    fn within_limits(&self, q: &[f64; 6]) -> bool {
        q.iter()
            .zip(&self.joint_limits)
            .all(|(v, (lo, hi))| (lo..=hi).contains(&v))
    }
}

const SOLVE_TOLERANCE: f64 = 1e-9;
const FIRST_FRAME_ITERATIONS: usize = 500;
const FRAME_ITERATIONS: usize = 50;

/// Follows `hand` frame by frame, warm-starting each solve from the previous
/// configuration. Returns the joint series and the end-effector series the
/// arm actually produces.
pub fn track(arm: &ArmModel, hand: &EndEffectorStream) -> Result<(JointStream, EndEffectorStream), SynthError> {
    let targets = hand.values();
    let times = hand.times();
    if let Some(i) = targets.iter().position(|&p| !arm.within_reach(p)) {
        return Err(SynthError::OutOfWorkspace(format!(
            "frame {i} at {:?} is beyond the {:.3} m reach",
            targets[i],
            arm.reach()
        )));
    }
    let mut q = arm.home;
    let mut joints = Vec::with_capacity(targets.len());
    let mut reached = Vec::with_capacity(targets.len());
    for (i, &p) in targets.iter().enumerate() {
        let iters = if i == 0 { FIRST_FRAME_ITERATIONS } else { FRAME_ITERATIONS };
        let (next, err) = arm.solve(p, q, SOLVE_TOLERANCE, iters);
        if !(err < MAX_TRACKING_ERROR) {
            return Err(SynthError::IkDivergence { frame: i, error: err });
        }
        if !arm.within_limits(&next) {
            return Err(SynthError::OutOfWorkspace(format!(
                "frame {i} needs joints outside their limits"
            )));
        }
        q = next;
        joints.push(q);
        reached.push(arm.fk(&q));
    }
    Ok((
        JointStream::from_parts(&times, &joints)?,
        EndEffectorStream::from_parts(&times, &reached)?,
    ))
}
