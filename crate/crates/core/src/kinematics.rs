//! Speed-curvature integration and frame transforms.
//!
//! The planner emits one `(speed, curvature)` pair per step. Holding both
//! constant over a step of length `dt` traces a circular arc (or a straight
//! segment when the curvature vanishes), so each step is integrated in closed
//! form rather than with an explicit Euler update.
//!
//! Conventions: heading 0 points along the ego forward axis (+x), the frame is
//! right-handed, and positive curvature turns left.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::parser::SpeedCurvatureSequence;

/// Curvatures below this magnitude are integrated as straight segments.
pub const STRAIGHT_CURVATURE_EPS: f64 = 1e-9;

/// A 2-D position in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2 { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Maps any angle onto (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    // in-range values pass through bit-for-bit
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut a = theta.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point2,
    /// Radians in (-pi, pi].
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Point2, heading: f64) -> Self {
        Pose {
            position,
            heading: normalize_angle(heading),
        }
    }

    pub fn identity() -> Self {
        Pose::new(Point2::default(), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Ego,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Point2>,
    pub frame: Frame,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of straight-line distances between consecutive waypoints, starting
    /// from `origin`.
    pub fn polyline_length_from(&self, origin: Point2) -> f64 {
        let mut prev = origin;
        let mut total = 0.0;
        for p in &self.points {
            total += prev.distance(p);
            prev = *p;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("speed and curvature lists differ in length ({speeds} vs {curvatures})")]
    LengthMismatch { speeds: usize, curvatures: usize },
    #[error("integration produced a non-finite pose at step {0}")]
    NonFinite(usize),
    #[error("ego history is empty")]
    EmptyHistory,
}

/// Integrates a speed-curvature sequence from the ego origin.
///
/// Returns one waypoint per step; the start pose itself is not included.
pub fn integrate(seq: &SpeedCurvatureSequence, dt: f64) -> Result<Trajectory, KinematicsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(KinematicsError::InvalidStep(dt));
    }
    if seq.speeds.len() != seq.curvatures.len() {
        return Err(KinematicsError::LengthMismatch {
            speeds: seq.speeds.len(),
            curvatures: seq.curvatures.len(),
        });
    }

    let (mut x, mut y, mut theta) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut points = Vec::with_capacity(seq.speeds.len());
    for (step, (&v, &k)) in seq.speeds.iter().zip(&seq.curvatures).enumerate() {
        if k.abs() < STRAIGHT_CURVATURE_EPS {
            let ds = v * dt;
            x += ds * theta.cos();
            y += ds * theta.sin();
        } else {
            let dtheta = v * k * dt;
            let next = theta + dtheta;
            x += (next.sin() - theta.sin()) / k;
            y -= (next.cos() - theta.cos()) / k;
            theta = next;
        }
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(KinematicsError::NonFinite(step));
        }
        points.push(Point2::new(x, y));
    }
    Ok(Trajectory {
        points,
        frame: Frame::Ego,
    })
}

/// Rigidly moves an ego-frame trajectory onto `start` in the global frame.
pub fn to_global(traj: &Trajectory, start: &Pose) -> Trajectory {
    debug_assert_eq!(traj.frame, Frame::Ego, "trajectory already global");
    let (sin, cos) = start.heading.sin_cos();
    let points = traj
        .points
        .iter()
        .map(|p| {
            Point2::new(
                start.position.x + cos * p.x - sin * p.y,
                start.position.y + sin * p.x + cos * p.y,
            )
        })
        .collect();
    Trajectory {
        points,
        frame: Frame::Global,
    }
}

/// The last observed ego pose anchors the predicted trajectory.
pub fn initial_pose_from_history(
    history: &[crate::dataset::EgoState],
) -> Result<Pose, KinematicsError> {
    let last = history.last().ok_or(KinematicsError::EmptyHistory)?;
    Ok(Pose::new(last.position(), last.heading))
}
