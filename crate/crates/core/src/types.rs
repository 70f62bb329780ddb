//! Domain types and the frame conventions shared by every module.
//!
//! Every pose is expressed in the current ego frame: x forward, y left,
//! heading counter-clockwise from the current ego heading. The current
//! pose is the origin.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of past key frames fed to the planner (current frame included).
pub const HISTORY_FRAMES: usize = 4;
/// Number of planned future key frames.
pub const FUTURE_FRAMES: usize = 6;
/// Seconds between key frames (2 Hz).
pub const FRAME_PERIOD: f64 = 0.5;
/// Lateral displacement (m) at the final future waypoint beyond which a turn command is issued.
pub const TURN_THRESHOLD: f64 = 2.0;

/// Wraps an angle into `(-π, π]`. Values already in range are returned untouched,
/// so the map is exactly idempotent.
pub fn normalize_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    /// Builds a pose with its heading wrapped into `(-π, π]`.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub const ORIGIN: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 3]> for Pose2 {
    fn from(v: [f64; 3]) -> Self {
        Pose2 {
            x: v[0],
            y: v[1],
            theta: v[2],
        }
    }
}

impl From<Pose2> for [f64; 3] {
    fn from(p: Pose2) -> Self {
        [p.x, p.y, p.theta]
    }
}

/// Instantaneous ego velocity and acceleration in the current ego frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Kinematics {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub ax: f64,
    pub ay: f64,
    pub beta: f64,
}

impl Kinematics {
    pub fn velocity(&self) -> [f64; 3] {
        [self.vx, self.vy, self.omega]
    }

    pub fn acceleration(&self) -> [f64; 3] {
        [self.ax, self.ay, self.beta]
    }

    pub fn is_finite(&self) -> bool {
        self.velocity()
            .iter()
            .chain(self.acceleration().iter())
            .all(|v| v.is_finite())
    }
}

/// High-level navigation command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Command {
    #[serde(rename = "left")]
    TurnLeft,
    #[serde(rename = "straight")]
    GoStraight,
    #[serde(rename = "right")]
    TurnRight,
}

impl Command {
    /// One-hot encoding in (left, straight, right) order.
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            Command::TurnLeft => [1.0, 0.0, 0.0],
            Command::GoStraight => [0.0, 1.0, 0.0],
            Command::TurnRight => [0.0, 0.0, 1.0],
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Command::TurnLeft => Command::TurnRight,
            Command::GoStraight => Command::GoStraight,
            Command::TurnRight => Command::TurnLeft,
        }
    }
}

/// Time-ordered poses sampled at a fixed period.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Pose2>,
    pub period: f64,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Pose2>) -> Self {
        Trajectory {
            waypoints,
            period: FRAME_PERIOD,
        }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Flattens to `[x0, y0, θ0, x1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.waypoints.iter().flat_map(|p| [p.x, p.y, p.theta]).collect()
    }

    /// Inverse of [`Trajectory::to_flat`]; headings are wrapped.
    pub fn from_flat(values: &[f64]) -> Self {
        assert_eq!(values.len() % 3, 0, "flat trajectory length must be a multiple of 3");
        Trajectory::new(values.chunks_exact(3).map(|c| Pose2::new(c[0], c[1], c[2])).collect())
    }

    /// Reflects about the x axis.
    pub fn mirrored(&self) -> Self {
        Trajectory {
            waypoints: self.waypoints.iter().map(|p| Pose2::new(p.x, -p.y, -p.theta)).collect(),
            period: self.period,
        }
    }
}

/// A rectangle in the BEV plane. `length` runs along `heading`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedBox {
    pub fn new(cx: f64, cy: f64, heading: f64, length: f64, width: f64) -> Self {
        OrientedBox {
            cx,
            cy,
            heading: normalize_angle(heading),
            length,
            width,
        }
    }

    /// Box of the given footprint centred on a pose.
    pub fn at_pose(pose: &Pose2, length: f64, width: f64) -> Self {
        OrientedBox::new(pose.x, pose.y, pose.theta, length, width)
    }

    /// Unit vectors along length and width.
    pub fn axes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.heading.sin_cos();
        [[c, s], [-s, c]]
    }

    pub fn half_extents(&self) -> [f64; 2] {
        [0.5 * self.length, 0.5 * self.width]
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let [u, v] = self.axes();
        let [hl, hw] = self.half_extents();
        let at = |a: f64, b: f64| [self.cx + a * u[0] + b * v[0], self.cy + a * u[1] + b * v[1]];
        [at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)]
    }

    /// Point containment, closed boundary widened by `tol`.
    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        let [u, v] = self.axes();
        let [hl, hw] = self.half_extents();
        let dx = x - self.cx;
        let dy = y - self.cy;
        (dx * u[0] + dy * u[1]).abs() <= hl + tol && (dx * v[0] + dy * v[1]).abs() <= hw + tol
    }

    /// Radius of the circumscribed circle.
    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Axis-aligned bounds `(x_min, x_max, y_min, y_max)`.
    pub fn aabb(&self) -> (f64, f64, f64, f64) {
        let [u, v] = self.axes();
        let [hl, hw] = self.half_extents();
        let ex = hl * u[0].abs() + hw * v[0].abs();
        let ey = hl * u[1].abs() + hw * v[1].abs();
        (self.cx - ex, self.cx + ex, self.cy - ey, self.cy + ey)
    }

    pub fn is_valid(&self) -> bool {
        [self.cx, self.cy, self.heading, self.length, self.width]
            .iter()
            .all(|v| v.is_finite())
            && self.length > 0.0
            && self.width > 0.0
    }

    pub fn mirrored(&self) -> Self {
        OrientedBox::new(self.cx, -self.cy, -self.heading, self.length, self.width)
    }
}

/// One evaluation unit.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoSample {
    pub sample_id: String,
    /// Oldest first; the last entry is the current frame at the origin.
    pub history: Trajectory,
    pub kinematics: Kinematics,
    pub command: Command,
    pub gt_future: Trajectory,
    /// Obstacles per future frame, in the current ego frame.
    pub obstacles: Vec<Vec<OrientedBox>>,
}

impl EgoSample {
    /// Reflects the whole sample about the x axis.
    pub fn mirrored(&self) -> Self {
        let k = &self.kinematics;
        EgoSample {
            sample_id: self.sample_id.clone(),
            history: self.history.mirrored(),
            kinematics: Kinematics {
                vx: k.vx,
                vy: -k.vy,
                omega: -k.omega,
                ax: k.ax,
                ay: -k.ay,
                beta: -k.beta,
            },
            command: self.command.mirrored(),
            gt_future: self.gt_future.mirrored(),
            obstacles: self
                .obstacles
                .iter()
                .map(|frame| frame.iter().map(OrientedBox::mirrored).collect())
                .collect(),
        }
    }
}

/// Command from the lateral displacement at the final (3 s) waypoint.
pub fn derive_command(gt_future: &Trajectory) -> Result<Command> {
    if gt_future.len() < FUTURE_FRAMES {
        return Err(Error::Dimension {
            context: "derive_command future waypoints",
            expected: FUTURE_FRAMES,
            actual: gt_future.len(),
        });
    }
    let y = gt_future.waypoints[FUTURE_FRAMES - 1].y;
    Ok(if y > TURN_THRESHOLD {
        Command::TurnLeft
    } else if y < -TURN_THRESHOLD {
        Command::TurnRight
    } else {
        Command::GoStraight
    })
}

/// Stored per-waypoint headings, wrapped into `(-π, π]`.
pub fn heading_angles(traj: &Trajectory) -> Vec<f64> {
    traj.waypoints.iter().map(|p| normalize_angle(p.theta)).collect()
}

/// Signed turn angle at each interior waypoint, between the incoming and
/// outgoing segment directions. Zero-length segments yield 0.
pub fn curvature_angles(traj: &Trajectory) -> Result<Vec<f64>> {
    if traj.len() < 3 {
        return Err(Error::Dimension {
            context: "curvature_angles waypoints (minimum)",
            expected: 3,
            actual: traj.len(),
        });
    }
    Ok(traj
        .waypoints
        .windows(3)
        .map(|w| turn_angle(&w[0], &w[1], &w[2]))
        .collect())
}

pub(crate) fn turn_angle(a: &Pose2, b: &Pose2, c: &Pose2) -> f64 {
    let (ux, uy) = (b.x - a.x, b.y - a.y);
    let (vx, vy) = (c.x - b.x, c.y - b.y);
    if ux.hypot(uy) < 1e-12 || vx.hypot(vy) < 1e-12 {
        return 0.0;
    }
    (ux * vy - uy * vx).atan2(ux * vx + uy * vy)
}
