//! Synthetic scenarios: constant-speed straight lines and constant-curvature
//! arcs, rolled out exactly, with obstacles placed at a controlled clearance
//! from the ground-truth ego boxes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{box_distance, EgoSpec};
use crate::types::{
    derive_command, EgoSample, Kinematics, OrientedBox, Pose2, Trajectory, FRAME_PERIOD, FUTURE_FRAMES, HISTORY_FRAMES,
    TURN_THRESHOLD,
};

/// Turning samples must end the horizon outside this heading band (rad), so
/// the straight fraction shows up directly in the heading distribution.
const MIN_TURN_HEADING: f64 = 0.2;
const MAX_TURN_ATTEMPTS: usize = 10_000;
const MAX_PLACEMENT_ATTEMPTS: usize = 50;
/// Largest clearance that still fits the evaluation extent.
const MAX_CLEARANCE: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    /// Probability that a sample drives a straight line.
    pub straight_fraction: f64,
    /// Ego speed interval (m/s).
    pub speed_range: (f64, f64),
    /// Turning radius interval (m) for arc samples.
    pub turn_radius_range: (f64, f64),
    /// Mean obstacles per sample (Poisson).
    pub obstacle_density: f64,
    /// Interval (m) for the minimum gap between an obstacle and the GT ego boxes.
    pub clearance_range: (f64, f64),
    /// Probability that an obstacle moves at constant velocity along its heading.
    pub moving_fraction: f64,
    /// Ego footprint used to measure clearance.
    pub ego: EgoSpec,
    pub rng_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_samples: 1000,
            straight_fraction: 0.8,
            speed_range: (2.0, 15.0),
            turn_radius_range: (10.0, 80.0),
            obstacle_density: 4.0,
            clearance_range: (1.0, 12.0),
            moving_fraction: 0.2,
            ego: EgoSpec::default(),
            rng_seed: 0,
        }
    }
}

fn check_range(field: &str, (lo, hi): (f64, f64), min: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::config(field, format!("invalid interval [{lo}, {hi}]")));
    }
    if lo < min {
        return Err(Error::config(field, format!("lower bound must be >= {min}")));
    }
    Ok(())
}

fn check_fraction(field: &str, f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::config(field, format!("must lie in [0, 1], got {f}")));
    }
    Ok(())
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        check_fraction("straight_fraction", self.straight_fraction)?;
        check_fraction("moving_fraction", self.moving_fraction)?;
        check_range("speed_range", self.speed_range, 0.0)?;
        check_range("turn_radius_range", self.turn_radius_range, f64::MIN_POSITIVE)?;
        check_range("clearance_range", self.clearance_range, 0.0)?;
        if !(self.obstacle_density.is_finite() && self.obstacle_density >= 0.0) {
            return Err(Error::config("obstacle_density", "must be >= 0"));
        }
        if self.clearance_range.1 > MAX_CLEARANCE {
            return Err(Error::config(
                "clearance_range",
                format!(
                    "upper bound {} exceeds the scene extent ({MAX_CLEARANCE} m)",
                    self.clearance_range.1
                ),
            ));
        }
        self.ego.validate()?;
        if self.straight_fraction < 1.0 && self.n_samples > 0 && !self.turns_feasible() {
            return Err(Error::config(
                "turn_radius_range",
                "no speed/radius pair yields a turn beyond the command threshold within 3 s",
            ));
        }
        Ok(())
    }

    fn turns_feasible(&self) -> bool {
        // The usable region is not monotone in speed or radius, so scan a grid.
        const STEPS: usize = 64;
        let at = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / STEPS as f64;
        (0..=STEPS).any(|i| (0..=STEPS).any(|j| turn_is_usable(at(self.speed_range, i), at(self.turn_radius_range, j))))
    }
}

fn horizon_seconds() -> f64 {
    FUTURE_FRAMES as f64 * FRAME_PERIOD
}

fn turn_is_usable(speed: f64, radius: f64) -> bool {
    let phi = speed * horizon_seconds() / radius;
    phi > MIN_TURN_HEADING && phi <= PI && radius * (1.0 - phi.cos()) > TURN_THRESHOLD
}

/// Constant-speed, constant-curvature motion through the origin at heading 0.
#[derive(Debug, Clone, Copy)]
struct Motion {
    speed: f64,
    curvature: f64,
}

impl Motion {
    fn pose_at(&self, t: f64) -> Pose2 {
        let s = self.speed * t;
        if self.curvature == 0.0 {
            return Pose2::new(s, 0.0, 0.0);
        }
        let phi = s * self.curvature;
        Pose2::new(phi.sin() / self.curvature, (1.0 - phi.cos()) / self.curvature, phi)
    }

    fn kinematics(&self) -> Kinematics {
        let omega = self.speed * self.curvature;
        Kinematics {
            vx: self.speed,
            vy: 0.0,
            omega,
            ax: 0.0,
            ay: self.speed * omega,
            beta: 0.0,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn sample_motion(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Result<Motion> {
    if rng.random::<f64>() < cfg.straight_fraction {
        return Ok(Motion {
            speed: uniform(rng, cfg.speed_range),
            curvature: 0.0,
        });
    }
    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    for _ in 0..MAX_TURN_ATTEMPTS {
        let speed = uniform(rng, cfg.speed_range);
        let radius = uniform(rng, cfg.turn_radius_range);
        if turn_is_usable(speed, radius) {
            return Ok(Motion {
                speed,
                curvature: side / radius,
            });
        }
    }
    Err(Error::config(
        "turn_radius_range",
        "turn sampling rejected too often; widen speed_range or tighten turn_radius_range",
    ))
}

/// Half extent of `b` along the unit direction `n`.
fn support(b: &OrientedBox, n: [f64; 2]) -> f64 {
    let [u, v] = b.axes();
    let [hl, hw] = b.half_extents();
    hl * (u[0] * n[0] + u[1] * n[1]).abs() + hw * (v[0] * n[0] + v[1] * n[1]).abs()
}

struct Placement {
    frames: Vec<OrientedBox>,
}

fn obstacle_at_frames(base: &OrientedBox, anchor: usize, velocity: [f64; 2]) -> Vec<OrientedBox> {
    (0..FUTURE_FRAMES)
        .map(|j| {
            let dt = (j as f64 - anchor as f64) * FRAME_PERIOD;
            OrientedBox {
                cx: base.cx + velocity[0] * dt,
                cy: base.cy + velocity[1] * dt,
                ..*base
            }
        })
        .collect()
}

/// Minimum gap between the obstacle and the ego box at each matching frame.
fn path_clearance(ego_boxes: &[OrientedBox], frames: &[OrientedBox]) -> f64 {
    ego_boxes
        .iter()
        .zip(frames)
        .map(|(e, o)| box_distance(e, o))
        .fold(f64::INFINITY, f64::min)
}

fn place_obstacle(
    cfg: &SyntheticConfig,
    rng: &mut ChaCha8Rng,
    future: &[Pose2],
    ego_boxes: &[OrientedBox],
) -> Option<Placement> {
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let anchor = rng.random_range(0..FUTURE_FRAMES);
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let target = uniform(rng, cfg.clearance_range);
        let (length, width) = if rng.random::<f64>() < 0.8 {
            (uniform(rng, (3.5, 5.2)), uniform(rng, (1.6, 2.1)))
        } else {
            (uniform(rng, (0.4, 0.8)), uniform(rng, (0.4, 0.8)))
        };
        let jitter = uniform(rng, (-0.15, 0.15));
        let along = uniform(rng, (-0.5, 0.5)) * cfg.ego.length;
        let moving = rng.random::<f64>() < cfg.moving_fraction;
        let obstacle_speed = if moving {
            uniform(rng, (0.5, cfg.speed_range.1.max(0.5)))
        } else {
            0.0
        };

        let pose = future[anchor];
        let (s, c) = pose.theta.sin_cos();
        let forward = [c, s];
        let normal = [-s * side, c * side];
        let heading = pose.theta + jitter;
        let velocity = [obstacle_speed * heading.cos(), obstacle_speed * heading.sin()];
        let mut base = OrientedBox::new(
            pose.x + along * forward[0],
            pose.y + along * forward[1],
            heading,
            length,
            width,
        );
        let offset = 0.5 * cfg.ego.width + target + support(&base, normal);
        base.cx += offset * normal[0];
        base.cy += offset * normal[1];

        // Push along the normal until the closest frame sits at the target gap.
        let mut frames = obstacle_at_frames(&base, anchor, velocity);
        for _ in 0..8 {
            let gap = path_clearance(ego_boxes, &frames);
            let err = target - gap;
            if err.abs() < 1e-9 {
                break;
            }
            base.cx += err * normal[0];
            base.cy += err * normal[1];
            frames = obstacle_at_frames(&base, anchor, velocity);
        }
        let gap = path_clearance(ego_boxes, &frames);
        if gap >= cfg.clearance_range.0 && gap <= cfg.clearance_range.1 {
            return Some(Placement { frames });
        }
    }
    None
}

/// Generates a dataset; identical configs give identical datasets.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let poisson = if cfg.obstacle_density > 0.0 {
        Some(Poisson::new(cfg.obstacle_density).map_err(|e| Error::config("obstacle_density", e.to_string()))?)
    } else {
        None
    };
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let motion = sample_motion(cfg, &mut rng)?;
        let history: Vec<Pose2> = (0..HISTORY_FRAMES)
            .map(|k| motion.pose_at(-((HISTORY_FRAMES - 1 - k) as f64) * FRAME_PERIOD))
            .collect();
        let future: Vec<Pose2> = (1..=FUTURE_FRAMES)
            .map(|k| motion.pose_at(k as f64 * FRAME_PERIOD))
            .collect();
        let ego_boxes: Vec<OrientedBox> = future.iter().map(|p| cfg.ego.box_at(p)).collect();

        let n_obstacles = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        let mut obstacles = vec![Vec::new(); FUTURE_FRAMES];
        for _ in 0..n_obstacles {
            if let Some(p) = place_obstacle(cfg, &mut rng, &future, &ego_boxes) {
                for (frame, b) in obstacles.iter_mut().zip(p.frames) {
                    frame.push(b);
                }
            }
        }

        let gt_future = Trajectory::new(future);
        let command = derive_command(&gt_future)?;
        let mut history = history;
        history[HISTORY_FRAMES - 1] = Pose2::ORIGIN;
        samples.push(EgoSample {
            sample_id: format!("syn-{i:06}"),
            history: Trajectory::new(history),
            kinematics: motion.kinematics(),
            command,
            gt_future,
            obstacles,
        });
    }
    Ok(Dataset::new(samples, "synthetic"))
}
