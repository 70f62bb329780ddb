//! Occupancy-grid collision checks and per-horizon collision rates.
//!
//! The ego footprint at a waypoint is the set of cells whose centre lies in the
//! ego box. A waypoint collides when any footprint cell is occupied in that
//! frame's grid. Under [`OccupancyRule::Cover`] a collision is reported for
//! every pair whose boxes come closer than `g/√2`, which is the grid-size
//! dependent false-collision band the audit measures.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::grid::{rasterize_box, Extent, OccupancyGrid, OccupancyRule};
use super::l2::{check_horizon_frames, FRAMES_PER_SECOND};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::types::{normalize_angle, EgoSample, OrientedBox, Pose2, Trajectory, FUTURE_FRAMES};

/// Ego footprint. Defaults follow the common nuScenes ego-vehicle convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub length: f64,
    pub width: f64,
}

impl Default for EgoSpec {
    fn default() -> Self {
        EgoSpec {
            length: 4.08,
            width: 1.85,
        }
    }
}

impl EgoSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::config("ego.length", "must be > 0"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::config("ego.width", "must be > 0"));
        }
        Ok(())
    }

    pub fn box_at(&self, pose: &Pose2) -> OrientedBox {
        OrientedBox::at_pose(pose, self.length, self.width)
    }
}

/// Which obstacle set a waypoint is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObstacleTiming {
    /// Waypoint k against the obstacles of future frame k.
    #[default]
    PerFrame,
    /// Every waypoint against the obstacles of the first future frame.
    FirstFrame,
}

/// Heading used to place the ego box at a predicted waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadingSource {
    #[default]
    Predicted,
    /// Direction of the segment arriving at the waypoint (from the origin for the first).
    SegmentDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionOptions {
    pub grid_size: f64,
    pub extent: Extent,
    pub ego: EgoSpec,
    pub rule: OccupancyRule,
    pub timing: ObstacleTiming,
    pub heading: HeadingSource,
    pub horizon_frames: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for CollisionOptions {
    fn default() -> Self {
        CollisionOptions {
            grid_size: 0.5,
            extent: Extent::default(),
            ego: EgoSpec::default(),
            rule: OccupancyRule::default(),
            timing: ObstacleTiming::default(),
            heading: HeadingSource::default(),
            horizon_frames: FUTURE_FRAMES,
            execution: Execution::default(),
        }
    }
}

impl CollisionOptions {
    pub fn with_grid_size(self, grid_size: f64) -> Self {
        CollisionOptions { grid_size, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.ego.validate()?;
        check_horizon_frames(self.horizon_frames)?;
        OccupancyGrid::empty(self.grid_size, self.extent).map(|_| ())
    }

    fn horizons(&self) -> usize {
        self.horizon_frames / FRAMES_PER_SECOND
    }
}

/// True iff any cell of the ego footprint at `pose` is occupied.
pub fn collision_at_waypoint(pose: &Pose2, ego: &EgoSpec, grid: &OccupancyGrid) -> bool {
    if grid.occupied_count() == 0 {
        return false;
    }
    rasterize_box(&ego.box_at(pose), grid)
        .into_iter()
        .any(|c| grid.is_occupied(c))
}

/// Ego placement poses for a trajectory under the chosen heading source.
pub fn placement_poses(traj: &Trajectory, heading: HeadingSource) -> Vec<Pose2> {
    match heading {
        HeadingSource::Predicted => traj.waypoints.clone(),
        HeadingSource::SegmentDirection => {
            let mut prev = Pose2::ORIGIN;
            traj.waypoints
                .iter()
                .map(|p| {
                    let (dx, dy) = (p.x - prev.x, p.y - prev.y);
                    let theta = if dx.hypot(dy) > 1e-9 { dy.atan2(dx) } else { prev.theta };
                    let out = Pose2::new(p.x, p.y, normalize_angle(theta));
                    prev = out;
                    out
                })
                .collect()
        }
    }
}

fn frame_obstacles(sample: &EgoSample, k: usize, timing: ObstacleTiming) -> &[OrientedBox] {
    let frame = match timing {
        ObstacleTiming::PerFrame => k,
        ObstacleTiming::FirstFrame => 0,
    };
    sample.obstacles.get(frame).map(Vec::as_slice).unwrap_or(&[])
}

/// Grid-based collision flag for each of the first `horizon_frames` waypoints.
///
/// Only obstacles that could share a cell with the ego box are rasterized;
/// anything farther than the cell diagonal cannot affect the result.
pub fn waypoint_collisions(sample: &EgoSample, traj: &Trajectory, opts: &CollisionOptions) -> Result<Vec<bool>> {
    if traj.len() < opts.horizon_frames {
        return Err(Error::Dimension {
            context: "collision trajectory length",
            expected: opts.horizon_frames,
            actual: traj.len(),
        });
    }
    let poses = placement_poses(traj, opts.heading);
    let reach = opts.grid_size * SQRT_2;
    let mut flags = Vec::with_capacity(opts.horizon_frames);
    for (k, pose) in poses.iter().take(opts.horizon_frames).enumerate() {
        let ego_box = opts.ego.box_at(pose);
        let near: Vec<&OrientedBox> = frame_obstacles(sample, k, opts.timing)
            .iter()
            .filter(|b| {
                (b.cx - ego_box.cx).hypot(b.cy - ego_box.cy) <= b.circumradius() + ego_box.circumradius() + reach
            })
            .collect();
        if near.is_empty() {
            flags.push(false);
            continue;
        }
        let grid = OccupancyGrid::from_boxes(opts.grid_size, opts.extent, near, opts.rule)?;
        flags.push(collision_at_waypoint(pose, &opts.ego, &grid));
    }
    Ok(flags)
}

/// Exact-geometry collision flag for each of the first `frames` waypoints.
pub fn exact_waypoint_collisions(
    sample: &EgoSample,
    traj: &Trajectory,
    ego: &EgoSpec,
    frames: usize,
    timing: ObstacleTiming,
) -> Vec<bool> {
    traj.waypoints
        .iter()
        .take(frames)
        .enumerate()
        .map(|(k, pose)| {
            let ego_box = ego.box_at(pose);
            frame_obstacles(sample, k, timing)
                .iter()
                .any(|b| super::sat::exact_intersects(&ego_box, b))
        })
        .collect()
}

/// Converts per-waypoint flags into per-horizon flags (any collision up to the horizon).
pub fn horizon_flags(waypoint_flags: &[bool], horizons: usize) -> Vec<bool> {
    (1..=horizons)
        .map(|h| waypoint_flags[..h * FRAMES_PER_SECOND].iter().any(|&f| f))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub grid_size: f64,
    /// `flags[s][h]`: sample `s` collides within horizon `h + 1` seconds.
    pub flags: Vec<Vec<bool>>,
    pub counts: Vec<usize>,
    /// Percentages per horizon.
    pub rates: Vec<f64>,
    pub avg: f64,
}

/// Per-sample collision rates of `trajs` against each sample's obstacles.
pub fn collision_rate(ds: &Dataset, trajs: &[Trajectory], opts: &CollisionOptions) -> Result<CollisionReport> {
    opts.validate()?;
    if trajs.len() != ds.samples.len() {
        return Err(Error::Dimension {
            context: "collision_rate predictions per sample",
            expected: ds.samples.len(),
            actual: trajs.len(),
        });
    }
    let horizons = opts.horizons();
    let per_sample = opts.execution.map_range(trajs.len(), |i| {
        waypoint_collisions(&ds.samples[i], &trajs[i], opts).map(|w| horizon_flags(&w, horizons))
    });
    let flags = per_sample.into_iter().collect::<Result<Vec<_>>>()?;
    let counts: Vec<usize> = (0..horizons).map(|h| flags.iter().filter(|f| f[h]).count()).collect();
    let n = flags.len();
    let rates: Vec<f64> = counts
        .iter()
        .map(|&c| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 })
        .collect();
    let avg = rates.iter().sum::<f64>() / horizons as f64;
    Ok(CollisionReport {
        grid_size: opts.grid_size,
        flags,
        counts,
        rates,
        avg,
    })
}
