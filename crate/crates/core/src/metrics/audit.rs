//! Ground-truth collision audit: how often logged, collision-free trajectories
//! register as colliding once obstacles are rasterized at a given grid size.

use serde::{Deserialize, Serialize};

use super::collision::{exact_waypoint_collisions, waypoint_collisions, CollisionOptions};
use crate::dataio::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub grid_size: f64,
    /// Samples whose GT trajectory hits an occupied cell.
    pub collisions: usize,
    pub percent: f64,
    /// Grid collisions with no exact-geometry contact.
    pub false_collisions: usize,
    pub false_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub total: usize,
    /// Samples whose GT ego box truly intersects an obstacle.
    pub exact_collisions: usize,
    pub exact_percent: f64,
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn row(&self, grid_size: f64) -> Option<&AuditRow> {
        self.rows.iter().find(|r| (r.grid_size - grid_size).abs() < 1e-12)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "GT collision audit over {} samples (exact geometry: {} = {:.2}%)\n",
            self.total, self.exact_collisions, self.exact_percent
        ));
        out.push_str("| Grid (m) | Collisions | Rate (%) | False | False (%) | Exact |\n");
        out.push_str("|---------:|-----------:|---------:|------:|----------:|------:|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {:>8.2} | {:>10} | {:>8.2} | {:>5} | {:>9.2} | {:>5} |\n",
                r.grid_size, r.collisions, r.percent, r.false_collisions, r.false_percent, self.exact_collisions
            ));
        }
        out
    }
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Runs the GT trajectories of `ds` through the grid collision test at every
/// size in `grid_sizes`; `base` supplies the remaining options.
pub fn audit_gt_collisions(ds: &Dataset, grid_sizes: &[f64], base: &CollisionOptions) -> Result<AuditReport> {
    if grid_sizes.is_empty() {
        return Err(Error::config("grid_sizes", "at least one grid size required"));
    }
    let exact: Vec<bool> = base.execution.map(&ds.samples, |s| {
        exact_waypoint_collisions(s, &s.gt_future, &base.ego, base.horizon_frames, base.timing)
            .into_iter()
            .any(|f| f)
    });
    let exact_collisions = exact.iter().filter(|&&f| f).count();
    let total = ds.samples.len();

    let mut rows = Vec::with_capacity(grid_sizes.len());
    for &g in grid_sizes {
        let opts = base.with_grid_size(g);
        opts.validate()?;
        let hits = opts
            .execution
            .map(&ds.samples, |s| {
                waypoint_collisions(s, &s.gt_future, &opts).map(|w| w.into_iter().any(|f| f))
            })
            .into_iter()
            .collect::<Result<Vec<bool>>>()?;
        let collisions = hits.iter().filter(|&&h| h).count();
        let false_collisions = hits.iter().zip(&exact).filter(|(&h, &e)| h && !e).count();
        rows.push(AuditRow {
            grid_size: g,
            collisions,
            percent: percent(collisions, total),
            false_collisions,
            false_percent: percent(false_collisions, total),
        });
    }
    Ok(AuditReport {
        total,
        exact_collisions,
        exact_percent: percent(exact_collisions, total),
        rows,
    })
}
