//! Open-loop evaluation: L2 error per horizon, occupancy-grid collision rate,
//! and the ground-truth collision audit.

pub mod audit;
pub mod collision;
pub mod grid;
pub mod l2;
pub mod sat;

use serde::{Deserialize, Serialize};

pub use audit::{audit_gt_collisions, AuditReport, AuditRow};
pub use collision::{
    collision_at_waypoint, collision_rate, CollisionOptions, CollisionReport, EgoSpec, HeadingSource, ObstacleTiming,
};
pub use grid::{rasterize_box, rasterize_box_cover, Extent, OccupancyGrid, OccupancyRule};
pub use l2::{l2_errors, l2_errors_with, L2Errors, L2Variant};
pub use sat::{box_distance, exact_intersects, penetration_depth};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::types::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub collision: CollisionOptions,
    pub l2_variant: L2Variant,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            collision: CollisionOptions::default(),
            l2_variant: L2Variant::Mean,
        }
    }
}

/// Dataset-level metrics in the layout of the usual planning table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub options: EvalOptions,
    /// Mean L2 (m) per horizon, averaged over samples.
    pub l2: Vec<f64>,
    pub l2_avg: f64,
    /// Collision rate (%) per horizon.
    pub collision: Vec<f64>,
    pub collision_avg: f64,
    pub collision_counts: Vec<usize>,
}

impl EvalReport {
    /// Markdown table with one row per metric and one column per horizon.
    pub fn to_table(&self) -> String {
        let c = &self.options.collision;
        let variant = match self.options.l2_variant {
            L2Variant::Mean => "mean over waypoints",
            L2Variant::Endpoint => "endpoint",
        };
        let mut out = format!(
            "{} samples, grid {} m, ego {} x {} m, L2 {variant}\n",
            self.samples, c.grid_size, c.ego.length, c.ego.width
        );
        let heads: String = (1..=self.l2.len())
            .map(|s| format!(" {:>7} |", format!("{s}s")))
            .collect();
        out.push_str(&format!("| {:<13} |{heads}    Avg. |\n", "Metric"));
        out.push_str(&format!(
            "|:{}|{}\n",
            "-".repeat(14),
            "--------:|".repeat(self.l2.len() + 1)
        ));
        let row = |name: &str, vals: &[f64], avg: f64| {
            let cells: String = vals.iter().map(|v| format!(" {v:>7.4} |")).collect();
            format!("| {name:<13} |{cells} {avg:>7.4} |\n")
        };
        out.push_str(&row("L2 (m)", &self.l2, self.l2_avg));
        out.push_str(&row("Collision (%)", &self.collision, self.collision_avg));
        out
    }
}

/// Per-sample L2 errors and collision flags of `preds`, aggregated.
pub fn evaluate(ds: &Dataset, preds: &[Trajectory], opts: &EvalOptions) -> Result<EvalReport> {
    if preds.len() != ds.samples.len() {
        return Err(Error::Dimension {
            context: "evaluate predictions per sample",
            expected: ds.samples.len(),
            actual: preds.len(),
        });
    }
    if ds.samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let frames = opts.collision.horizon_frames;
    let per_sample = opts
        .collision
        .execution
        .map_range(preds.len(), |i| {
            l2_errors_with(&preds[i], &ds.samples[i].gt_future, frames, opts.l2_variant)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let h = frames / l2::FRAMES_PER_SECOND;
    let n = per_sample.len() as f64;
    let l2: Vec<f64> = (0..h)
        .map(|k| per_sample.iter().map(|e| e.per_horizon[k]).sum::<f64>() / n)
        .collect();
    let l2_avg = l2.iter().sum::<f64>() / h as f64;
    let coll = collision_rate(ds, preds, &opts.collision)?;
    Ok(EvalReport {
        samples: ds.samples.len(),
        options: opts.clone(),
        l2,
        l2_avg,
        collision: coll.rates,
        collision_avg: coll.avg,
        collision_counts: coll.counts,
    })
}
