//! Distribution of ground-truth futures: trajectory points, final heading
//! angles, and curvature (turn) angles, with the fraction of each that falls
//! inside a narrow band around zero.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::types::{curvature_angles, heading_angles, Pose2, Trajectory};

/// Half-width (rad) of the heading band.
pub const HEADING_BAND: f64 = 0.2;
/// Half-width (rad) of the curvature band.
pub const CURVATURE_BAND: f64 = 0.02;
pub const DEFAULT_BINS: usize = 100;

/// Bins are half-open `[lo, hi)` except the last, which is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl Histogram {
    pub fn with_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "edges",
                "need at least two finite, strictly increasing edges",
            ));
        }
        let n = edges.len() - 1;
        Ok(Histogram {
            edges,
            counts: vec![0; n],
            total: 0,
        })
    }

    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::config("bins", "need bins >= 1 and lo < hi"));
        }
        let w = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * w).collect();
        edges.push(hi);
        Histogram::with_edges(edges)
    }

    /// Adds a value; returns false (and counts nothing) when out of range.
    pub fn add(&mut self, v: f64) -> bool {
        let (lo, hi) = (self.edges[0], *self.edges.last().unwrap());
        if !(v >= lo && v <= hi) {
            return false;
        }
        let bin = (self.edges.partition_point(|&e| e <= v) - 1).min(self.counts.len() - 1);
        self.counts[bin] += 1;
        self.total += 1;
        true
    }

    /// Sum of counts over bins lying entirely inside `[lo, hi)`.
    pub fn count_between(&self, lo: f64, hi: f64) -> usize {
        self.edges
            .windows(2)
            .zip(&self.counts)
            .filter(|(w, _)| w[0] >= lo && w[1] <= hi)
            .map(|(_, c)| c)
            .sum()
    }

    /// CSV rows `bin_lo,bin_hi,count` under a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (w, c) in self.edges.windows(2).zip(&self.counts) {
            let _ = writeln!(out, "{},{},{}", w[0], w[1], c);
        }
        out
    }
}

/// Uniform edges covering `values` and `[-band, band]`, with `±band`
/// landing exactly on edges and at least one bin outside the band each side.
pub fn band_aligned_edges(values: &[f64], band: f64, bins: usize) -> Vec<f64> {
    let min = values.iter().copied().fold(-band, f64::min);
    let max = values.iter().copied().fold(band, f64::max);
    let target = (max - min) / bins.max(1) as f64;
    let per_half = (band / target).ceil().max(1.0) as usize;
    let w = band / per_half as f64;
    let below = ((-band - min) / w).ceil().max(1.0) as usize;
    let above = ((max - band) / w).ceil().max(1.0) as usize;
    let mut edges = Vec::with_capacity(below + 2 * per_half + above + 1);
    for j in (1..=below).rev() {
        edges.push(-band - j as f64 * w);
    }
    for j in 0..2 * per_half {
        edges.push(-band + j as f64 * w);
    }
    edges.push(band);
    for j in 1..=above {
        edges.push(band + j as f64 * w);
    }
    edges
}

fn band_histogram(values: &[f64], band: f64, bins: usize) -> Histogram {
    let mut h = Histogram::with_edges(band_aligned_edges(values, band, bins)).expect("aligned edges are increasing");
    for &v in values {
        h.add(v);
    }
    h
}

/// Fraction of values in `[-band, band)`.
pub fn band_fraction(values: &[f64], band: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v >= -band && v < band).count() as f64 / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub samples: usize,
    /// Every future waypoint `(x, y)` of every sample.
    pub points: Vec<(f64, f64)>,
    pub heading: Histogram,
    pub curvature: Histogram,
    pub heading_band: f64,
    pub curvature_band: f64,
    pub heading_band_fraction: f64,
    pub curvature_band_fraction: f64,
}

/// Per-sample statistics: final-waypoint heading and the turn angles along
/// the future path starting from the current pose.
fn sample_stats(future: &Trajectory) -> (f64, Vec<f64>) {
    let heading = heading_angles(future).last().copied().unwrap_or(0.0);
    let mut path = Vec::with_capacity(future.len() + 1);
    path.push(Pose2::ORIGIN);
    path.extend_from_slice(&future.waypoints);
    let curv = curvature_angles(&Trajectory::new(path)).unwrap_or_default();
    (heading, curv)
}

pub fn distribution_report(ds: &Dataset, bins: usize, execution: Execution) -> Result<DistributionReport> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if bins == 0 {
        return Err(Error::config("bins", "must be >= 1"));
    }
    let stats = execution.map(&ds.samples, |s| sample_stats(&s.gt_future));
    let headings: Vec<f64> = stats.iter().map(|(h, _)| *h).collect();
    let curvatures: Vec<f64> = stats.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    let points = ds
        .samples
        .iter()
        .flat_map(|s| s.gt_future.waypoints.iter().map(|p| (p.x, p.y)))
        .collect();
    Ok(DistributionReport {
        samples: ds.len(),
        points,
        heading: band_histogram(&headings, HEADING_BAND, bins),
        curvature: band_histogram(&curvatures, CURVATURE_BAND, bins),
        heading_band: HEADING_BAND,
        curvature_band: CURVATURE_BAND,
        heading_band_fraction: band_fraction(&headings, HEADING_BAND),
        curvature_band_fraction: band_fraction(&curvatures, CURVATURE_BAND),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn histogram_svg(h: &Histogram, title: &str, band: f64) -> String {
    let (w, ht, pad) = (640.0, 360.0, 40.0);
    let lo = h.edges[0];
    let hi = *h.edges.last().unwrap();
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let sx = |v: f64| pad + (v - lo) / (hi - lo) * (w - 2.0 * pad);
    let sy = |c: f64| ht - pad - c / peak * (ht - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{title}</text>"#,
        w / 2.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{pad}" width="{:.2}" height="{:.2}" fill="#f3e0c0"/>"##,
        sx(-band),
        sx(band) - sx(-band),
        ht - 2.0 * pad
    );
    for (e, c) in h.edges.windows(2).zip(&h.counts) {
        if *c == 0 {
            continue;
        }
        let (x0, x1, y) = (sx(e[0]), sx(e[1]), sy(*c as f64));
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#3a6ea5"/>"##,
            (x1 - x0).max(0.5),
            ht - pad - y
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        ht - pad,
        w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="{}" font-size="11">{lo:.3}</text>"#,
        ht - pad + 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{hi:.3}</text>"#,
        w - pad,
        ht - pad + 15.0
    );
    s.push_str("</svg>\n");
    s
}

fn scatter_svg(points: &[(f64, f64)]) -> String {
    let (w, ht, pad) = (480.0, 480.0, 30.0);
    let reach = points.iter().map(|(x, y)| x.abs().max(y.abs())).fold(1.0, f64::max);
    // Forward (x) points up, left (y) points left.
    let sx = |y: f64| w / 2.0 - y / reach * (w / 2.0 - pad);
    let sy = |x: f64| ht / 2.0 - x / reach * (ht / 2.0 - pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" font-size="14" text-anchor="middle">Trajectory points</text>"#,
        w / 2.0
    );
    for (x, y) in points {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1" fill="#3a6ea5" fill-opacity="0.3"/>"##,
            sx(*y),
            sy(*x)
        );
    }
    let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3" fill="red"/>"#, w / 2.0, ht / 2.0);
    s.push_str("</svg>\n");
    s
}

/// Writes CSV tables and SVG renderings of the report into `out_dir`.
pub fn export_figures(report: &DistributionReport, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut scatter = String::from("x,y\n");
    for (x, y) in &report.points {
        let _ = writeln!(scatter, "{x},{y}");
    }
    write(&dir.join("trajectory_points.csv"), &scatter)?;
    write(&dir.join("heading_hist.csv"), &report.heading.to_csv())?;
    write(&dir.join("curvature_hist.csv"), &report.curvature.to_csv())?;
    write(&dir.join("trajectory_points.svg"), &scatter_svg(&report.points))?;
    write(
        &dir.join("heading_hist.svg"),
        &histogram_svg(&report.heading, "Heading angle at 3 s (rad)", report.heading_band),
    )?;
    write(
        &dir.join("curvature_hist.svg"),
        &histogram_svg(&report.curvature, "Curvature angle (rad)", report.curvature_band),
    )
}
