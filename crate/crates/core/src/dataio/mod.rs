//! JSON Lines sample files and the synthetic scenario generator.
//!
//! One object per line:
//!
//! ```text
//! {"sample_id": str,
//!  "history":   [[x, y, theta] x 4],        oldest first, last = [0, 0, 0]
//!  "kinematics": {"vx", "vy", "omega", "ax", "ay", "beta"},
//!  "command":   "left" | "straight" | "right",   optional
//!  "gt_future": [[x, y, theta] x 6],
//!  "obstacles": [[{"cx", "cy", "heading", "length", "width"}, ...] x 6]}
//! ```
//!
//! SI units, radians, UTF-8, LF line endings. Unknown keys are ignored.

mod synth;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use synth::{generate_synthetic, SyntheticConfig};

use crate::error::{Error, Result};
use crate::types::{
    derive_command, normalize_angle, Command, EgoSample, Kinematics, OrientedBox, Pose2, Trajectory, FUTURE_FRAMES,
    HISTORY_FRAMES,
};

/// Tolerance on the current-frame pose being the origin.
const ORIGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<EgoSample>,
    pub split_tag: String,
}

impl Dataset {
    pub fn new(samples: Vec<EgoSample>, split_tag: impl Into<String>) -> Self {
        Dataset {
            samples,
            split_tag: split_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks every sample invariant and id uniqueness.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, s) in self.samples.iter().enumerate() {
            let rec = SampleRecord::from(s);
            let checked = rec.into_sample(i + 1)?;
            if &checked != s {
                return Err(invalid(i + 1, &s.sample_id, "history", "not in canonical form"));
            }
            if !seen.insert(s.sample_id.as_str()) {
                return Err(invalid(i + 1, &s.sample_id, "sample_id", "duplicate id"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    sample_id: String,
    history: Vec<Pose2>,
    kinematics: Kinematics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    command: Option<Command>,
    gt_future: Vec<Pose2>,
    obstacles: Vec<Vec<OrientedBox>>,
}

impl From<&EgoSample> for SampleRecord {
    fn from(s: &EgoSample) -> Self {
        SampleRecord {
            sample_id: s.sample_id.clone(),
            history: s.history.waypoints.clone(),
            kinematics: s.kinematics,
            command: Some(s.command),
            gt_future: s.gt_future.waypoints.clone(),
            obstacles: s.obstacles.clone(),
        }
    }
}

fn invalid(line: usize, id: &str, field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidSample {
        line,
        sample_id: id.to_string(),
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn check_poses(
    line: usize,
    id: &str,
    field: &str,
    poses: &[Pose2],
    expected: usize,
    symbol: &str,
) -> Result<Vec<Pose2>> {
    if poses.len() != expected {
        return Err(invalid(
            line,
            id,
            field,
            format!("expected {symbol} = {expected} poses, got {}", poses.len()),
        ));
    }
    poses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if p.is_finite() {
                Ok(Pose2::new(p.x, p.y, normalize_angle(p.theta)))
            } else {
                Err(invalid(line, id, &format!("{field}[{k}]"), "non-finite value"))
            }
        })
        .collect()
}

impl SampleRecord {
    fn into_sample(self, line: usize) -> Result<EgoSample> {
        let id = self.sample_id;
        if id.is_empty() {
            return Err(invalid(line, &id, "sample_id", "empty"));
        }
        let mut history = check_poses(line, &id, "history", &self.history, HISTORY_FRAMES, "T_p")?;
        let current = history[HISTORY_FRAMES - 1];
        if current.x.abs() > ORIGIN_TOL || current.y.abs() > ORIGIN_TOL || current.theta.abs() > ORIGIN_TOL {
            return Err(invalid(
                line,
                &id,
                "history",
                format!("current pose must be the origin, got {:?}", <[f64; 3]>::from(current)),
            ));
        }
        history[HISTORY_FRAMES - 1] = Pose2::ORIGIN;
        let gt_future = Trajectory::new(check_poses(
            line,
            &id,
            "gt_future",
            &self.gt_future,
            FUTURE_FRAMES,
            "T_f",
        )?);
        if !self.kinematics.is_finite() {
            return Err(invalid(line, &id, "kinematics", "non-finite value"));
        }
        if self.obstacles.len() != FUTURE_FRAMES {
            return Err(invalid(
                line,
                &id,
                "obstacles",
                format!("expected T_f = {FUTURE_FRAMES} frames, got {}", self.obstacles.len()),
            ));
        }
        let mut obstacles = Vec::with_capacity(FUTURE_FRAMES);
        for (k, frame) in self.obstacles.into_iter().enumerate() {
            let mut boxes = Vec::with_capacity(frame.len());
            for (j, b) in frame.into_iter().enumerate() {
                if !b.is_valid() {
                    return Err(invalid(
                        line,
                        &id,
                        &format!("obstacles[{k}][{j}]"),
                        "box needs finite values and positive length/width",
                    ));
                }
                boxes.push(OrientedBox::new(b.cx, b.cy, b.heading, b.length, b.width));
            }
            obstacles.push(boxes);
        }
        let command = match self.command {
            Some(c) => c,
            None => derive_command(&gt_future)?,
        };
        Ok(EgoSample {
            sample_id: id,
            history: Trajectory::new(history),
            kinematics: self.kinematics,
            command,
            gt_future,
            obstacles,
        })
    }
}

fn split_from_path(path: &Path) -> &'static str {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    if stem.contains("train") {
        "train"
    } else if stem.contains("val") {
        "val"
    } else {
        "synthetic"
    }
}

/// Loads and validates a sample file. The split tag is taken from the file
/// name (`*train*`, `*val*`, otherwise `synthetic`).
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    load_dataset_as(path, split_from_path(path))
}

pub fn load_dataset_as(path: impl AsRef<Path>, split_tag: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        let sample = rec.into_sample(lineno).map_err(|e| match e {
            Error::Dimension { .. } => Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: e.to_string(),
            },
            other => other,
        })?;
        if !seen.insert(sample.sample_id.clone()) {
            return Err(invalid(lineno, &sample.sample_id, "sample_id", "duplicate id"));
        }
        samples.push(sample);
    }
    Ok(Dataset::new(samples, split_tag))
}

/// Serializes one sample as a single JSON line (no trailing newline).
pub fn sample_to_line(s: &EgoSample) -> String {
    serde_json::to_string(&SampleRecord::from(s)).expect("sample records always serialize")
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in &ds.samples {
        w.write_all(sample_to_line(s).as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
