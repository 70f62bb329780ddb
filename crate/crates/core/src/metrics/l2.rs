use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Trajectory, FUTURE_FRAMES};

/// Waypoints per second of horizon at the 2 Hz key-frame rate.
pub const FRAMES_PER_SECOND: usize = 2;

/// How the L2 error at a horizon is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum L2Variant {
    /// Mean displacement over every waypoint up to the horizon.
    #[default]
    Mean,
    /// Displacement at the horizon's last waypoint only.
    Endpoint,
}

/// L2 error per horizon (index 0 is 1 s) plus the mean over horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Errors {
    pub per_horizon: Vec<f64>,
    pub avg: f64,
}

impl L2Errors {
    /// Error at `seconds` (1-based), if evaluated.
    pub fn at(&self, seconds: usize) -> Option<f64> {
        seconds.checked_sub(1).and_then(|i| self.per_horizon.get(i).copied())
    }
}

/// Default metric: mean-over-waypoints at 1 s, 2 s, 3 s.
pub fn l2_errors(pred: &Trajectory, gt: &Trajectory) -> Result<L2Errors> {
    l2_errors_with(pred, gt, FUTURE_FRAMES, L2Variant::Mean)
}

/// L2 errors over the first `frames` waypoints (an even count, one horizon per 2 frames).
pub fn l2_errors_with(pred: &Trajectory, gt: &Trajectory, frames: usize, variant: L2Variant) -> Result<L2Errors> {
    check_horizon_frames(frames)?;
    for (context, t) in [("l2 prediction length", pred), ("l2 ground-truth length", gt)] {
        if t.len() < frames {
            return Err(Error::Dimension {
                context,
                expected: frames,
                actual: t.len(),
            });
        }
    }
    let dists: Vec<f64> = pred
        .waypoints
        .iter()
        .zip(&gt.waypoints)
        .take(frames)
        .map(|(p, g)| p.distance(g))
        .collect();
    let per_horizon: Vec<f64> = (1..=frames / FRAMES_PER_SECOND)
        .map(|h| {
            let n = h * FRAMES_PER_SECOND;
            match variant {
                L2Variant::Mean => dists[..n].iter().sum::<f64>() / n as f64,
                L2Variant::Endpoint => dists[n - 1],
            }
        })
        .collect();
    let avg = per_horizon.iter().sum::<f64>() / per_horizon.len() as f64;
    Ok(L2Errors { per_horizon, avg })
}

pub(crate) fn check_horizon_frames(frames: usize) -> Result<()> {
    if frames == 0 || frames > FUTURE_FRAMES || !frames.is_multiple_of(FRAMES_PER_SECOND) {
        return Err(Error::config(
            "horizon_frames",
            format!("must be one of 2, 4, 6; got {frames}"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Pose2;
    use proptest::prelude::*;

    fn line(offset_x: f64) -> Trajectory {
        Trajectory::new(
            (1..=6)
                .map(|k| Pose2::new(2.0 * k as f64 + offset_x, 0.3 * k as f64, 0.01 * k as f64))
                .collect(),
        )
    }

    #[test]
    fn identical_is_zero() {
        let e = l2_errors(&line(0.0), &line(0.0)).unwrap();
        assert_eq!(e.per_horizon, vec![0.0; 3]);
        assert_eq!(e.avg, 0.0);
    }

    #[test]
    fn constant_offset() {
        let e = l2_errors(&line(1.0), &line(0.0)).unwrap();
        for v in &e.per_horizon {
            assert!((v - 1.0).abs() <= 1e-12);
        }
        assert!((e.avg - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn single_waypoint_error() {
        let gt = line(0.0);
        let mut pred = gt.clone();
        pred.waypoints[5].y += 0.6;
        let e = l2_errors(&pred, &gt).unwrap();
        assert_eq!(e.at(1), Some(0.0));
        assert_eq!(e.at(2), Some(0.0));
        assert!((e.at(3).unwrap() - 0.1).abs() <= 1e-12);
        assert!((e.avg - 0.1 / 3.0).abs() <= 1e-12);

        let end = l2_errors_with(&pred, &gt, 6, L2Variant::Endpoint).unwrap();
        assert!((end.at(3).unwrap() - 0.6).abs() <= 1e-12);
    }

    #[test]
    fn heading_is_ignored() {
        let gt = line(0.0);
        let mut pred = gt.clone();
        pred.waypoints[2].theta = 1.0;
        assert_eq!(l2_errors(&pred, &gt).unwrap().avg, 0.0);
    }

    #[test]
    fn shorter_horizon_and_errors() {
        let e = l2_errors_with(&line(1.0), &line(0.0), 4, L2Variant::Mean).unwrap();
        assert_eq!(e.per_horizon.len(), 2);
        assert!(l2_errors_with(&line(1.0), &line(0.0), 5, L2Variant::Mean).is_err());
        let short = Trajectory::new(vec![Pose2::ORIGIN; 3]);
        assert!(matches!(l2_errors(&short, &line(0.0)), Err(Error::Dimension { .. })));
    }

    proptest! {
        #[test]
        fn translation_invariant_and_symmetric(
            a in proptest::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 6),
            b in proptest::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 6),
            tx in -100.0f64..100.0, ty in -100.0f64..100.0,
        ) {
            let mk = |v: &[(f64, f64)], dx: f64, dy: f64| {
                Trajectory::new(v.iter().map(|&(x, y)| Pose2::new(x + dx, y + dy, 0.0)).collect())
            };
            let e = l2_errors(&mk(&a, 0.0, 0.0), &mk(&b, 0.0, 0.0)).unwrap();
            let t = l2_errors(&mk(&a, tx, ty), &mk(&b, tx, ty)).unwrap();
            let s = l2_errors(&mk(&b, 0.0, 0.0), &mk(&a, 0.0, 0.0)).unwrap();
            prop_assert!((e.avg - t.avg).abs() < 1e-9);
            prop_assert_eq!(e.avg, s.avg);
            let mean = e.per_horizon.iter().sum::<f64>() / 3.0;
            prop_assert!((e.avg - mean).abs() < 1e-15);
        }
    }
}
