//! Ego-state MLP trajectory planner and open-loop evaluation toolkit.
//!
//! The planner maps past ego poses, velocity, acceleration and a driving
//! command to six future poses. The evaluation side scores predictions by
//! L2 displacement and occupancy-grid collision rate, audits how often the
//! grid reports collisions for ground-truth trajectories, and summarizes the
//! heading and curvature distribution of a dataset.

pub mod analysis;
pub mod dataio;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod trainer;
pub mod types;

pub use dataio::{generate_synthetic, load_dataset, write_dataset, Dataset, SyntheticConfig};
pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{InputMask, LossConfig, Mlp};
pub use trainer::{train, TrainConfig, TrainLog};
pub use types::{Command, EgoSample, Kinematics, OrientedBox, Pose2, Trajectory};
