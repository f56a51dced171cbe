//! Normal-distributions-transform occupancy mapping and Monte Carlo
//! localization for 2D labeled lidar, with dynamic-object filtering, a
//! deterministic synthetic world simulator, trajectory metrics, and
//! binary persistence.

pub mod cli;
pub mod config;
mod error;
pub mod eval;
pub mod experiment;
pub mod filters;
pub mod geom;
pub mod io;
pub mod labels;
pub mod mcl;
pub mod ndt;
pub mod scan;
pub mod session;
pub mod sim;

pub use error::{Error, Result};
pub use geom::{normalize_angle, Pose2, Trajectory};
pub use labels::{DynamicClass, DynamicClassSet, LabelPartition};
pub use scan::{LabeledPoint, LabeledScan};
pub use session::{normalize_session, Frame, SessionLog};
