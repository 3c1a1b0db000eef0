//! Track boundaries, offline raceline generation and the quintic-spline
//! raceline served to the online planner.

mod band;
pub mod boundaries;
pub mod geom;
pub mod kml;
pub mod mincurv;
pub mod qp;
pub mod raceline;
pub mod shapes;
pub mod smooth;
pub mod spline;
pub mod velocity;

pub use boundaries::{load_boundaries, BankingMap, BoundaryFormat, Corridor, TrackBoundaries};
pub use mincurv::{optimize_min_curvature, MinCurvatureResult};
pub use raceline::{Nearest, Raceline, RacelineOptions, RacelinePoint, Sample};
pub use smooth::smooth_boundaries;
pub use velocity::{compute_velocity_profile, VelocityProfileParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("<{element}>: {message}")]
    Kml { element: String, message: String },
    #[error("geometry error at station {station}: {reason}")]
    Geometry { station: usize, reason: String },
    #[error("infeasible constraint: {0}")]
    Constraint(String),
    #[error("optimizer did not converge (KKT residual {residual:.3e})")]
    Optimization { residual: f64 },
    #[error("bad parameterization at sample {index}: {reason}")]
    Parameterization { index: usize, reason: String },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("singular linear system")]
    SingularSystem,
    #[error("format error: {0}")]
    Format(String),
    #[error("raceline file has no samples")]
    EmptyRaceline,
    #[error("validation failed at sample {index}: {reason}")]
    Validation { index: usize, reason: String },
}
