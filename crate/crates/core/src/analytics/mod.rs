//! Traffic measures derived from finished tracks: direction, lane, counts,
//! speed and acceleration series, space-mean speed and count error rates.

mod counts;
mod direction;
mod kinematics;
mod lanes;
mod report;

use thiserror::Error;

use crate::calibration::CalibrationError;

pub use counts::{
    arithmetic_mean, error_rate, harmonic_mean, percentile, space_mean_speed, CountKey, CountTable,
};
pub use direction::{bearing_deg, direction_of, direction_of_vector, Direction};
pub use kinematics::{kinematics_series, resample_centers, KinematicsConfig, Series};
pub use lanes::{assign_lane, detect_lanes, Axis, LaneConfig, LaneModel};
pub use report::{
    analyze_tracks, histogram, summarize, Analysis, AnalyticsConfig, CountRow, DirectionSpeed, ErrorRateRow, RealCount,
    SceneSummary, SpeedStats, VehicleRecord,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("track {0} is too short to measure")]
    TooShort(u64),
    #[error("no lanes found")]
    NoLanesFound,
    #[error("speed must be positive")]
    ZeroSpeed,
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

pub type Result<T> = std::result::Result<T, AnalyticsError>;
