//! End-to-end processing: scene configuration, detection input, the staged
//! run from detections to analytics, output files and synthetic scenes.

mod config;
mod detections;
mod metrics;
mod output;
mod run;
mod synth;

use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::calibration::CalibrationError;
use crate::geometry::GeometryError;
use crate::tracking::TrackingError;

pub use config::{
    BoundaryLines, BoxSizing, ByteSection, PointPair, SceneConfig, TrackerKind, TrackerSection, SCENE_SCHEMA_VERSION,
};
pub use detections::{parse_detections, write_detections, DetectionStream};
pub use metrics::{evaluate_tracks, split_vehicles, truth_ids_by_track, DirectionCount, TrackingMetrics};
pub use output::{
    read_real_counts, read_tracks, write_outputs, write_real_counts, write_tracks, OutputFiles,
};
pub use run::{
    analyze, calibrate_tracks, calibration_samples, project_detections, run_pipeline, run_tracker, stitch_tracks,
    track_duration_s, Diagnostics, PipelineOutput, Projection, RunOptions,
};
pub use synth::{
    gen_synthetic_scene, DropoutSpec, GroundTruth, LaneLayout, ScoreDipSpec, SynthSpec, TruthVehicle, VehicleGroup,
    MPH_TO_FTPS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{stage}: {source}")]
    Geometry {
        stage: &'static str,
        #[source]
        source: GeometryError,
    },
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("io: {0}")]
    Io(String),
}

impl PipelineError {
    pub fn geometry(stage: &'static str, source: GeometryError) -> Self {
        PipelineError::Geometry { stage, source }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
