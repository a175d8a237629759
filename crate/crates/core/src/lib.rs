//! Traffic analytics on the bird's-eye-view plane.

pub mod analytics;
pub mod calibration;
pub mod feature_flow;
pub mod geometry;
pub mod pipeline;
pub mod stitching;
pub mod tracking;
