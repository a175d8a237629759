//! Per-frame data association on the BEV plane.
//!
//! Two trackers share the same track representation: [`MotpyTracker`]
//! (single gated association over detections above a low score floor) and
//! [`ByteTracker`] (high/low score split with a second association pass that
//! recovers occluded vehicles from low-confidence boxes).

mod assignment;
mod boxes;
mod byte;
mod kalman;
mod motpy;
mod track;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BevPoint;

pub use assignment::assign_min_cost;
pub use boxes::{canonical_bev_box, BevBoxSizer, SizeStats};
pub use byte::{ByteConfig, ByteTracker};
pub use kalman::{kf_predict, kf_update, KalmanParams, KalmanState};
pub use motpy::{MotpyConfig, MotpyTracker};
pub use track::{IdAllocator, MatchStage, Track, TrackEntry, TrackStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingError {
    #[error("frame {frame} is not after the last processed frame {last}")]
    FrameOrder { frame: u64, last: u64 },
    #[error("detection for frame {found} passed to step for frame {expected}")]
    MixedFrames { expected: u64, found: u64 },
    #[error("innovation covariance is not invertible")]
    NumericallySingular,
    #[error("invalid tracker configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TrackingError>;

/// Axis-aligned box: top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self { x: v[0], y: v[1], w: v[2], h: v[3] }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { x: cx - 0.5 * w, y: cy - 0.5 * h, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.x + self.w && py >= self.y && py <= self.y + self.h
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// One detector box on one frame, in image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u64,
    pub cls: String,
    pub bbox: BBox,
    pub score: f64,
}

/// A detection projected onto the BEV plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BevDetection {
    pub frame: u64,
    pub cls: String,
    pub center: BevPoint,
    /// Class-canonical BEV box centered on `center`.
    pub bbox: BBox,
    pub score: f64,
    /// Source box in the camera image.
    pub image_bbox: BBox,
    /// First-order warp of the image box extent onto the BEV plane.
    pub observed_size: (f64, f64),
}

fn check_frame(frame: u64, last: Option<u64>, dets: &[BevDetection]) -> Result<()> {
    if let Some(last) = last {
        if frame <= last {
            return Err(TrackingError::FrameOrder { frame, last });
        }
    }
    if let Some(d) = dets.iter().find(|d| d.frame != frame) {
        return Err(TrackingError::MixedFrames { expected: frame, found: d.frame });
    }
    Ok(())
}

/// Runs the constant-velocity prediction forward from the track's last entry
/// to `frame`.
fn predict_to(track: &Track, frame: u64, params: &KalmanParams) -> KalmanState {
    let steps = frame.saturating_sub(track.last_frame()).max(1);
    let mut s = *track.last_state();
    for _ in 0..steps {
        s = kf_predict(&s, params);
    }
    s
}

/// Common driver interface for the two trackers.
pub trait MultiTracker {
    /// Advances to `frame`; returns the tracks that finished on this step.
    fn step(&mut self, frame: u64, dets: &[BevDetection]) -> Result<Vec<Track>>;

    fn active(&self) -> &[Track];

    /// Finishes every remaining active track (end of stream).
    fn flush(&mut self) -> Vec<Track>;
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn det(frame: u64, cx: f64, cy: f64, score: f64) -> BevDetection {
        det_cls(frame, "car", cx, cy, score)
    }

    pub fn det_cls(frame: u64, cls: &str, cx: f64, cy: f64, score: f64) -> BevDetection {
        BevDetection {
            frame,
            cls: cls.to_string(),
            center: BevPoint::new(cx, cy),
            bbox: BBox::centered(cx, cy, 10.0, 10.0),
            score,
            image_bbox: BBox::centered(cx, cy, 10.0, 10.0),
            observed_size: (10.0, 10.0),
        }
    }
}
