//! Harris corners and pyramidal Lucas–Kanade flow on grayscale frames.
//!
//! Frames are binary PGM (P5) images. Flow runs in the camera view and the
//! resulting displacement is warped onto the BEV plane.

mod harris;
mod lk;
mod pgm;
mod predict;

use thiserror::Error;

use crate::geometry::ImagePoint;

pub use harris::{harris_corners, HarrisConfig};
pub use lk::{lk_track, LkConfig};
pub use pgm::{decode_pgm, encode_pgm};
pub use predict::{predict_displacement, FlowDisplacement, FlowPredictor, FrameSource, PgmDirectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("malformed PGM: {0}")]
    Malformed(String),
    #[error("frames differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("no feature point survived tracking")]
    NoValidPoints,
    #[error("need at least two frames")]
    TooFewFrames,
    #[error("frame {0} not available")]
    MissingFrame(u64),
    #[error("reading frame: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(FlowError::Malformed(format!(
                "expected {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// A Harris corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub pos: ImagePoint,
    pub response: f64,
}

/// Floating-point image with replicated borders.
#[derive(Debug, Clone)]
pub(crate) struct Plane {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn from_frame(f: &GrayFrame) -> Self {
        Self { w: f.width, h: f.height, data: f.data.iter().map(|&v| v as f64).collect() }
    }

    pub fn zeros(w: usize, h: usize) -> Self {
        Self { w, h, data: vec![0.0; w * h] }
    }

    /// Pixel with coordinates clamped into the image.
    pub fn at(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.data[y * self.w + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.w + x] = v;
    }

    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let (tx, ty) = (x - x0, y - y0);
        let (xi, yi) = (x0 as isize, y0 as isize);
        (1.0 - tx) * (1.0 - ty) * self.at(xi, yi)
            + tx * (1.0 - ty) * self.at(xi + 1, yi)
            + (1.0 - tx) * ty * self.at(xi, yi + 1)
            + tx * ty * self.at(xi + 1, yi + 1)
    }
}
