use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::analytics::AnalyticsConfig;
use crate::calibration::CalibrationSettings;
use crate::geometry::{
    default_scanlines, estimate_homography, roi_quad, Correspondence, Homography, ImagePoint, LineSeg,
};
use crate::stitching::StitchConfig;
use crate::tracking::{ByteConfig, KalmanParams, MotpyConfig};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

/// One image point and its BEV target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPair {
    pub src: [f64; 2],
    pub dst: [f64; 2],
}

/// Road boundary lines, each given by two image points, plus optional
/// scanlines bounding the ROI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLines {
    pub left: [[f64; 2]; 2],
    pub right: [[f64; 2]; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far_y: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Motpy,
    Byte,
}

impl std::str::FromStr for TrackerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "motpy" => Ok(TrackerKind::Motpy),
            "byte" => Ok(TrackerKind::Byte),
            other => Err(format!("unknown tracker `{other}` (expected motpy or byte)")),
        }
    }
}

/// BYTE settings; an absent `max_coast` means one second of frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ByteSection {
    pub tau: f64,
    pub match_thresh_high: f64,
    pub match_thresh_low: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_coast: Option<u32>,
}

impl Default for ByteSection {
    fn default() -> Self {
        let d = ByteConfig::default();
        Self { tau: d.tau, match_thresh_high: d.match_thresh_high, match_thresh_low: d.match_thresh_low, max_coast: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerSection {
    pub kind: TrackerKind,
    pub motpy: MotpyConfig,
    pub byte: ByteSection,
    pub kalman: KalmanParams,
}

impl Default for TrackerSection {
    fn default() -> Self {
        Self {
            kind: TrackerKind::Byte,
            motpy: MotpyConfig::default(),
            byte: ByteSection::default(),
            kalman: KalmanParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoxSizing {
    /// BEV box size for classes without a configured default.
    pub fallback: (f64, f64),
    /// Observations of a class needed before its mean size replaces the default.
    pub warmup: usize,
}

impl Default for BoxSizing {
    fn default() -> Self {
        Self { fallback: (14.0, 16.0), warmup: 20 }
    }
}

/// Everything the pipeline needs to know about one camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub schema_version: u32,
    pub image_size: (u32, u32),
    pub fps: f64,
    /// BEV rectangle `(length along travel, width across)` in BEV px.
    pub bev_size: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<Vec<PointPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_lines: Option<BoundaryLines>,
    /// Default BEV box `(length, width)` per class.
    #[serde(default)]
    pub classes: BTreeMap<String, (f64, f64)>,
    #[serde(default)]
    pub box_sizing: BoxSizing,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub calibration: CalibrationSettings,
    #[serde(default)]
    pub stitching: StitchConfig,
    #[serde(default)]
    pub analytics: AnalyticsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SceneConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return Err(PipelineError::Config(format!(
                "unsupported schema_version {} (expected {SCENE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad("fps must be positive");
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return bad("image_size must be positive");
        }
        if !(self.bev_size.0 > 0.0 && self.bev_size.1 > 0.0) {
            return bad("bev_size must be positive");
        }
        match (&self.roi, &self.boundary_lines) {
            (Some(_), Some(_)) => return bad("give either roi or boundary_lines, not both"),
            (None, None) => return bad("one of roi or boundary_lines is required"),
            _ => {}
        }
        if self.classes.values().any(|&(l, w)| !(l > 0.0 && w > 0.0)) {
            return bad("class box sizes must be positive");
        }
        self.calibration.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.motpy_config().validate()?;
        self.byte_config().validate()?;
        Ok(())
    }

    pub fn motpy_config(&self) -> MotpyConfig {
        self.tracker.motpy
    }

    pub fn byte_config(&self) -> ByteConfig {
        let b = self.tracker.byte;
        ByteConfig {
            tau: b.tau,
            match_thresh_high: b.match_thresh_high,
            match_thresh_low: b.match_thresh_low,
            max_coast: b.max_coast.unwrap_or(self.fps.round() as u32),
        }
    }

    /// Image-to-BEV homography from explicit pairs or from the ROI bounded by
    /// the road boundary lines.
    pub fn homography(&self) -> Result<Homography> {
        let pairs: Vec<Correspondence> = match (&self.roi, &self.boundary_lines) {
            (Some(roi), _) => roi
                .iter()
                .map(|p| Correspondence::new(ImagePoint::new(p.src[0], p.src[1]), crate::geometry::BevPoint::new(p.dst[0], p.dst[1])))
                .collect(),
            (None, Some(b)) => {
                let seg = |l: [[f64; 2]; 2]| LineSeg::new(ImagePoint::new(l[0][0], l[0][1]), ImagePoint::new(l[1][0], l[1][1]));
                let left = seg(b.left).map_err(|e| PipelineError::geometry("roi", e))?;
                let right = seg(b.right).map_err(|e| PipelineError::geometry("roi", e))?;
                let (near, far) = match (b.near_y, b.far_y) {
                    (Some(n), Some(f)) => (n, f),
                    (n, f) => {
                        let (dn, df) = default_scanlines(&left, &right, self.image_size.1 as f64)
                            .map_err(|e| PipelineError::geometry("roi", e))?;
                        (n.unwrap_or(dn), f.unwrap_or(df))
                    }
                };
                let quad = roi_quad(&left, &right, near, far).map_err(|e| PipelineError::geometry("roi", e))?;
                quad.bev_correspondences(self.bev_size.0, self.bev_size.1).to_vec()
            }
            (None, None) => return Err(PipelineError::Config("no ROI given".into())),
        };
        estimate_homography(&pairs).map_err(|e| PipelineError::geometry("homography", e))
    }

    /// A 640×480, 30 fps scene of a straight six-lane road.
    pub fn example() -> Self {
        Self {
            schema_version: SCENE_SCHEMA_VERSION,
            image_size: (640, 480),
            fps: 30.0,
            bev_size: (800.0, 200.0),
            roi: None,
            boundary_lines: Some(BoundaryLines {
                left: [[40.0, 480.0], [300.0, 200.0]],
                right: [[600.0, 480.0], [340.0, 200.0]],
                near_y: None,
                far_y: None,
            }),
            classes: BTreeMap::from([
                ("car".to_string(), (13.0, 16.0)),
                ("truck".to_string(), (30.0, 19.0)),
            ]),
            box_sizing: BoxSizing::default(),
            tracker: TrackerSection::default(),
            calibration: CalibrationSettings::default(),
            stitching: StitchConfig::default(),
            analytics: AnalyticsConfig::default(),
            frames_dir: None,
        }
    }
}
