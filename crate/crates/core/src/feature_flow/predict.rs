use std::collections::BTreeMap;
use std::path::PathBuf;

use super::{harris_corners, lk_track, decode_pgm, FeaturePoint, FlowError, GrayFrame, HarrisConfig, LkConfig, Result};
use crate::geometry::{BevPoint, Homography, ImagePoint};
use crate::stitching::{Fragment, PositionPredictor};

/// Random access to the frames of one video.
pub trait FrameSource {
    fn frame(&mut self, index: u64) -> Result<GrayFrame>;
}

/// Directory of `frame_%06d.pgm` files, numbered from 0.
#[derive(Debug)]
pub struct PgmDirectory {
    dir: PathBuf,
    cache: BTreeMap<u64, GrayFrame>,
    capacity: usize,
}

impl PgmDirectory {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), cache: BTreeMap::new(), capacity: 128 }
    }

    pub fn path_of(&self, index: u64) -> PathBuf {
        self.dir.join(format!("frame_{index:06}.pgm"))
    }
}

impl FrameSource for PgmDirectory {
    fn frame(&mut self, index: u64) -> Result<GrayFrame> {
        if let Some(f) = self.cache.get(&index) {
            return Ok(f.clone());
        }
        let path = self.path_of(index);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => FlowError::MissingFrame(index),
            _ => FlowError::Io(format!("{}: {e}", path.display())),
        })?;
        let f = decode_pgm(&bytes)?;
        if self.cache.len() >= self.capacity {
            self.cache.pop_first();
        }
        self.cache.insert(index, f.clone());
        Ok(f)
    }
}

/// Median flow of a set of seed points through a frame sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowDisplacement {
    /// Cumulative displacement in the camera image.
    pub image: (f64, f64),
    /// The same displacement on the BEV plane.
    pub bev: (f64, f64),
    /// Seeds still tracked at the last frame.
    pub survivors: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Chains LK from each frame to the next and warps the median cumulative
/// displacement through `h`, anchored at the median seed position.
pub fn predict_displacement(
    frames: &[GrayFrame],
    seeds: &[FeaturePoint],
    h: &Homography,
    cfg: &LkConfig,
) -> Result<FlowDisplacement> {
    if frames.len() < 2 {
        return Err(FlowError::TooFewFrames);
    }
    let mut alive: Vec<(ImagePoint, FeaturePoint)> = seeds.iter().map(|s| (s.pos, *s)).collect();
    for pair in frames.windows(2) {
        if alive.is_empty() {
            break;
        }
        let current: Vec<FeaturePoint> = alive.iter().map(|(_, fp)| *fp).collect();
        let tracked = lk_track(&pair[0], &pair[1], &current, cfg)?;
        alive = alive
            .into_iter()
            .zip(tracked)
            .filter(|(_, (_, ok))| *ok)
            .map(|((seed, fp), (q, _))| (seed, FeaturePoint { pos: q, ..fp }))
            .collect();
    }
    if alive.is_empty() {
        return Err(FlowError::NoValidPoints);
    }
    let dx = median(alive.iter().map(|(s, fp)| fp.pos.x - s.x).collect());
    let dy = median(alive.iter().map(|(s, fp)| fp.pos.y - s.y).collect());
    let rx = median(alive.iter().map(|(s, _)| s.x).collect());
    let ry = median(alive.iter().map(|(s, _)| s.y).collect());
    let warp = |x, y| h.map(x, y).map_err(|_| FlowError::NoValidPoints);
    let a = warp(rx, ry)?;
    let b = warp(rx + dx, ry + dy)?;
    Ok(FlowDisplacement { image: (dx, dy), bev: (b.0 - a.0, b.1 - a.1), survivors: alive.len() })
}

/// Predicts an ended vehicle's position by following Harris corners of its
/// last image box through the following frames.
pub struct FlowPredictor<S: FrameSource> {
    pub source: S,
    pub homography: Homography,
    pub harris: HarrisConfig,
    pub lk: LkConfig,
    pub max_points: usize,
}

impl<S: FrameSource> FlowPredictor<S> {
    pub fn new(source: S, homography: Homography) -> Self {
        Self { source, homography, harris: HarrisConfig::default(), lk: LkConfig::default(), max_points: 25 }
    }

    fn try_predict(&mut self, end: &Fragment, gap: u64) -> Result<BevPoint> {
        let frames = (end.frame..=end.frame + gap)
            .map(|i| self.source.frame(i))
            .collect::<Result<Vec<_>>>()?;
        let seeds = harris_corners(&frames[0], &end.anchor.image_bbox, self.max_points, &self.harris);
        if seeds.is_empty() {
            return Err(FlowError::NoValidPoints);
        }
        let d = predict_displacement(&frames, &seeds, &self.homography, &self.lk)?;
        Ok(BevPoint::new(end.anchor.center.x + d.bev.0, end.anchor.center.y + d.bev.1))
    }
}

impl<S: FrameSource> PositionPredictor for FlowPredictor<S> {
    fn predict(&mut self, end: &Fragment, gap: u64) -> Option<BevPoint> {
        match self.try_predict(end, gap) {
            Ok(p) => Some(p),
            Err(e) => {
                log::debug!("flow prediction for track {} unavailable: {e}", end.track_id);
                None
            }
        }
    }
}
