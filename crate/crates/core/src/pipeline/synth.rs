//! Synthetic scenes with known ground truth.
//!
//! Vehicles drive straight down BEV lanes at constant physical speed. The
//! physical scale varies along the road: a car box is `w(x) = a_w + b_w·x`
//! BEV px long and `h(y) = a_h + b_h·y` px wide, and one car length is
//! 14.7 ft, so BEV motion is exponential in time. Boxes are carried into the
//! image through the inverse scene homography.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DetectionStream, PipelineError, Result, SceneConfig};
use crate::analytics::Direction;
use crate::geometry::{BevPoint, Homography};
use crate::tracking::{BBox, Detection};

pub const MPH_TO_FTPS: f64 = 5280.0 / 3600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleGroup {
    pub direction: Direction,
    pub class: String,
    pub count: usize,
    pub speed_mph_mean: f64,
    #[serde(default)]
    pub speed_mph_sd: f64,
}

/// Lane centers on the BEV cross axis for each direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneLayout {
    pub direction_1: Vec<f64>,
    pub direction_2: Vec<f64>,
}

impl Default for LaneLayout {
    fn default() -> Self {
        Self { direction_1: vec![116.0, 148.0, 180.0], direction_2: vec![84.0, 52.0, 20.0] }
    }
}

impl LaneLayout {
    /// Centers in lane order (lane 1 first, innermost).
    pub fn ordered(&self, d: Direction) -> Vec<f64> {
        let mut v = match d {
            Direction::One => self.direction_1.clone(),
            Direction::Two => self.direction_2.clone(),
        };
        // Direction 1 moves +x, so its left is -y; direction 2 the reverse.
        match d {
            Direction::One => v.sort_by(f64::total_cmp),
            Direction::Two => v.sort_by(|a, b| b.total_cmp(a)),
        }
        v
    }
}

/// Each affected vehicle loses detections for `min_frames..=max_frames`
/// consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DropoutSpec {
    pub fraction: f64,
    pub min_frames: u64,
    pub max_frames: u64,
}

impl Default for DropoutSpec {
    fn default() -> Self {
        Self { fraction: 0.0, min_frames: 5, max_frames: 20 }
    }
}

/// Each affected vehicle reports `score` for `frames` consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreDipSpec {
    pub fraction: f64,
    pub frames: u64,
    pub score: f64,
}

impl Default for ScoreDipSpec {
    fn default() -> Self {
        Self { fraction: 0.0, frames: 3, score: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub groups: Vec<VehicleGroup>,
    pub lanes: LaneLayout,
    /// Gap between consecutive entries into a lane is drawn from this range.
    pub headway_s: (f64, f64),
    pub score: f64,
    /// Standard deviation of image-plane center jitter as a fraction of the
    /// box size on each axis.
    pub noise_frac: f64,
    /// `(a_w, b_w)` of the car length in BEV px along x.
    pub width_model: (f64, f64),
    /// `(a_h, b_h)` of the car width in BEV px along y.
    pub height_model: (f64, f64),
    /// Size multipliers relative to a car.
    pub class_scale: BTreeMap<String, (f64, f64)>,
    pub dropout: DropoutSpec,
    pub score_dip: ScoreDipSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneConfig>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            groups: vec![
                VehicleGroup {
                    direction: Direction::One,
                    class: "car".into(),
                    count: 50,
                    speed_mph_mean: 60.0,
                    speed_mph_sd: 5.0,
                },
                VehicleGroup {
                    direction: Direction::Two,
                    class: "car".into(),
                    count: 50,
                    speed_mph_mean: 60.0,
                    speed_mph_sd: 5.0,
                },
            ],
            lanes: LaneLayout::default(),
            headway_s: (1.5, 3.0),
            score: 0.9,
            noise_frac: 0.0,
            width_model: (10.0, 0.0075),
            height_model: (14.0, 0.02),
            class_scale: BTreeMap::from([("truck".to_string(), (2.2, 1.15))]),
            dropout: DropoutSpec::default(),
            score_dip: ScoreDipSpec::default(),
            scene: None,
        }
    }
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: SynthSpec = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        for (name, p) in [("dropout.fraction", self.dropout.fraction), ("score_dip.fraction", self.score_dip.fraction)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.score) || !(0.0..=1.0).contains(&self.score_dip.score) {
            return bad("scores must lie in [0, 1]".into());
        }
        if self.dropout.min_frames > self.dropout.max_frames {
            return bad("dropout.min_frames exceeds max_frames".into());
        }
        if !(self.headway_s.0 > 0.0 && self.headway_s.0 <= self.headway_s.1) {
            return bad("headway_s must be a positive, ordered range".into());
        }
        if self.noise_frac < 0.0 {
            return bad("noise_frac must be non-negative".into());
        }
        for g in &self.groups {
            if !(g.speed_mph_mean > 0.0) || g.speed_mph_sd < 0.0 {
                return bad(format!("group {} has an invalid speed distribution", g.class));
            }
            let lanes = match g.direction {
                Direction::One => &self.lanes.direction_1,
                Direction::Two => &self.lanes.direction_2,
            };
            if g.count > 0 && lanes.is_empty() {
                return bad(format!("no lanes for direction {}", g.direction));
            }
        }
        Ok(())
    }

    /// Car length in BEV px at BEV x.
    pub fn car_length_px(&self, x: f64) -> f64 {
        self.width_model.0 + self.width_model.1 * x
    }

    /// Car width in BEV px at BEV y.
    pub fn car_width_px(&self, y: f64) -> f64 {
        self.height_model.0 + self.height_model.1 * y
    }

    /// True feet per BEV px along x.
    pub fn ft_per_px_x(&self, x: f64) -> f64 {
        14.7 / self.car_length_px(x)
    }

    /// True feet per BEV px along y.
    pub fn ft_per_px_y(&self, y: f64) -> f64 {
        6.0 / self.car_width_px(y)
    }

    fn class_scale(&self, cls: &str) -> (f64, f64) {
        self.class_scale.get(cls).copied().unwrap_or((1.0, 1.0))
    }
}

/// Ground truth of one generated vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthVehicle {
    pub id: u64,
    pub class: String,
    pub direction: Direction,
    pub lane: u32,
    pub lane_center: f64,
    pub speed_mph: f64,
    pub first_frame: u64,
    pub last_frame: u64,
    /// Frames without a detection, inclusive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<(u64, u64)>,
    /// Emitted image boxes with their frames.
    pub boxes: Vec<(u64, BBox)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub fps: f64,
    pub vehicles: Vec<TruthVehicle>,
}

impl GroundTruth {
    pub fn count(&self, direction: Direction, class: Option<&str>) -> usize {
        self.vehicles
            .iter()
            .filter(|v| v.direction == direction && class.is_none_or(|c| c == v.class))
            .count()
    }

    /// Truth counts per (direction, class).
    pub fn counts(&self) -> BTreeMap<(Direction, String), u64> {
        let mut out = BTreeMap::new();
        for v in &self.vehicles {
            *out.entry((v.direction, v.class.clone())).or_insert(0) += 1;
        }
        out
    }
}

/// BEV position `t` seconds after entering, for physical speed `v` ft/s.
fn position(spec: &SynthSpec, dir: Direction, length: f64, v: f64, t: f64) -> f64 {
    let (a, b) = spec.width_model;
    if b == 0.0 {
        let dx = v * a * t / 14.7;
        return match dir {
            Direction::One => dx,
            Direction::Two => length - dx,
        };
    }
    let c = a / b;
    let k = b * v / 14.7;
    match dir {
        Direction::One => c * (k * t).exp() - c,
        Direction::Two => (length + c) * (-k * t).exp() - c,
    }
}

fn traversal_time(spec: &SynthSpec, length: f64, v: f64) -> f64 {
    let (a, b) = spec.width_model;
    if b == 0.0 {
        return length * 14.7 / (v * a);
    }
    let c = a / b;
    ((length + c) / c).ln() * 14.7 / (b * v)
}

/// Image box whose first-order BEV footprint is `(len, wid)` at `center`.
fn image_box(h: &Homography, inv: &Homography, center: BevPoint, len: f64, wid: f64) -> Result<BBox> {
    let geo = |e| PipelineError::geometry("synth", e);
    let c = inv.apply_bev(center).map_err(geo)?;
    let j = h.jacobian(c.x, c.y).map_err(geo)?.map(f64::abs);
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    if det.abs() < 1e-15 {
        return Err(PipelineError::Config("scene homography is degenerate at a lane point".into()));
    }
    let w = (j[(1, 1)] * len - j[(0, 1)] * wid) / det;
    let hh = (j[(0, 0)] * wid - j[(1, 0)] * len) / det;
    if !(w > 0.0 && hh > 0.0) {
        return Err(PipelineError::Config(format!(
            "no positive image box reproduces a {len:.1}x{wid:.1} BEV footprint at ({:.1}, {:.1})",
            center.x, center.y
        )));
    }
    Ok(BBox::centered(c.x, c.y, w, hh))
}

struct Planned {
    direction: Direction,
    class: String,
    lane: u32,
    lane_center: f64,
    speed_mph: f64,
    entry_s: f64,
}

/// Generates the detection stream and ground truth for `spec` on `scene`.
pub fn gen_synthetic_scene(spec: &SynthSpec, scene: &SceneConfig) -> Result<(DetectionStream, GroundTruth)> {
    spec.validate()?;
    scene.validate()?;
    let h = scene.homography()?;
    let inv = h.invert().map_err(|e| PipelineError::geometry("synth", e))?;
    let fps = scene.fps;
    let (length, _) = scene.bev_size;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Plan vehicles lane by lane so that no vehicle catches its leader.
    let mut planned: Vec<Planned> = Vec::new();
    let mut lane_state: BTreeMap<(Direction, u32), (f64, f64)> = BTreeMap::new();
    let mut rr: BTreeMap<Direction, usize> = BTreeMap::new();
    for g in &spec.groups {
        let lanes = spec.lanes.ordered(g.direction);
        let speed = Normal::new(g.speed_mph_mean, g.speed_mph_sd.max(0.0)).expect("finite normal");
        for _ in 0..g.count {
            let k = rr.entry(g.direction).or_insert(0);
            let lane_idx = *k % lanes.len();
            *k += 1;
            let mph = if g.speed_mph_sd > 0.0 { speed.sample(&mut rng).max(5.0) } else { g.speed_mph_mean };
            let v = mph * MPH_TO_FTPS;
            let travel = traversal_time(spec, length, v);
            let gap = rng.random_range(spec.headway_s.0..=spec.headway_s.1);
            let lane = lane_idx as u32 + 1;
            let entry = match lane_state.get(&(g.direction, lane)) {
                None => gap,
                Some(&(prev_entry, prev_exit)) => (prev_entry + gap).max(prev_exit + spec.headway_s.0 - travel),
            };
            lane_state.insert((g.direction, lane), (entry, entry + travel));
            planned.push(Planned {
                direction: g.direction,
                class: g.class.clone(),
                lane,
                lane_center: lanes[lane_idx],
                speed_mph: mph,
                entry_s: entry,
            });
        }
    }

    let noise = Normal::new(0.0, spec.noise_frac.max(0.0)).expect("finite normal");
    let mut emitted: Vec<(u64, u64, Detection)> = Vec::new();
    let mut vehicles = Vec::with_capacity(planned.len());
    for (i, p) in planned.iter().enumerate() {
        let id = i as u64 + 1;
        let v = p.speed_mph * MPH_TO_FTPS;
        let mut frame = (p.entry_s * fps).ceil() as u64;
        let (sx, sy) = spec.class_scale(&p.class);
        let mut track: Vec<(u64, BBox)> = Vec::new();
        loop {
            let t = frame as f64 / fps - p.entry_s;
            let x = position(spec, p.direction, length, v, t);
            let inside = x >= 1.0 && x <= length - 1.0;
            if !inside {
                if track.is_empty() && t < traversal_time(spec, length, v) {
                    frame += 1;
                    continue;
                }
                break;
            }
            let center = BevPoint::new(x, p.lane_center);
            let len = spec.car_length_px(x) * sx;
            let wid = spec.car_width_px(p.lane_center) * sy;
            let mut b = image_box(&h, &inv, center, len, wid)?;
            if spec.noise_frac > 0.0 {
                b.x += b.w * noise.sample(&mut rng);
                b.y += b.h * noise.sample(&mut rng);
            }
            track.push((frame, b));
            frame += 1;
        }

        let n = track.len() as u64;
        let mut dropout = None;
        if rng.random::<f64>() < spec.dropout.fraction {
            let max_len = spec.dropout.max_frames.min((fps.round() as u64).saturating_sub(1)).min(n.saturating_sub(21));
            if max_len >= spec.dropout.min_frames.max(1) {
                let len = rng.random_range(spec.dropout.min_frames.max(1)..=max_len);
                let start = rng.random_range(10..=n - 10 - len);
                dropout = Some((track[start as usize].0, track[(start + len - 1) as usize].0));
            }
        }
        let mut dip = None;
        if rng.random::<f64>() < spec.score_dip.fraction && n > 2 * spec.score_dip.frames + 2 {
            let start = rng.random_range(1..=n - 1 - spec.score_dip.frames);
            dip = Some((track[start as usize].0, track[(start + spec.score_dip.frames - 1) as usize].0));
        }
        let in_window = |f: u64, w: Option<(u64, u64)>| w.is_some_and(|(a, b)| f >= a && f <= b);
        track.retain(|(f, _)| !in_window(*f, dropout));
        for &(f, b) in &track {
            let score = if in_window(f, dip) { spec.score_dip.score } else { spec.score };
            emitted.push((f, id, Detection { frame: f, cls: p.class.clone(), bbox: b, score }));
        }
        vehicles.push(TruthVehicle {
            id,
            class: p.class.clone(),
            direction: p.direction,
            lane: p.lane,
            lane_center: p.lane_center,
            speed_mph: p.speed_mph,
            first_frame: track.first().map_or(0, |t| t.0),
            last_frame: track.last().map_or(0, |t| t.0),
            dropout,
            boxes: track,
        });
    }
    emitted.sort_by_key(|(f, id, _)| (*f, *id));
    let stream = DetectionStream::new(emitted.into_iter().map(|(_, _, d)| d).collect());
    Ok((stream, GroundTruth { fps, vehicles }))
}
