//! Reconnects tracks that the tracker split while a vehicle went undetected.
//!
//! Every track contributes a begin fragment and an end fragment. An end
//! fragment is joined to a later begin fragment when the begin starts within
//! one second, inside the end's box swept forward by its velocity, in the
//! same direction and without a sharp turn, and close to where the vehicle is
//! predicted to be.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analytics::{direction_of, direction_of_vector, Direction};
use crate::geometry::BevPoint;
use crate::tracking::{BBox, BevDetection, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FragmentKind {
    #[serde(rename = "b")]
    Begin,
    #[serde(rename = "e")]
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub kind: FragmentKind,
    pub track_id: u64,
    pub frame: u64,
    /// First (begin) or last (end) detection of the track.
    pub anchor: BevDetection,
    /// Simplified path of the whole track.
    pub polyline: Vec<BevPoint>,
    /// Terminal Kalman velocity in BEV px per frame.
    pub velocity: (f64, f64),
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinCandidate {
    pub end_fragment: Fragment,
    pub begin_fragment: Fragment,
    /// Angle in degrees between the end's last heading and the begin's first.
    pub deflection: f64,
    /// Distance in BEV px from the predicted position to the begin anchor.
    pub predicted_gap: f64,
}

impl JoinCandidate {
    pub fn frame_gap(&self) -> u64 {
        self.begin_fragment.frame - self.end_fragment.frame
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StitchConfig {
    pub enabled: bool,
    pub max_deflection_deg: f64,
    /// Douglas–Peucker tolerance in BEV px.
    pub dp_epsilon: f64,
    /// Acceptance radius as a fraction of the image diagonal.
    pub resolution_fraction: f64,
    /// Tracks moving less than this have no direction of their own.
    pub min_displacement: f64,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_deflection_deg: 30.0,
            dp_epsilon: 1.0,
            resolution_fraction: 0.02,
            min_displacement: 10.0,
        }
    }
}

impl StitchConfig {
    pub fn dist_thresh(&self, resolution: (u32, u32)) -> f64 {
        self.resolution_fraction * (resolution.0 as f64).hypot(resolution.1 as f64)
    }
}

/// Predicts where the vehicle of an end fragment is `gap` frames later.
pub trait PositionPredictor {
    fn predict(&mut self, end: &Fragment, gap: u64) -> Option<BevPoint>;
}

/// Constant-velocity extrapolation from the terminal Kalman state.
#[derive(Debug, Clone, Copy, Default)]
pub struct KinematicPredictor;

impl PositionPredictor for KinematicPredictor {
    fn predict(&mut self, end: &Fragment, gap: u64) -> Option<BevPoint> {
        Some(kinematic_prediction(end, gap))
    }
}

fn kinematic_prediction(end: &Fragment, gap: u64) -> BevPoint {
    let g = gap as f64;
    BevPoint::new(end.anchor.center.x + end.velocity.0 * g, end.anchor.center.y + end.velocity.1 * g)
}

fn point_segment_distance(p: BevPoint, a: BevPoint, b: BevPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&BevPoint::new(a.x + t * dx, a.y + t * dy))
}

/// Ramer–Douglas–Peucker simplification; endpoints are always kept.
pub fn douglas_peucker(points: &[BevPoint], epsilon: f64) -> Vec<BevPoint> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    let mut stack = vec![(0, points.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        let mut worst = (0.0, lo);
        for i in lo + 1..hi {
            let d = point_segment_distance(points[i], points[lo], points[hi]);
            if d > worst.0 {
                worst = (d, i);
            }
        }
        if worst.0 > epsilon {
            keep[worst.1] = true;
            stack.push((lo, worst.1));
            stack.push((worst.1, hi));
        }
    }
    points.iter().zip(keep).filter_map(|(p, k)| k.then_some(*p)).collect()
}

fn track_direction(track: &Track, min_displacement: f64) -> Option<Direction> {
    match direction_of(track, min_displacement) {
        Ok((d, _)) => Some(d),
        Err(_) => {
            let v = track.last_state().velocity();
            direction_of_vector(v.0, v.1)
        }
    }
}

/// One begin and one end fragment per track with at least two detections.
pub fn build_fragments(tracks: &[Track], cfg: &StitchConfig) -> Vec<Fragment> {
    let mut out = Vec::new();
    for t in tracks {
        if t.detection_count() < 2 {
            continue;
        }
        let centers: Vec<BevPoint> = t.detections().map(|d| d.center).collect();
        let polyline = douglas_peucker(&centers, cfg.dp_epsilon);
        let direction = track_direction(t, cfg.min_displacement);
        let last_entry = t.entries.iter().rev().find(|e| e.det.is_some()).expect("has detections");
        let v = last_entry.state.velocity();
        let first = t.first_detection().unwrap();
        let last = t.last_detection().unwrap();
        let first_v = t.entries.iter().find(|e| e.det.is_some()).unwrap().state.velocity();
        out.push(Fragment {
            kind: FragmentKind::Begin,
            track_id: t.id,
            frame: first.frame,
            anchor: first.clone(),
            polyline: polyline.clone(),
            velocity: first_v,
            direction,
        });
        out.push(Fragment {
            kind: FragmentKind::End,
            track_id: t.id,
            frame: last.frame,
            anchor: last.clone(),
            polyline,
            velocity: v,
            direction,
        });
    }
    out
}

fn heading(a: BevPoint, b: BevPoint) -> Option<(f64, f64)> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    (dx != 0.0 || dy != 0.0).then_some((dx, dy))
}

/// Angle in degrees between the end's final segment and the begin's first.
pub fn deflection_deg(end: &Fragment, begin: &Fragment) -> Option<f64> {
    let n = end.polyline.len();
    if n < 2 || begin.polyline.len() < 2 {
        return None;
    }
    let u = heading(end.polyline[n - 2], end.polyline[n - 1])?;
    let w = heading(begin.polyline[0], begin.polyline[1])?;
    let cos = (u.0 * w.0 + u.1 * w.1) / (u.0.hypot(u.1) * w.0.hypot(w.1));
    Some(cos.clamp(-1.0, 1.0).acos().to_degrees())
}

/// End anchor box extended forward by its velocity over `gap` frames.
pub fn swept_box(end: &Fragment, gap: u64) -> BBox {
    let b = end.anchor.bbox;
    let (sx, sy) = (end.velocity.0 * gap as f64, end.velocity.1 * gap as f64);
    let x0 = b.x.min(b.x + sx);
    let y0 = b.y.min(b.y + sy);
    let x1 = (b.x + b.w).max(b.x + b.w + sx);
    let y1 = (b.y + b.h).max(b.y + b.h + sy);
    BBox::new(x0, y0, x1 - x0, y1 - y0)
}

/// Begin fragments passing the temporal, spatial/direction and deflection
/// filters for `ending`.
pub fn find_joinable(ending: &Fragment, all_begins: &[Fragment], fps: f64, max_deflection: f64) -> Vec<JoinCandidate> {
    let max_gap = fps.round().max(1.0) as u64;
    all_begins
        .iter()
        .filter(|b| b.kind == FragmentKind::Begin && b.track_id != ending.track_id)
        .filter(|b| b.frame > ending.frame && b.frame - ending.frame <= max_gap)
        .filter(|b| {
            let gap = b.frame - ending.frame;
            ending.direction.is_some()
                && b.direction == ending.direction
                && swept_box(ending, gap).contains(b.anchor.center.x, b.anchor.center.y)
        })
        .filter_map(|b| {
            let deflection = deflection_deg(ending, b)?;
            (deflection <= max_deflection).then(|| JoinCandidate {
                end_fragment: ending.clone(),
                begin_fragment: b.clone(),
                deflection,
                predicted_gap: kinematic_prediction(ending, b.frame - ending.frame).distance(&b.anchor.center),
            })
        })
        .collect()
}

/// Picks the candidate nearest the predicted position, within `dist_thresh`.
/// Without a predictor, or when it has no answer, the terminal velocity is
/// extrapolated.
pub fn candidate_select(
    ending: &Fragment,
    candidates: &[JoinCandidate],
    mut predictor: Option<&mut dyn PositionPredictor>,
    dist_thresh: f64,
) -> Option<JoinCandidate> {
    let mut cache: BTreeMap<u64, BevPoint> = BTreeMap::new();
    let mut best: Option<JoinCandidate> = None;
    for c in candidates {
        let gap = c.frame_gap();
        let predicted = *cache.entry(gap).or_insert_with(|| {
            predictor
                .as_mut()
                .and_then(|p| p.predict(ending, gap))
                .unwrap_or_else(|| kinematic_prediction(ending, gap))
        });
        let d = predicted.distance(&c.begin_fragment.anchor.center);
        if d > dist_thresh {
            continue;
        }
        let scored = JoinCandidate { predicted_gap: d, ..c.clone() };
        let better = match &best {
            None => true,
            Some(b) => {
                let key = |c: &JoinCandidate| (c.predicted_gap, c.frame_gap() as f64, c.deflection, c.begin_fragment.track_id as f64);
                key(&scored).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some(scored);
        }
    }
    best
}

/// Joins fragmented tracks. Ends are processed in frame order; each begin is
/// consumed at most once and chains are followed transitively. A joined
/// track keeps the earliest id and its entries are concatenated without
/// filling the gap.
pub fn join_tracks(
    tracks: &[Track],
    fps: f64,
    resolution: (u32, u32),
    cfg: &StitchConfig,
    mut predictor: Option<&mut dyn PositionPredictor>,
) -> Vec<Track> {
    let mut by_id: BTreeMap<u64, Track> = tracks
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.trim_coasting();
            (t.id, t)
        })
        .collect();
    if !cfg.enabled {
        return by_id.into_values().collect();
    }
    let fragments = build_fragments(&by_id.values().cloned().collect::<Vec<_>>(), cfg);
    let begins: Vec<Fragment> = fragments.iter().filter(|f| f.kind == FragmentKind::Begin).cloned().collect();
    let mut ends: Vec<&Fragment> = fragments.iter().filter(|f| f.kind == FragmentKind::End).collect();
    ends.sort_by_key(|f| (f.frame, f.track_id));

    let thresh = cfg.dist_thresh(resolution);
    let mut consumed: BTreeSet<u64> = BTreeSet::new();
    let mut next: BTreeMap<u64, u64> = BTreeMap::new();
    for end in ends {
        let open: Vec<Fragment> = begins.iter().filter(|b| !consumed.contains(&b.track_id)).cloned().collect();
        let candidates = find_joinable(end, &open, fps, cfg.max_deflection_deg);
        if candidates.is_empty() {
            continue;
        }
        let pred = predictor.as_mut().map(|p| &mut **p as &mut dyn PositionPredictor);
        if let Some(c) = candidate_select(end, &candidates, pred, thresh) {
            consumed.insert(c.begin_fragment.track_id);
            next.insert(end.track_id, c.begin_fragment.track_id);
            log::debug!(
                "join {} -> {} (gap {} frames, {:.1} px, {:.1} deg)",
                end.track_id,
                c.begin_fragment.track_id,
                c.frame_gap(),
                c.predicted_gap,
                c.deflection
            );
        }
    }

    let heads: Vec<u64> = by_id.keys().copied().filter(|id| !consumed.contains(id)).collect();
    let mut out = Vec::with_capacity(heads.len());
    for head in heads {
        let mut track = by_id.remove(&head).expect("head present");
        let mut cur = head;
        while let Some(&succ) = next.get(&cur) {
            let tail = by_id.remove(&succ).expect("successor present");
            track.max_score = track.max_score.max(tail.max_score);
            track.entries.extend(tail.entries);
            cur = succ;
        }
        track.refresh_class();
        out.push(track);
    }
    out.sort_by_key(|t| t.id);
    out
}
