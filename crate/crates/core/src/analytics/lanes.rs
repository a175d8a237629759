use serde::{Deserialize, Serialize};

use super::{direction_of, AnalyticsError, Direction, Result};
use crate::tracking::Track;

/// A BEV coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn pick(self, x: f64, y: f64) -> f64 {
        match self {
            Axis::X => x,
            Axis::Y => y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneConfig {
    pub bin_px: f64,
    /// Moving-average length of the histogram smoother, in bins.
    pub smooth_bins: usize,
    /// Peaks below this fraction of the tallest bin in prominence are noise.
    pub min_prominence_frac: f64,
    pub min_lane_separation: f64,
    /// Lane width reported when only one lane is found.
    pub default_lane_width: f64,
    /// Tracks moving less than this (BEV px) have no direction.
    pub min_displacement: f64,
}

impl Default for LaneConfig {
    fn default() -> Self {
        Self {
            bin_px: 2.0,
            smooth_bins: 5,
            min_prominence_frac: 0.2,
            min_lane_separation: 6.0,
            default_lane_width: 32.0,
            min_displacement: 10.0,
        }
    }
}

/// Lane centers of one direction along the cross-travel axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneModel {
    pub direction: Direction,
    /// Axis perpendicular to travel.
    pub axis: Axis,
    /// Lane centers in lane order: index 0 is lane 1, the innermost lane
    /// (leftmost seen in the direction of travel).
    pub centers: Vec<f64>,
    pub width: f64,
}

fn smooth(hist: &[f64], len: usize) -> Vec<f64> {
    let half = len / 2;
    (0..hist.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(hist.len() - 1);
            hist[lo..=hi].iter().sum::<f64>() / len.max(1) as f64
        })
        .collect()
}

/// Local maxima of `s` with their topographic prominence. A side that runs
/// off the end of the profile without meeting a higher value contributes
/// its minimum as usual.
fn peaks(s: &[f64]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let n = s.len();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && s[j + 1] == s[i] {
            j += 1;
        }
        let rises_left = i == 0 || s[i - 1] < s[i];
        let falls_right = j == n - 1 || s[j + 1] < s[i];
        if rises_left && falls_right && s[i] > 0.0 {
            let left_min = s[..i].iter().rev().take_while(|&&v| v <= s[i]).cloned().fold(s[i], f64::min);
            let right_min = s[j + 1..].iter().take_while(|&&v| v <= s[i]).cloned().fold(s[i], f64::min);
            out.push(((i + j) / 2, s[i] - left_min.max(right_min)));
        }
        i = j + 1;
    }
    out
}

/// Finds lane centers from the cross-travel positions of tracks moving in
/// `direction`.
pub fn detect_lanes(tracks: &[Track], direction: Direction, cfg: &LaneConfig) -> Result<LaneModel> {
    let mut travel = (0.0, 0.0);
    let mut abs_travel = (0.0, 0.0);
    let mut members = Vec::new();
    for t in tracks {
        if let Ok((d, _)) = direction_of(t, cfg.min_displacement) {
            if d == direction {
                let a = t.first_detection().unwrap().center;
                let b = t.last_detection().unwrap().center;
                let (dx, dy) = (b.x - a.x, b.y - a.y);
                let len = dx.hypot(dy);
                travel.0 += dx / len;
                travel.1 += dy / len;
                abs_travel.0 += dx.abs();
                abs_travel.1 += dy.abs();
                members.push(t);
            }
        }
    }
    if members.is_empty() {
        return Err(AnalyticsError::NoLanesFound);
    }
    let axis = if abs_travel.0 >= abs_travel.1 { Axis::Y } else { Axis::X };
    let values: Vec<f64> = members
        .iter()
        .flat_map(|t| t.detections().map(|d| axis.pick(d.center.x, d.center.y)))
        .collect();

    let lo = (values.iter().cloned().fold(f64::INFINITY, f64::min) / cfg.bin_px).floor() * cfg.bin_px;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Pad so that edge lanes are not clipped by the smoother.
    let pad = cfg.smooth_bins;
    let nbins = ((hi - lo) / cfg.bin_px).floor() as usize + 1 + 2 * pad;
    let origin = lo - pad as f64 * cfg.bin_px;
    let mut hist = vec![0.0; nbins];
    for &v in &values {
        let b = (((v - origin) / cfg.bin_px).floor() as usize).min(nbins - 1);
        hist[b] += 1.0;
    }
    let s = smooth(&hist, cfg.smooth_bins);
    let tallest = s.iter().cloned().fold(0.0, f64::max);
    let mut found: Vec<(usize, f64)> = peaks(&s)
        .into_iter()
        .filter(|&(_, p)| p >= cfg.min_prominence_frac * tallest)
        .collect();
    found.sort_by(|a, b| s[b.0].total_cmp(&s[a.0]).then(a.0.cmp(&b.0)));

    let half = 0.5 * cfg.min_lane_separation;
    let mut centers: Vec<f64> = Vec::new();
    for (bin, _) in found {
        let c0 = origin + (bin as f64 + 0.5) * cfg.bin_px;
        let near: Vec<f64> = values.iter().cloned().filter(|v| (v - c0).abs() <= half).collect();
        let c = if near.is_empty() { c0 } else { near.iter().sum::<f64>() / near.len() as f64 };
        if centers.iter().all(|k| (k - c).abs() >= cfg.min_lane_separation) {
            centers.push(c);
        }
    }
    if centers.is_empty() {
        return Err(AnalyticsError::NoLanesFound);
    }

    let mut sorted = centers.clone();
    sorted.sort_by(f64::total_cmp);
    let width = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
        .unwrap_or(cfg.default_lane_width);

    // Left normal of travel (tx, ty) is (ty, -tx); lane 1 is furthest along it.
    let normal = match axis {
        Axis::Y => -travel.0,
        Axis::X => travel.1,
    };
    centers.sort_by(|a, b| (b * normal).total_cmp(&(a * normal)));
    Ok(LaneModel { direction, axis, centers, width })
}

/// Lane number (1-based) of the center nearest the track's median
/// cross-travel position; ties go to the lower lane number.
pub fn assign_lane(track: &Track, lanes: &LaneModel) -> Result<u32> {
    let mut v: Vec<f64> = track.detections().map(|d| lanes.axis.pick(d.center.x, d.center.y)).collect();
    if v.is_empty() {
        return Err(AnalyticsError::TooShort(track.id));
    }
    if lanes.centers.is_empty() {
        return Err(AnalyticsError::NoLanesFound);
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    let mut best = 0;
    for (i, c) in lanes.centers.iter().enumerate() {
        if (c - median).abs() < (lanes.centers[best] - median).abs() {
            best = i;
        }
    }
    Ok(best as u32 + 1)
}
