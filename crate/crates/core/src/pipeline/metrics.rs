use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::GroundTruth;
use crate::analytics::{direction_of, error_rate, Direction};
use crate::tracking::{BBox, Track};

type BoxKey = (u64, [u64; 4]);

fn key(frame: u64, b: &BBox) -> BoxKey {
    (frame, [b.x.to_bits(), b.y.to_bits(), b.w.to_bits(), b.h.to_bits()])
}

fn truth_index(truth: &GroundTruth) -> BTreeMap<BoxKey, u64> {
    truth
        .vehicles
        .iter()
        .flat_map(|v| v.boxes.iter().map(move |(f, b)| (key(*f, b), v.id)))
        .collect()
}

/// Truth vehicles whose detections each predicted track carries, matched by
/// exact image box.
pub fn truth_ids_by_track(tracks: &[Track], truth: &GroundTruth) -> BTreeMap<u64, BTreeSet<u64>> {
    let index = truth_index(truth);
    tracks
        .iter()
        .map(|t| {
            let ids = t.detections().filter_map(|d| index.get(&key(d.frame, &d.image_bbox)).copied()).collect();
            (t.id, ids)
        })
        .collect()
}

/// Truth vehicles spread over more than one predicted track.
pub fn split_vehicles(tracks: &[Track], truth: &GroundTruth) -> BTreeSet<u64> {
    let mut owners: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for (track, ids) in truth_ids_by_track(tracks, truth) {
        for id in ids {
            owners.entry(id).or_default().insert(track);
        }
    }
    owners.into_iter().filter(|(_, t)| t.len() > 1).map(|(id, _)| id).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionCount {
    pub direction: Direction,
    pub truth: u64,
    pub predicted: u64,
    /// `None` when the direction has no truth vehicles.
    pub error_rate_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    pub truth_vehicles: usize,
    pub predicted_tracks: usize,
    pub matched_detections: usize,
    pub unmatched_detections: usize,
    /// Changes of predicted id along each truth vehicle's detections, summed.
    pub id_switches: usize,
    pub split_vehicles: usize,
    /// Predicted tracks carrying detections of more than one truth vehicle.
    pub merged_tracks: usize,
    pub counts: Vec<DirectionCount>,
}

/// Scores predicted tracks against ground truth. A track counts toward a
/// direction when it has at least `min_detections` detections and moves at
/// least `min_displacement` BEV px.
pub fn evaluate_tracks(
    tracks: &[Track],
    truth: &GroundTruth,
    min_detections: usize,
    min_displacement: f64,
) -> TrackingMetrics {
    let index = truth_index(truth);
    let mut matched = 0;
    let mut unmatched = 0;
    let mut per_truth: BTreeMap<u64, Vec<(u64, u64)>> = BTreeMap::new();
    let mut merged = 0;
    for t in tracks {
        let mut ids = BTreeSet::new();
        for d in t.detections() {
            match index.get(&key(d.frame, &d.image_bbox)) {
                Some(&id) => {
                    matched += 1;
                    ids.insert(id);
                    per_truth.entry(id).or_default().push((d.frame, t.id));
                }
                None => unmatched += 1,
            }
        }
        if ids.len() > 1 {
            merged += 1;
        }
    }
    let mut switches = 0;
    let mut split = 0;
    for seq in per_truth.values_mut() {
        seq.sort_unstable();
        switches += seq.windows(2).filter(|w| w[0].1 != w[1].1).count();
        if seq.iter().map(|s| s.1).collect::<BTreeSet<_>>().len() > 1 {
            split += 1;
        }
    }

    let mut predicted: BTreeMap<Direction, u64> = BTreeMap::new();
    for t in tracks.iter().filter(|t| t.detection_count() >= min_detections.max(2)) {
        if let Ok((d, _)) = direction_of(t, min_displacement) {
            *predicted.entry(d).or_default() += 1;
        }
    }
    let counts = [Direction::One, Direction::Two]
        .into_iter()
        .map(|d| {
            let real = truth.count(d, None) as u64;
            let est = predicted.get(&d).copied().unwrap_or(0);
            DirectionCount { direction: d, truth: real, predicted: est, error_rate_pct: error_rate(est, real).ok() }
        })
        .collect();

    TrackingMetrics {
        truth_vehicles: truth.vehicles.len(),
        predicted_tracks: tracks.len(),
        matched_detections: matched,
        unmatched_detections: unmatched,
        id_switches: switches,
        split_vehicles: split,
        merged_tracks: merged,
        counts,
    }
}
