use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BBox, BevDetection, KalmanState};
use crate::geometry::BevPoint;

/// Which association pass attached a detection to a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchStage {
    /// The detection started the track.
    Birth,
    /// Primary association (all Motpy matches, BYTE high-score pass).
    First,
    /// BYTE low-score pass.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub frame: u64,
    pub state: KalmanState,
    /// `None` while coasting on prediction only.
    pub det: Option<BevDetection>,
    pub stage: Option<MatchStage>,
    /// Association IOU for matched entries.
    pub match_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub cls: String,
    pub entries: Vec<TrackEntry>,
    pub max_score: f64,
    pub status: TrackStatus,
    /// Consecutive frames without an associated detection.
    #[serde(default)]
    pub misses: u32,
}

impl Track {
    pub fn start(id: u64, det: BevDetection, state: KalmanState) -> Self {
        let cls = det.cls.clone();
        let max_score = det.score;
        Self {
            id,
            cls,
            entries: vec![TrackEntry {
                frame: det.frame,
                state,
                det: Some(det),
                stage: Some(MatchStage::Birth),
                match_iou: None,
            }],
            max_score,
            status: TrackStatus::Active,
            misses: 0,
        }
    }

    pub fn first_frame(&self) -> u64 {
        self.entries.first().map_or(0, |e| e.frame)
    }

    pub fn last_frame(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.frame)
    }

    pub fn last_state(&self) -> &KalmanState {
        &self.entries.last().expect("track has entries").state
    }

    pub fn detections(&self) -> impl Iterator<Item = &BevDetection> {
        self.entries.iter().filter_map(|e| e.det.as_ref())
    }

    pub fn detection_count(&self) -> usize {
        self.detections().count()
    }

    pub fn first_detection(&self) -> Option<&BevDetection> {
        self.detections().next()
    }

    pub fn last_detection(&self) -> Option<&BevDetection> {
        self.entries.iter().rev().find_map(|e| e.det.as_ref())
    }

    /// Observed centers with their frames.
    pub fn centers(&self) -> Vec<(u64, BevPoint)> {
        self.detections().map(|d| (d.frame, d.center)).collect()
    }

    /// Box around the given position using the size of the latest detection.
    pub fn box_at(&self, p: BevPoint) -> BBox {
        let (w, h) = self
            .last_detection()
            .map_or((1.0, 1.0), |d| (d.bbox.w, d.bbox.h));
        BBox::centered(p.x, p.y, w, h)
    }

    pub fn push_match(&mut self, det: BevDetection, state: KalmanState, stage: MatchStage, iou: f64) {
        self.max_score = self.max_score.max(det.score);
        self.entries.push(TrackEntry {
            frame: det.frame,
            state,
            det: Some(det),
            stage: Some(stage),
            match_iou: Some(iou),
        });
        self.misses = 0;
        self.refresh_class();
    }

    pub fn push_coast(&mut self, frame: u64, state: KalmanState) {
        self.entries.push(TrackEntry { frame, state, det: None, stage: None, match_iou: None });
        self.misses += 1;
    }

    /// Drops trailing prediction-only entries.
    pub fn trim_coasting(&mut self) {
        while matches!(self.entries.last(), Some(e) if e.det.is_none()) {
            self.entries.pop();
        }
    }

    pub fn finish(&mut self) {
        self.trim_coasting();
        self.status = TrackStatus::Finished;
        self.misses = 0;
    }

    /// Majority class over associated detections; ties go to the larger
    /// cumulative score, then to the lexicographically smaller label.
    pub fn refresh_class(&mut self) {
        let mut votes: BTreeMap<&str, (u32, f64)> = BTreeMap::new();
        for d in self.entries.iter().filter_map(|e| e.det.as_ref()) {
            let v = votes.entry(d.cls.as_str()).or_default();
            v.0 += 1;
            v.1 += d.score;
        }
        let mut best: Option<(&str, (u32, f64))> = None;
        for (cls, v) in votes {
            let better = match best {
                None => true,
                Some((_, b)) => v.0 > b.0 || (v.0 == b.0 && v.1 > b.1),
            };
            if better {
                best = Some((cls, v));
            }
        }
        if let Some((cls, _)) = best {
            self.cls = cls.to_string();
        }
    }
}

/// Monotone id source; ids start at 1 and are never reused.
#[derive(Debug, Clone)]
pub struct IdAllocator {
    next: u64,
}

impl Default for IdAllocator {
    fn default() -> Self {
        Self { next: 1 }
    }
}

impl IdAllocator {
    pub fn next_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }
}
