use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    assign_min_cost, check_frame, iou, kf_update, predict_to, BevDetection, IdAllocator, KalmanParams,
    KalmanState, MatchStage, MultiTracker, Result, Track, TrackingError,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotpyConfig {
    /// Detections below this score are dropped before association.
    pub sigma_l: f64,
    /// A finished track is kept if its best score reaches this...
    pub sigma_h: f64,
    /// Minimum combined IOU × class-similarity score for a match.
    pub sigma_iou: f64,
    /// ...or if it has at least this many detections.
    pub min_tsize: usize,
    /// Unmatched frames a track may coast through before it is closed.
    pub max_coast: u32,
}

impl Default for MotpyConfig {
    fn default() -> Self {
        Self { sigma_l: 0.1, sigma_h: 0.5, sigma_iou: 0.25, min_tsize: 3, max_coast: 0 }
    }
}

impl MotpyConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.sigma_l) && unit(self.sigma_h) && unit(self.sigma_iou)) {
            return Err(TrackingError::Config("motpy thresholds must lie in [0, 1]".into()));
        }
        if self.sigma_l > self.sigma_h {
            return Err(TrackingError::Config("sigma_l must not exceed sigma_h".into()));
        }
        Ok(())
    }

    fn keeps(&self, t: &Track) -> bool {
        t.max_score >= self.sigma_h || t.detection_count() >= self.min_tsize
    }
}

/// Class agreement factor multiplied into the IOU.
fn class_similarity(a: &str, b: &str) -> f64 {
    if a == b {
        1.0
    } else {
        0.5
    }
}

#[derive(Debug, Clone)]
pub struct MotpyTracker {
    cfg: MotpyConfig,
    kalman: KalmanParams,
    active: Vec<Track>,
    ids: IdAllocator,
    last_frame: Option<u64>,
}

impl MotpyTracker {
    pub fn new(cfg: MotpyConfig, kalman: KalmanParams) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, kalman, active: Vec::new(), ids: IdAllocator::default(), last_frame: None })
    }
}

impl MultiTracker for MotpyTracker {
    fn step(&mut self, frame: u64, dets: &[BevDetection]) -> Result<Vec<Track>> {
        check_frame(frame, self.last_frame, dets)?;
        self.last_frame = Some(frame);
        let dets: Vec<&BevDetection> = dets.iter().filter(|d| d.score >= self.cfg.sigma_l).collect();

        let predicted: Vec<KalmanState> =
            self.active.iter().map(|t| predict_to(t, frame, &self.kalman)).collect();
        let ious = DMatrix::from_fn(self.active.len(), dets.len(), |r, c| {
            iou(&self.active[r].box_at(predicted[r].position()), &dets[c].bbox)
        });
        let cost = DMatrix::from_fn(self.active.len(), dets.len(), |r, c| {
            1.0 - ious[(r, c)] * class_similarity(&self.active[r].cls, &dets[c].cls)
        });
        let matches = assign_min_cost(&cost, 1.0 - self.cfg.sigma_iou);

        let mut det_for_track = vec![None; self.active.len()];
        let mut det_used = vec![false; dets.len()];
        for &(r, c) in &matches {
            det_for_track[r] = Some(c);
            det_used[c] = true;
        }

        let mut finished = Vec::new();
        let mut still_active = Vec::with_capacity(self.active.len());
        for (r, mut track) in std::mem::take(&mut self.active).into_iter().enumerate() {
            match det_for_track[r] {
                Some(c) => {
                    let det = dets[c];
                    let state = kf_update(&predicted[r], det.center, &self.kalman)?;
                    track.push_match(det.clone(), state, MatchStage::First, ious[(r, c)]);
                    still_active.push(track);
                }
                None if track.misses < self.cfg.max_coast => {
                    track.push_coast(frame, predicted[r]);
                    still_active.push(track);
                }
                None => {
                    track.finish();
                    if self.cfg.keeps(&track) {
                        finished.push(track);
                    }
                }
            }
        }
        for (c, det) in dets.iter().enumerate() {
            if !det_used[c] {
                let state = KalmanState::initiate(det.center, &self.kalman);
                still_active.push(Track::start(self.ids.next_id(), (*det).clone(), state));
            }
        }
        self.active = still_active;
        Ok(finished)
    }

    fn active(&self) -> &[Track] {
        &self.active
    }

    fn flush(&mut self) -> Vec<Track> {
        let cfg = self.cfg;
        std::mem::take(&mut self.active)
            .into_iter()
            .filter_map(|mut t| {
                t.finish();
                cfg.keeps(&t).then_some(t)
            })
            .collect()
    }
}
