use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    assign_min_cost, check_frame, iou, kf_update, predict_to, BevDetection, IdAllocator, KalmanParams,
    KalmanState, MatchStage, MultiTracker, Result, Track, TrackingError,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ByteConfig {
    /// Detections scoring strictly above `tau` are high-confidence.
    pub tau: f64,
    /// Minimum IOU for the high-score association.
    pub match_thresh_high: f64,
    /// Minimum IOU for the low-score association.
    pub match_thresh_low: f64,
    /// Unmatched frames a track survives on prediction alone.
    pub max_coast: u32,
}

impl Default for ByteConfig {
    fn default() -> Self {
        Self { tau: 0.5, match_thresh_high: 0.3, match_thresh_low: 0.2, max_coast: 15 }
    }
}

impl ByteConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.tau) && unit(self.match_thresh_high) && unit(self.match_thresh_low)) {
            return Err(TrackingError::Config("BYTE thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ByteTracker {
    cfg: ByteConfig,
    kalman: KalmanParams,
    tracks: Vec<Track>,
    ids: IdAllocator,
    last_frame: Option<u64>,
}

impl ByteTracker {
    pub fn new(cfg: ByteConfig, kalman: KalmanParams) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, kalman, tracks: Vec::new(), ids: IdAllocator::default(), last_frame: None })
    }
}

/// Gated IOU association of the listed tracks with the listed detections.
/// Returns (track index, detection index, iou).
fn associate(
    tracks: &[Track],
    predicted: &[KalmanState],
    track_idx: &[usize],
    dets: &[&BevDetection],
    det_idx: &[usize],
    min_iou: f64,
) -> Vec<(usize, usize, f64)> {
    let ious = DMatrix::from_fn(track_idx.len(), det_idx.len(), |r, c| {
        let t = track_idx[r];
        iou(&tracks[t].box_at(predicted[t].position()), &dets[det_idx[c]].bbox)
    });
    let cost = ious.map(|v| 1.0 - v);
    assign_min_cost(&cost, 1.0 - min_iou)
        .into_iter()
        .map(|(r, c)| (track_idx[r], det_idx[c], ious[(r, c)]))
        .collect()
}

impl MultiTracker for ByteTracker {
    fn step(&mut self, frame: u64, dets: &[BevDetection]) -> Result<Vec<Track>> {
        check_frame(frame, self.last_frame, dets)?;
        self.last_frame = Some(frame);

        let dets: Vec<&BevDetection> = dets.iter().collect();
        let (high, low): (Vec<usize>, Vec<usize>) =
            (0..dets.len()).partition(|&i| dets[i].score > self.cfg.tau);

        let predicted: Vec<KalmanState> =
            self.tracks.iter().map(|t| predict_to(t, frame, &self.kalman)).collect();

        let all_tracks: Vec<usize> = (0..self.tracks.len()).collect();
        let first = associate(&self.tracks, &predicted, &all_tracks, &dets, &high, self.cfg.match_thresh_high);

        let mut assigned: Vec<Option<(usize, MatchStage, f64)>> = vec![None; self.tracks.len()];
        let mut high_used = vec![false; dets.len()];
        for &(t, d, v) in &first {
            assigned[t] = Some((d, MatchStage::First, v));
            high_used[d] = true;
        }

        let remaining: Vec<usize> = all_tracks.iter().copied().filter(|&t| assigned[t].is_none()).collect();
        let second = associate(&self.tracks, &predicted, &remaining, &dets, &low, self.cfg.match_thresh_low);
        for &(t, d, v) in &second {
            assigned[t] = Some((d, MatchStage::Second, v));
        }

        let mut finished = Vec::new();
        let mut kept = Vec::with_capacity(self.tracks.len());
        for (t, mut track) in std::mem::take(&mut self.tracks).into_iter().enumerate() {
            match assigned[t] {
                Some((d, stage, v)) => {
                    let det = dets[d];
                    let state = kf_update(&predicted[t], det.center, &self.kalman)?;
                    track.push_match(det.clone(), state, stage, v);
                    kept.push(track);
                }
                None if track.misses < self.cfg.max_coast => {
                    track.push_coast(frame, predicted[t]);
                    kept.push(track);
                }
                None => {
                    track.finish();
                    finished.push(track);
                }
            }
        }
        // Only unmatched high-score detections start tracks.
        for &d in &high {
            if !high_used[d] {
                let state = KalmanState::initiate(dets[d].center, &self.kalman);
                kept.push(Track::start(self.ids.next_id(), dets[d].clone(), state));
            }
        }
        self.tracks = kept;
        Ok(finished)
    }

    fn active(&self) -> &[Track] {
        &self.tracks
    }

    fn flush(&mut self) -> Vec<Track> {
        std::mem::take(&mut self.tracks)
            .into_iter()
            .map(|mut t| {
                t.finish();
                t
            })
            .collect()
    }
}
