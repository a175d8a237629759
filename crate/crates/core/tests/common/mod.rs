#![allow(dead_code)]

use birdseye::geometry::BevPoint;
use birdseye::tracking::{BBox, BevDetection, KalmanParams, KalmanState, MatchStage, Track};

pub fn bev_det(frame: u64, x: f64, y: f64, score: f64) -> BevDetection {
    BevDetection {
        frame,
        cls: "car".into(),
        center: BevPoint::new(x, y),
        bbox: BBox::centered(x, y, 10.0, 10.0),
        score,
        image_bbox: BBox::centered(x, y, 10.0, 10.0),
        observed_size: (10.0, 10.0),
    }
}

/// Finished track with one detection per frame from `first_frame`.
pub fn track_from(id: u64, first_frame: u64, pts: &[(f64, f64)]) -> Track {
    let params = KalmanParams::default();
    let (x, y) = pts[0];
    let d = bev_det(first_frame, x, y, 0.9);
    let mut t = Track::start(id, d.clone(), KalmanState::initiate(d.center, &params));
    let mut state = KalmanState::initiate(d.center, &params);
    for (i, &(x, y)) in pts.iter().enumerate().skip(1) {
        let d = bev_det(first_frame + i as u64, x, y, 0.9);
        state = birdseye::tracking::kf_update(&birdseye::tracking::kf_predict(&state, &params), d.center, &params)
            .expect("well-conditioned update");
        t.push_match(d, state, MatchStage::First, 1.0);
    }
    t.finish();
    t
}

/// Smooth texture sampled at real coordinates, so shifted copies are exact.
pub fn texture_value(x: f64, y: f64) -> f64 {
    128.0
        + 40.0 * (0.31 * x + 0.17 * y).sin()
        + 30.0 * (0.23 * y - 0.11 * x).cos()
        + 25.0 * (0.07 * x * 1.3 + 0.41 * y).sin() * (0.19 * x).cos()
}

/// Frame whose pixel (x, y) shows the texture at (x - dx, y - dy).
pub fn textured_frame(w: usize, h: usize, dx: f64, dy: f64) -> birdseye::feature_flow::GrayFrame {
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(texture_value(x as f64 - dx, y as f64 - dy).round().clamp(0.0, 255.0) as u8);
        }
    }
    birdseye::feature_flow::GrayFrame::new(w, h, data).unwrap()
}
