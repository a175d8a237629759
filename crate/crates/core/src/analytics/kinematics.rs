use serde::{Deserialize, Serialize};

use super::{AnalyticsError, Result};
use crate::calibration::{calibrated_displacement, CalibrationModel};
use crate::geometry::BevPoint;
use crate::tracking::Track;

pub const FTPS_TO_MPH: f64 = 3600.0 / 5280.0;
pub const MPH_TO_MPS: f64 = 0.44704;

/// `(time in seconds, value)` samples.
pub type Series = Vec<(f64, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicsConfig {
    /// Length of the centered moving average applied to speed.
    pub smoothing_s: f64,
    /// Acceleration is the speed change across this window, centered.
    pub accel_window_s: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self { smoothing_s: 1.0, accel_window_s: 5.0 }
    }
}

/// Observed centers linearly interpolated onto every frame between the first
/// and last detection.
pub fn resample_centers(centers: &[(u64, BevPoint)]) -> Vec<(u64, BevPoint)> {
    let mut out = Vec::new();
    for w in centers.windows(2) {
        let ((f0, p0), (f1, p1)) = (w[0], w[1]);
        let span = (f1 - f0) as f64;
        for f in f0..f1 {
            let t = (f - f0) as f64 / span;
            out.push((f, BevPoint::new(p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y))));
        }
    }
    if let Some(&last) = centers.last() {
        out.push(last);
    }
    out
}

/// Centered moving average whose window shrinks symmetrically at the ends.
fn moving_average(v: &[f64], half: usize) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            v[i - h..=i + h].iter().sum::<f64>() / (2 * h + 1) as f64
        })
        .collect()
}

fn interp(v: &[f64], pos: f64) -> f64 {
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Smoothed speed (mph) and acceleration (m/s²) series of one track.
///
/// Speeds sit at the midpoints of consecutive frames. Acceleration is only
/// reported where the whole window lies inside the track.
pub fn kinematics_series(
    track: &Track,
    cal: &CalibrationModel,
    fps: f64,
    cfg: &KinematicsConfig,
) -> Result<(Series, Series)> {
    let pts = resample_centers(&track.centers());
    if pts.len() < 2 {
        return Err(AnalyticsError::TooShort(track.id));
    }
    let mut raw = Vec::with_capacity(pts.len() - 1);
    let mut times = Vec::with_capacity(pts.len() - 1);
    for w in pts.windows(2) {
        let ((f0, a), (_, b)) = (w[0], w[1]);
        let mid = cal.clamp(BevPoint::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
        let (dx, dy) = calibrated_displacement(cal, mid, b.x - a.x, b.y - a.y)?;
        raw.push(dx.hypot(dy) * fps * FTPS_TO_MPH);
        times.push((f0 as f64 + 0.5) / fps);
    }
    let half = ((cfg.smoothing_s * fps).round() as usize) / 2;
    let smooth = moving_average(&raw, half);
    let speed: Series = times.iter().cloned().zip(smooth.iter().cloned()).collect();

    let lag = 0.5 * cfg.accel_window_s * fps;
    let last = (smooth.len() - 1) as f64;
    let mut accel = Series::new();
    for (i, &t) in times.iter().enumerate() {
        let (lo, hi) = (i as f64 - lag, i as f64 + lag);
        if lo < -1e-9 || hi > last + 1e-9 {
            continue;
        }
        let dv = interp(&smooth, hi.min(last)) - interp(&smooth, lo.max(0.0));
        accel.push((t, dv / cfg.accel_window_s * MPH_TO_MPS));
    }
    Ok((speed, accel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::test_support::track_through;
    use crate::calibration::CalibrationSettings;

    /// 1 BEV px = 1 ft everywhere.
    fn unit_model() -> CalibrationModel {
        CalibrationModel::from_coeffs(vec![14.7], vec![6.0], (2000.0, 100.0), &CalibrationSettings::default(), None)
            .unwrap()
    }

    #[test]
    fn constant_speed() {
        let fps = 30.0;
        let v_ftps = 60.0 / FTPS_TO_MPH;
        let pts: Vec<(f64, f64)> = (0..90).map(|i| (10.0 + v_ftps * i as f64 / fps, 50.0)).collect();
        let (speed, accel) =
            kinematics_series(&track_through(1, &pts), &unit_model(), fps, &Default::default()).unwrap();
        assert_eq!(speed.len(), 89);
        assert!(speed.iter().all(|&(_, v)| (v - 60.0).abs() < 1e-9));
        assert!(accel.is_empty(), "3 s track is shorter than the window");
    }

    #[test]
    fn gaps_are_interpolated() {
        let mut t = track_through(1, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        t.entries.remove(1);
        let r = resample_centers(&t.centers());
        assert_eq!(r.len(), 4);
        assert_eq!(r[1], (1, BevPoint::new(1.0, 0.0)));
    }

    #[test]
    fn single_point_too_short() {
        let t = track_through(9, &[(1.0, 1.0)]);
        assert_eq!(
            kinematics_series(&t, &unit_model(), 30.0, &Default::default()),
            Err(AnalyticsError::TooShort(9))
        );
    }

    #[test]
    fn constant_acceleration() {
        let fps = 30.0;
        let a = 2.0 / FTPS_TO_MPH; // 2 mph/s in ft/s²
        let v0 = 50.0 / FTPS_TO_MPH;
        let pts: Vec<(f64, f64)> = (0..=300)
            .map(|i| {
                let t = i as f64 / fps;
                (v0 * t + 0.5 * a * t * t, 40.0)
            })
            .collect();
        let (speed, accel) =
            kinematics_series(&track_through(1, &pts), &unit_model(), fps, &Default::default()).unwrap();
        assert!(!accel.is_empty());
        for &(_, v) in &accel {
            assert!((v - 2.0 * MPH_TO_MPS).abs() < 1e-9, "{v}");
        }
        // Interior smoothed speed equals the instantaneous speed.
        let (t, v) = speed[150];
        assert!((v - (50.0 + 2.0 * t)).abs() < 1e-9);
    }
}
