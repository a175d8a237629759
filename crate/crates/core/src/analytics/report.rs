use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    arithmetic_mean, assign_lane, detect_lanes, direction_of, error_rate, kinematics_series, percentile,
    space_mean_speed, AnalyticsError, CountKey, CountTable, Direction, KinematicsConfig, LaneConfig, LaneModel,
    Series,
};
use crate::calibration::CalibrationModel;
use crate::tracking::Track;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsConfig {
    pub lanes: LaneConfig,
    pub kinematics: KinematicsConfig,
    /// Tracks with fewer detections are not counted.
    pub min_detections: usize,
    /// Vehicles slower than this are left out of the space-mean speed.
    pub min_speed_mph: f64,
    pub speed_bin_mph: f64,
    pub accel_bin_ms2: f64,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        Self {
            lanes: LaneConfig::default(),
            kinematics: KinematicsConfig::default(),
            min_detections: 2,
            min_speed_mph: 1.0,
            speed_bin_mph: 5.0,
            accel_bin_ms2: 0.25,
        }
    }
}

/// Per-vehicle measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: u64,
    pub class: String,
    pub direction: Direction,
    pub lane: u32,
    pub first_frame: u64,
    pub last_frame: u64,
    pub mean_speed_mph: f64,
    pub mean_accel_ms2: Option<f64>,
    #[serde(skip)]
    pub speeds: Series,
    #[serde(skip)]
    pub accels: Series,
}

/// Result of measuring a set of tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub records: Vec<VehicleRecord>,
    pub lanes: Vec<LaneModel>,
    /// Tracks left out, with the reason.
    pub skipped: Vec<(u64, AnalyticsError)>,
}

pub fn analyze_tracks(
    tracks: &[Track],
    cal: &CalibrationModel,
    fps: f64,
    cfg: &AnalyticsConfig,
) -> super::Result<Analysis> {
    let mut skipped = Vec::new();
    let mut usable: Vec<(&Track, Direction)> = Vec::new();
    for t in tracks {
        if t.detection_count() < cfg.min_detections.max(2) {
            skipped.push((t.id, AnalyticsError::TooShort(t.id)));
            continue;
        }
        match direction_of(t, cfg.lanes.min_displacement) {
            Ok((d, _)) => usable.push((t, d)),
            Err(e) => skipped.push((t.id, e)),
        }
    }
    let mut lanes = Vec::new();
    for dir in [Direction::One, Direction::Two] {
        let members: Vec<Track> = usable.iter().filter(|(_, d)| *d == dir).map(|(t, _)| (*t).clone()).collect();
        if !members.is_empty() {
            lanes.push(detect_lanes(&members, dir, &cfg.lanes)?);
        }
    }
    let mut records = Vec::with_capacity(usable.len());
    for (t, dir) in usable {
        let model = lanes.iter().find(|m| m.direction == dir).expect("lanes for every direction in use");
        let lane = assign_lane(t, model)?;
        let (speeds, accels) = match kinematics_series(t, cal, fps, &cfg.kinematics) {
            Ok(s) => s,
            Err(e) => {
                skipped.push((t.id, e));
                continue;
            }
        };
        let mean_speed_mph = arithmetic_mean(&speeds.iter().map(|s| s.1).collect::<Vec<_>>())?;
        let mean_accel_ms2 = arithmetic_mean(&accels.iter().map(|s| s.1).collect::<Vec<_>>()).ok();
        records.push(VehicleRecord {
            id: t.id,
            class: t.cls.clone(),
            direction: dir,
            lane,
            first_frame: t.first_frame(),
            last_frame: t.last_frame(),
            mean_speed_mph,
            mean_accel_ms2,
            speeds,
            accels,
        });
    }
    records.sort_by_key(|r| r.id);
    skipped.sort_by_key(|s| s.0);
    Ok(Analysis { records, lanes, skipped })
}

/// Ground-truth count for one direction and class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealCount {
    pub direction: Direction,
    pub class: String,
    pub real_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub direction: Direction,
    pub class: String,
    pub lane: u32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSpeed {
    pub direction: Direction,
    pub vehicles: usize,
    pub flow_per_hour: f64,
    pub space_mean_speed_mph: Option<f64>,
    pub time_mean_speed_mph: Option<f64>,
    /// Vehicles below the speed floor.
    pub excluded_slow: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedStats {
    pub direction: Direction,
    pub class: String,
    pub vehicles: usize,
    pub speed_min: f64,
    pub speed_p25: f64,
    pub speed_median: f64,
    pub speed_p75: f64,
    pub speed_max: f64,
    pub accel_mean: Option<f64>,
    pub accel_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateRow {
    pub direction: Direction,
    pub class: String,
    pub real: u64,
    pub estimated: u64,
    /// `None` when the real count is zero.
    pub error_rate_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub duration_s: f64,
    pub vehicles: usize,
    pub counts: Vec<CountRow>,
    pub directions: Vec<DirectionSpeed>,
    pub speed_stats: Vec<SpeedStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_rates: Option<Vec<ErrorRateRow>>,
}

pub fn summarize(
    records: &[VehicleRecord],
    duration_s: f64,
    real: Option<&[RealCount]>,
    cfg: &AnalyticsConfig,
) -> SceneSummary {
    let mut table = CountTable::new();
    for r in records {
        *table.entry(CountKey { direction: r.direction, cls: r.class.clone(), lane: r.lane }).or_default() += 1;
    }
    let counts = table
        .iter()
        .map(|(k, &count)| CountRow { direction: k.direction, class: k.cls.clone(), lane: k.lane, count })
        .collect();

    let mut directions = Vec::new();
    for dir in [Direction::One, Direction::Two] {
        let speeds: Vec<f64> = records.iter().filter(|r| r.direction == dir).map(|r| r.mean_speed_mph).collect();
        if speeds.is_empty() {
            continue;
        }
        let moving: Vec<f64> = speeds.iter().cloned().filter(|&v| v >= cfg.min_speed_mph).collect();
        directions.push(DirectionSpeed {
            direction: dir,
            vehicles: speeds.len(),
            flow_per_hour: if duration_s > 0.0 { speeds.len() as f64 * 3600.0 / duration_s } else { 0.0 },
            space_mean_speed_mph: space_mean_speed(&moving).ok(),
            time_mean_speed_mph: arithmetic_mean(&moving).ok(),
            excluded_slow: speeds.len() - moving.len(),
        });
    }

    let mut groups: BTreeMap<(Direction, String), Vec<&VehicleRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.direction, r.class.clone())).or_default().push(r);
    }
    let speed_stats = groups
        .iter()
        .map(|((dir, cls), rs)| {
            let v: Vec<f64> = rs.iter().map(|r| r.mean_speed_mph).collect();
            let a: Vec<f64> = rs.iter().filter_map(|r| r.mean_accel_ms2).collect();
            let p = |q| percentile(&v, q).expect("group is not empty");
            SpeedStats {
                direction: *dir,
                class: cls.clone(),
                vehicles: rs.len(),
                speed_min: p(0.0),
                speed_p25: p(25.0),
                speed_median: p(50.0),
                speed_p75: p(75.0),
                speed_max: p(100.0),
                accel_mean: arithmetic_mean(&a).ok(),
                accel_median: percentile(&a, 50.0).ok(),
            }
        })
        .collect();

    let error_rates = real.map(|real| {
        real.iter()
            .map(|rc| {
                let estimated = groups.get(&(rc.direction, rc.class.clone())).map_or(0, |g| g.len()) as u64;
                ErrorRateRow {
                    direction: rc.direction,
                    class: rc.class.clone(),
                    real: rc.real_count,
                    estimated,
                    error_rate_pct: error_rate(estimated, rc.real_count).ok(),
                }
            })
            .collect()
    });

    SceneSummary { duration_s, vehicles: records.len(), counts, directions, speed_stats, error_rates }
}

/// Counts per bin; each entry is `(bin start, count)`, ascending.
pub fn histogram(values: &[f64], bin: f64) -> Vec<(f64, usize)> {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for &v in values.iter().filter(|v| v.is_finite()) {
        *bins.entry((v / bin).floor() as i64).or_default() += 1;
    }
    bins.into_iter().map(|(k, c)| (k as f64 * bin, c)).collect()
}
