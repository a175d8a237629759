use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, Direction, Result};

/// Count bucket: direction, class and lane.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CountKey {
    pub direction: Direction,
    pub cls: String,
    pub lane: u32,
}

pub type CountTable = BTreeMap<CountKey, usize>;

/// Percentage error of an estimated count, rounded half away from zero to two
/// decimals.
pub fn error_rate(estimated: u64, real: u64) -> Result<f64> {
    if real == 0 {
        return Err(AnalyticsError::ZeroDenominator);
    }
    let pct = 100.0 * estimated.abs_diff(real) as f64 / real as f64;
    Ok((pct * 100.0).round() / 100.0)
}

pub fn arithmetic_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn harmonic_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(AnalyticsError::ZeroSpeed);
    }
    let inv: f64 = values.iter().map(|v| 1.0 / v).sum();
    Ok(values.len() as f64 / inv)
}

/// Harmonic mean of per-vehicle mean speeds.
pub fn space_mean_speed(speeds: &[f64]) -> Result<f64> {
    harmonic_mean(speeds)
}

/// Linear-interpolated percentile, `q` in `[0, 100]`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 100.0) / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}
