use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::{Result, TrackingError};
use crate::geometry::BevPoint;

/// Noise model for the constant-velocity filter (BEV px units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanParams {
    /// Diagonal of Q for (cx, cy, vx, vy).
    pub process_noise: [f64; 4],
    /// Diagonal of R for (cx, cy).
    pub measurement_noise: [f64; 2],
    pub initial_velocity_var: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            process_noise: [1.0, 1.0, 4.0, 4.0],
            measurement_noise: [4.0, 4.0],
            initial_velocity_var: 100.0,
        }
    }
}

/// State `(cx, cy, vx, vy)` with velocity in BEV px per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl KalmanState {
    /// Fresh state at a measured position with zero velocity.
    pub fn initiate(z: BevPoint, params: &KalmanParams) -> Self {
        let r = params.measurement_noise;
        let v = params.initial_velocity_var;
        Self {
            mean: Vector4::new(z.x, z.y, 0.0, 0.0),
            cov: Matrix4::from_diagonal(&Vector4::new(r[0], r[1], v, v)),
        }
    }

    pub fn position(&self) -> BevPoint {
        BevPoint::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[2], self.mean[3])
    }
}

fn transition() -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = 1.0;
    f[(1, 3)] = 1.0;
    f
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// One constant-velocity step.
pub fn kf_predict(s: &KalmanState, params: &KalmanParams) -> KalmanState {
    let f = transition();
    let q = Matrix4::from_diagonal(&Vector4::from(params.process_noise));
    KalmanState {
        mean: f * s.mean,
        cov: symmetrize(f * s.cov * f.transpose() + q),
    }
}

/// Position measurement update (Joseph form).
pub fn kf_update(s: &KalmanState, z: BevPoint, params: &KalmanParams) -> Result<KalmanState> {
    let h = observation();
    let r = Matrix2::from_diagonal(&Vector2::from(params.measurement_noise));
    let innovation_cov = h * s.cov * h.transpose() + r;
    let det = innovation_cov.determinant();
    if !det.is_finite() || det.abs() < 1e-300 {
        return Err(TrackingError::NumericallySingular);
    }
    let s_inv = innovation_cov
        .try_inverse()
        .ok_or(TrackingError::NumericallySingular)?;
    let gain = s.cov * h.transpose() * s_inv;
    let residual = Vector2::new(z.x, z.y) - h * s.mean;
    let mean = s.mean + gain * residual;
    let i_kh = Matrix4::identity() - gain * h;
    let cov = i_kh * s.cov * i_kh.transpose() + gain * r * gain.transpose();
    if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
        return Err(TrackingError::NumericallySingular);
    }
    Ok(KalmanState { mean, cov: symmetrize(cov) })
}
