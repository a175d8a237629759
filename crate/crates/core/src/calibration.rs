//! Per-camera auto-calibration of BEV pixel displacements.
//!
//! Car boxes grow or shrink as they cross the BEV plane. Regressing box width
//! on BEV x (and height on BEV y) gives the local size of a reference sedan in
//! pixels; its reciprocal is the correction factor stored in two grids, the
//! width layer and the height layer. A displacement `(dxp, dyp)` at a location
//! converts to feet as `ref_length · k_w · dxp` and `ref_height · k_h · dyp`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BevPoint;

pub const CALIBRATION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("need at least {required} calibration samples, found {found}")]
    InsufficientSamples { found: usize, required: usize },
    #[error("samples span {span:.1} px along {axis}, need at least {required:.1} px")]
    InsufficientSpan { axis: char, span: f64, required: f64 },
    #[error("fitted {layer} is not positive at {at:.1} px")]
    NonPositivePrediction { layer: &'static str, at: f64 },
    #[error("point ({x:.2}, {y:.2}) lies outside the calibration grid")]
    OutOfGrid { x: f64, y: f64 },
    #[error("invalid calibration settings: {0}")]
    Settings(String),
    #[error("unsupported calibration schema version {0}")]
    SchemaVersion(u32),
    #[error("calibration document: {0}")]
    Document(String),
}

pub type Result<T> = std::result::Result<T, CalibrationError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSettings {
    pub min_samples: usize,
    /// Required sample spread along each axis, as a fraction of the grid.
    pub min_span_frac: f64,
    /// Polynomial degree of the size regressions (1 or 2).
    pub degree: usize,
    pub cell_px: f64,
    pub ref_length_ft: f64,
    pub ref_height_ft: f64,
    /// Only samples of this class feed the fit.
    pub fit_class: String,
    /// Constant feet-per-pixel scale used when no fit is possible.
    pub fallback_ft_per_px: (f64, f64),
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            min_samples: 30,
            min_span_frac: 0.25,
            degree: 1,
            cell_px: 8.0,
            ref_length_ft: 14.7,
            ref_height_ft: 6.0,
            fit_class: "car".into(),
            fallback_ft_per_px: (1.0, 1.0),
        }
    }
}

impl CalibrationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.degree) {
            return Err(CalibrationError::Settings("degree must be 1 or 2".into()));
        }
        if !(self.cell_px > 0.0) {
            return Err(CalibrationError::Settings("cell_px must be positive".into()));
        }
        if !(self.ref_length_ft > 0.0 && self.ref_height_ft > 0.0) {
            return Err(CalibrationError::Settings("reference dimensions must be positive".into()));
        }
        if !(self.fallback_ft_per_px.0 > 0.0 && self.fallback_ft_per_px.1 > 0.0) {
            return Err(CalibrationError::Settings("fallback scale must be positive".into()));
        }
        Ok(())
    }
}

/// One observed car box on the BEV plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalSample {
    pub center: BevPoint,
    pub w: f64,
    pub h: f64,
    pub cls: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub samples: usize,
    pub rmse_w: f64,
    pub rmse_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    /// ŵ(x) = Σ width_coeffs[i]·xⁱ, in BEV px.
    pub width_coeffs: Vec<f64>,
    /// ĥ(y) = Σ height_coeffs[i]·yⁱ, in BEV px.
    pub height_coeffs: Vec<f64>,
    pub grid: (f64, f64),
    pub cell_px: f64,
    pub ref_length_ft: f64,
    pub ref_height_ft: f64,
    /// Row-major `ny × nx` node values of 1/ŵ.
    pub k_w_grid: Vec<f64>,
    /// Row-major `ny × nx` node values of 1/ĥ.
    pub k_h_grid: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    /// `None` for a constant fallback model.
    pub fit: Option<FitStats>,
}

pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Least-squares polynomial in raw powers of `x`. The design is built on a
/// standardized abscissa and converted back.
fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let design = DMatrix::from_fn(xs.len(), degree + 1, |r, c| ((xs[r] - mean) / scale).powi(c as i32));
    let rhs = DVector::from_column_slice(ys);
    let svd = design.svd(true, true);
    let c = svd.solve(&rhs, 1e-12).expect("SVD with U and V");
    // p(u) with u = (x - mean) / scale, expanded in powers of x.
    let mut raw = vec![0.0; degree + 1];
    for (k, ck) in c.iter().enumerate() {
        let sk = scale.powi(k as i32);
        for (j, r) in raw.iter_mut().enumerate().take(k + 1) {
            *r += ck * binomial(k, j) * (-mean).powi((k - j) as i32) / sk;
        }
    }
    raw
}

fn rmse(coeffs: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (eval_poly(coeffs, *x) - y).powi(2)).sum();
    (sse / xs.len() as f64).sqrt()
}

fn node_count(extent: f64, cell: f64) -> usize {
    (extent / cell).ceil() as usize + 1
}

impl CalibrationModel {
    /// Builds the model and samples both correction layers on the grid.
    pub fn from_coeffs(
        width_coeffs: Vec<f64>,
        height_coeffs: Vec<f64>,
        grid: (f64, f64),
        settings: &CalibrationSettings,
        fit: Option<FitStats>,
    ) -> Result<Self> {
        settings.validate()?;
        if !(grid.0 > 0.0 && grid.1 > 0.0) {
            return Err(CalibrationError::Settings("grid must be positive".into()));
        }
        let cell = settings.cell_px;
        let nx = node_count(grid.0, cell);
        let ny = node_count(grid.1, cell);
        let node = |i: usize| i as f64 * cell;

        let check = |coeffs: &[f64], n: usize, extent: f64, layer: &'static str| -> Result<Vec<f64>> {
            let mut probes: Vec<f64> = (0..n).map(node).collect();
            probes.push(extent);
            if coeffs.len() == 3 && coeffs[2] != 0.0 {
                let vertex = -coeffs[1] / (2.0 * coeffs[2]);
                if (0.0..=extent).contains(&vertex) {
                    probes.push(vertex);
                }
            }
            for &p in &probes {
                let v = eval_poly(coeffs, p);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(CalibrationError::NonPositivePrediction { layer, at: p });
                }
            }
            Ok((0..n).map(|i| 1.0 / eval_poly(coeffs, node(i))).collect())
        };
        let kw_nodes = check(&width_coeffs, nx, grid.0, "width")?;
        let kh_nodes = check(&height_coeffs, ny, grid.1, "height")?;

        let mut k_w_grid = Vec::with_capacity(nx * ny);
        let mut k_h_grid = Vec::with_capacity(nx * ny);
        for &kh in &kh_nodes {
            k_w_grid.extend_from_slice(&kw_nodes);
            k_h_grid.extend(std::iter::repeat_n(kh, nx));
        }
        Ok(Self {
            width_coeffs,
            height_coeffs,
            grid,
            cell_px: cell,
            ref_length_ft: settings.ref_length_ft,
            ref_height_ft: settings.ref_height_ft,
            k_w_grid,
            k_h_grid,
            nx,
            ny,
            fit,
        })
    }

    /// Uniform scale model used when a fit is not possible.
    pub fn constant(grid: (f64, f64), settings: &CalibrationSettings) -> Result<Self> {
        let (fx, fy) = settings.fallback_ft_per_px;
        Self::from_coeffs(
            vec![settings.ref_length_ft / fx],
            vec![settings.ref_height_ft / fy],
            grid,
            settings,
            None,
        )
    }

    pub fn predicted_width(&self, x: f64) -> f64 {
        eval_poly(&self.width_coeffs, x)
    }

    pub fn predicted_height(&self, y: f64) -> f64 {
        eval_poly(&self.height_coeffs, y)
    }

    pub fn contains(&self, p: BevPoint) -> bool {
        let eps = 1e-9;
        p.x >= -eps && p.y >= -eps && p.x <= self.grid.0 + eps && p.y <= self.grid.1 + eps
    }

    /// Nearest point inside the grid.
    pub fn clamp(&self, p: BevPoint) -> BevPoint {
        BevPoint::new(p.x.clamp(0.0, self.grid.0), p.y.clamp(0.0, self.grid.1))
    }

    fn bilinear(&self, layer: &[f64], p: BevPoint) -> f64 {
        let gx = (p.x.clamp(0.0, self.grid.0) / self.cell_px).min((self.nx - 1) as f64);
        let gy = (p.y.clamp(0.0, self.grid.1) / self.cell_px).min((self.ny - 1) as f64);
        let i0 = (gx.floor() as usize).min(self.nx.saturating_sub(2));
        let j0 = (gy.floor() as usize).min(self.ny.saturating_sub(2));
        let i1 = (i0 + 1).min(self.nx - 1);
        let j1 = (j0 + 1).min(self.ny - 1);
        let tx = gx - i0 as f64;
        let ty = gy - j0 as f64;
        let at = |i: usize, j: usize| layer[j * self.nx + i];
        (1.0 - tx) * (1.0 - ty) * at(i0, j0)
            + tx * (1.0 - ty) * at(i1, j0)
            + (1.0 - tx) * ty * at(i0, j1)
            + tx * ty * at(i1, j1)
    }

    pub fn k_w(&self, p: BevPoint) -> Result<f64> {
        if !self.contains(p) {
            return Err(CalibrationError::OutOfGrid { x: p.x, y: p.y });
        }
        Ok(self.bilinear(&self.k_w_grid, p))
    }

    pub fn k_h(&self, p: BevPoint) -> Result<f64> {
        if !self.contains(p) {
            return Err(CalibrationError::OutOfGrid { x: p.x, y: p.y });
        }
        Ok(self.bilinear(&self.k_h_grid, p))
    }

    pub fn to_doc(&self) -> CalibrationDoc {
        CalibrationDoc {
            schema_version: CALIBRATION_SCHEMA_VERSION,
            grid: [self.grid.0, self.grid.1],
            cell_px: self.cell_px,
            ref_length_ft: self.ref_length_ft,
            ref_height_ft: self.ref_height_ft,
            width_coeffs: self.width_coeffs.clone(),
            height_coeffs: self.height_coeffs.clone(),
            source: if self.fit.is_some() { "fit".into() } else { "fallback".into() },
            fit: self.fit,
        }
    }

    pub fn from_doc(doc: &CalibrationDoc) -> Result<Self> {
        if doc.schema_version != CALIBRATION_SCHEMA_VERSION {
            return Err(CalibrationError::SchemaVersion(doc.schema_version));
        }
        let settings = CalibrationSettings {
            cell_px: doc.cell_px,
            ref_length_ft: doc.ref_length_ft,
            ref_height_ft: doc.ref_height_ft,
            degree: doc.width_coeffs.len().max(doc.height_coeffs.len()).saturating_sub(1).max(1),
            ..Default::default()
        };
        Self::from_coeffs(
            doc.width_coeffs.clone(),
            doc.height_coeffs.clone(),
            (doc.grid[0], doc.grid[1]),
            &settings,
            doc.fit,
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_doc()).expect("calibration document serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: CalibrationDoc =
            toml::from_str(text).map_err(|e| CalibrationError::Document(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

/// On-disk form of a calibration model; grids are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDoc {
    pub schema_version: u32,
    pub grid: [f64; 2],
    pub cell_px: f64,
    pub ref_length_ft: f64,
    pub ref_height_ft: f64,
    pub width_coeffs: Vec<f64>,
    pub height_coeffs: Vec<f64>,
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitStats>,
}

/// Regresses car box width on BEV x and height on BEV y.
pub fn fit_calibration(
    samples: &[CalSample],
    grid: (f64, f64),
    settings: &CalibrationSettings,
) -> Result<CalibrationModel> {
    settings.validate()?;
    let cars: Vec<&CalSample> = samples
        .iter()
        .filter(|s| s.cls == settings.fit_class && s.w > 0.0 && s.h > 0.0)
        .collect();
    let required = settings.min_samples.max(settings.degree + 1);
    if cars.len() < required {
        return Err(CalibrationError::InsufficientSamples { found: cars.len(), required });
    }
    let xs: Vec<f64> = cars.iter().map(|s| s.center.x).collect();
    let ys: Vec<f64> = cars.iter().map(|s| s.center.y).collect();
    let ws: Vec<f64> = cars.iter().map(|s| s.w).collect();
    let hs: Vec<f64> = cars.iter().map(|s| s.h).collect();
    let span = |v: &[f64]| {
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    for (axis, values, extent) in [('x', &xs, grid.0), ('y', &ys, grid.1)] {
        let s = span(values);
        let need = settings.min_span_frac * extent;
        if s < need {
            return Err(CalibrationError::InsufficientSpan { axis, span: s, required: need });
        }
    }
    let width_coeffs = polyfit(&xs, &ws, settings.degree);
    let height_coeffs = polyfit(&ys, &hs, settings.degree);
    let stats = FitStats {
        samples: cars.len(),
        rmse_w: rmse(&width_coeffs, &xs, &ws),
        rmse_h: rmse(&height_coeffs, &ys, &hs),
    };
    CalibrationModel::from_coeffs(width_coeffs, height_coeffs, grid, settings, Some(stats))
}

/// Converts a BEV pixel displacement at `at` to feet.
pub fn calibrated_displacement(m: &CalibrationModel, at: BevPoint, dxp: f64, dyp: f64) -> Result<(f64, f64)> {
    let kw = m.k_w(at)?;
    let kh = m.k_h(at)?;
    Ok((m.ref_length_ft * kw * dxp, m.ref_height_ft * kh * dyp))
}
