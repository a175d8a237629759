use serde::{Deserialize, Serialize};

use super::{FeaturePoint, GrayFrame, Plane};
use crate::geometry::ImagePoint;
use crate::tracking::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarrisConfig {
    pub k: f64,
    /// Corners weaker than this fraction of the strongest are dropped.
    pub quality_level: f64,
}

impl Default for HarrisConfig {
    fn default() -> Self {
        Self { k: 0.04, quality_level: 0.01 }
    }
}

/// Harris response `det(M) − k·trace(M)²` for every pixel of the region
/// `[x0, x1) × [y0, y1)`, with a one-pixel ring around it for suppression.
struct Response {
    x0: isize,
    y0: isize,
    w: usize,
    h: usize,
    r: Vec<f64>,
}

impl Response {
    fn get(&self, x: isize, y: isize) -> f64 {
        let (i, j) = (x - self.x0, y - self.y0);
        if i < 0 || j < 0 || i >= self.w as isize || j >= self.h as isize {
            return f64::NEG_INFINITY;
        }
        self.r[j as usize * self.w + i as usize]
    }
}

fn response(img: &Plane, x0: isize, y0: isize, x1: isize, y1: isize, k: f64) -> Response {
    // Gradients on the region grown by the 3×3 smoothing radius.
    let (gx0, gy0) = (x0 - 1, y0 - 1);
    let (gw, gh) = ((x1 - x0 + 2) as usize, (y1 - y0 + 2) as usize);
    let mut ixx = vec![0.0; gw * gh];
    let mut iyy = vec![0.0; gw * gh];
    let mut ixy = vec![0.0; gw * gh];
    for j in 0..gh {
        for i in 0..gw {
            let (x, y) = (gx0 + i as isize, gy0 + j as isize);
            let p = |dx: isize, dy: isize| img.at(x + dx, y + dy);
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            ixx[j * gw + i] = gx * gx;
            iyy[j * gw + i] = gy * gy;
            ixy[j * gw + i] = gx * gy;
        }
    }
    let w = (x1 - x0) as usize;
    let h = (y1 - y0) as usize;
    let mut r = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for dj in 0..3 {
                for di in 0..3 {
                    let idx = (j + dj) * gw + i + di;
                    a += ixx[idx];
                    b += iyy[idx];
                    c += ixy[idx];
                }
            }
            let (a, b, c) = (a / 9.0, b / 9.0, c / 9.0);
            let tr = a + b;
            r[j * w + i] = a * b - c * c - k * tr * tr;
        }
    }
    Response { x0, y0, w, h, r }
}

/// Vertex offset of the parabola through three samples, within ±0.5.
fn parabolic_offset(l: f64, c: f64, r: f64) -> f64 {
    let den = 2.0 * (2.0 * c - l - r);
    if den.is_finite() && den > 0.0 && l.is_finite() && r.is_finite() {
        ((r - l) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Strongest corners inside `roi` after 3×3 non-maximum suppression.
pub fn harris_corners(f: &GrayFrame, roi: &BBox, max_points: usize, cfg: &HarrisConfig) -> Vec<FeaturePoint> {
    let x0 = roi.x.floor().max(0.0) as isize;
    let y0 = roi.y.floor().max(0.0) as isize;
    let x1 = ((roi.x + roi.w).ceil() as isize).min(f.width as isize);
    let y1 = ((roi.y + roi.h).ceil() as isize).min(f.height as isize);
    if x1 - x0 < 1 || y1 - y0 < 1 || max_points == 0 {
        return Vec::new();
    }
    let img = Plane::from_frame(f);
    // One extra ring so suppression at the roi border sees its neighbours.
    let resp = response(&img, x0 - 1, y0 - 1, x1 + 1, y1 + 1, cfg.k);
    let mut best = 0.0f64;
    for y in y0..y1 {
        for x in x0..x1 {
            best = best.max(resp.get(x, y));
        }
    }
    if best <= 0.0 {
        return Vec::new();
    }
    let floor = cfg.quality_level * best;
    let mut out = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            let v = resp.get(x, y);
            if v <= floor || v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nbr: for dy in -1..=1isize {
                for dx in -1..=1isize {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let q = resp.get(x + dx, y + dy);
                    // Equal neighbours: the first in raster order wins.
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if q > v || (q == v && earlier) {
                        is_max = false;
                        break 'nbr;
                    }
                }
            }
            if is_max {
                let ox = parabolic_offset(resp.get(x - 1, y), v, resp.get(x + 1, y));
                let oy = parabolic_offset(resp.get(x, y - 1), v, resp.get(x, y + 1));
                out.push(FeaturePoint { pos: ImagePoint::new(x as f64 + ox, y as f64 + oy), response: v });
            }
        }
    }
    out.sort_by(|a, b| b.response.total_cmp(&a.response));
    out.truncate(max_points);
    out
}
