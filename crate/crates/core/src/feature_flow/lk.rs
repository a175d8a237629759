use serde::{Deserialize, Serialize};

use super::{FeaturePoint, FlowError, GrayFrame, Plane, Result};
use crate::geometry::ImagePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LkConfig {
    /// Odd window side length.
    pub window: usize,
    pub levels: usize,
    pub max_iters: usize,
    /// Stop once the update is smaller than this, in pixels.
    pub epsilon: f64,
    /// Minimum smaller eigenvalue of the structure tensor per window pixel.
    pub min_eig_per_px: f64,
}

impl Default for LkConfig {
    fn default() -> Self {
        Self { window: 15, levels: 3, max_iters: 30, epsilon: 0.01, min_eig_per_px: 1e-4 }
    }
}

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Binomial blur then 2× decimation.
fn pyr_down(p: &Plane) -> Plane {
    let mut tmp = Plane::zeros(p.w, p.h);
    for y in 0..p.h {
        for x in 0..p.w {
            let v: f64 = (0..5).map(|k| BINOMIAL[k] * p.at(x as isize + k as isize - 2, y as isize)).sum();
            tmp.set(x, y, v);
        }
    }
    let (w, h) = (p.w.div_ceil(2), p.h.div_ceil(2));
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = (2 * x as isize, 2 * y as isize);
            let v: f64 = (0..5).map(|k| BINOMIAL[k] * tmp.at(sx, sy + k as isize - 2)).sum();
            out.set(x, y, v);
        }
    }
    out
}

fn pyramid(f: &GrayFrame, levels: usize) -> Vec<Plane> {
    let mut out = vec![Plane::from_frame(f)];
    while out.len() < levels.max(1) {
        let next = pyr_down(out.last().unwrap());
        if next.w < 2 || next.h < 2 {
            break;
        }
        out.push(next);
    }
    out
}

/// Central-difference gradients.
fn gradients(p: &Plane) -> (Plane, Plane) {
    let mut gx = Plane::zeros(p.w, p.h);
    let mut gy = Plane::zeros(p.w, p.h);
    for y in 0..p.h {
        for x in 0..p.w {
            let (xi, yi) = (x as isize, y as isize);
            gx.set(x, y, 0.5 * (p.at(xi + 1, yi) - p.at(xi - 1, yi)));
            gy.set(x, y, 0.5 * (p.at(xi, yi + 1) - p.at(xi, yi - 1)));
        }
    }
    (gx, gy)
}

struct Level {
    prev: Plane,
    next: Plane,
    gx: Plane,
    gy: Plane,
}

/// Refines the flow `guess` of point `p` on one level. `None` when the
/// window has too little texture.
fn track_level(lv: &Level, p: (f64, f64), guess: (f64, f64), cfg: &LkConfig) -> Option<(f64, f64)> {
    let r = (cfg.window / 2) as isize;
    let area = (cfg.window * cfg.window) as f64;
    let mut samples = Vec::with_capacity(cfg.window * cfg.window);
    let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (p.0 + dx as f64, p.1 + dy as f64);
            let ix = lv.gx.bilinear(x, y);
            let iy = lv.gy.bilinear(x, y);
            gxx += ix * ix;
            gxy += ix * iy;
            gyy += iy * iy;
            samples.push((x, y, lv.prev.bilinear(x, y), ix, iy));
        }
    }
    let tr = gxx + gyy;
    let det = gxx * gyy - gxy * gxy;
    let min_eig = 0.5 * (tr - ((gxx - gyy).powi(2) + 4.0 * gxy * gxy).sqrt());
    if !(min_eig >= cfg.min_eig_per_px * area) || det <= 0.0 {
        return None;
    }
    let mut v = (0.0, 0.0);
    for _ in 0..cfg.max_iters {
        let (mut bx, mut by) = (0.0, 0.0);
        for &(x, y, i0, ix, iy) in &samples {
            let di = i0 - lv.next.bilinear(x + guess.0 + v.0, y + guess.1 + v.1);
            bx += di * ix;
            by += di * iy;
        }
        let eta = ((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
        v = (v.0 + eta.0, v.1 + eta.1);
        if eta.0.hypot(eta.1) < cfg.epsilon {
            break;
        }
    }
    Some((guess.0 + v.0, guess.1 + v.1))
}

/// Tracks points from `prev` to `next`. Each result is the new position and
/// whether tracking succeeded.
pub fn lk_track(
    prev: &GrayFrame,
    next: &GrayFrame,
    pts: &[FeaturePoint],
    cfg: &LkConfig,
) -> Result<Vec<(ImagePoint, bool)>> {
    if prev.width != next.width || prev.height != next.height {
        return Err(FlowError::DimensionMismatch(prev.width, prev.height, next.width, next.height));
    }
    let pp = pyramid(prev, cfg.levels);
    let np = pyramid(next, cfg.levels);
    let levels: Vec<Level> = pp
        .into_iter()
        .zip(np)
        .map(|(prev, next)| {
            let (gx, gy) = gradients(&prev);
            Level { prev, next, gx, gy }
        })
        .collect();

    let (w, h) = (prev.width as f64, prev.height as f64);
    Ok(pts
        .iter()
        .map(|fp| {
            let p = fp.pos;
            let mut g = (0.0, 0.0);
            let mut ok = true;
            for (l, lv) in levels.iter().enumerate().rev() {
                let s = (1u64 << l) as f64;
                match track_level(lv, (p.x / s, p.y / s), g, cfg) {
                    Some(d) if l > 0 => g = (2.0 * d.0, 2.0 * d.1),
                    Some(d) => g = d,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            let q = ImagePoint::new(p.x + g.0, p.y + g.1);
            let inside = q.x >= 0.0 && q.y >= 0.0 && q.x <= w - 1.0 && q.y <= h - 1.0;
            if ok && inside && q.x.is_finite() && q.y.is_finite() {
                (q, true)
            } else {
                (p, false)
            }
        })
        .collect())
}
