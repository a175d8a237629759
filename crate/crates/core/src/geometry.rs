//! Planar projective geometry in homogeneous coordinates.
//!
//! Homography estimation uses the normalized direct linear transform: both
//! point sets are conditioned (centroid at the origin, mean distance √2), the
//! stacked 2n×9 system `A h = 0` is solved by SVD, and the result is mapped
//! back through the conditioning transforms.
//!
//! All homographies are stored in a canonical form where the entry of largest
//! magnitude equals `+1`.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Denominators (and homogeneous `z` values) below this are treated as zero.
pub const INFINITY_EPS: f64 = 1e-12;
/// Condition number above which a homography counts as singular.
pub const MAX_CONDITION: f64 = 1e12;
/// Normalized triangle area under which three points count as collinear.
pub const COLLINEAR_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least 4 correspondences, got {0}")]
    InsufficientPairs(usize),
    #[error("degenerate correspondence configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("point maps to the line at infinity")]
    AtInfinity,
    #[error("homography is singular (condition estimate {0:e})")]
    Singular(f64),
    #[error("lines are parallel")]
    Parallel,
    #[error("line segment endpoints coincide")]
    DegenerateSegment,
    #[error("degenerate region of interest: {0}")]
    Degenerate(String),
    #[error("non-finite input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// A point in the original camera image, in pixels (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

/// A point in the bird's-eye-view plane, in BEV pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BevPoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl BevPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &BevPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub src: ImagePoint,
    pub dst: BevPoint,
}

impl Correspondence {
    pub const fn new(src: ImagePoint, dst: BevPoint) -> Self {
        Self { src, dst }
    }
}

/// 3×3 projective map from the image plane to the BEV plane (or back, for an
/// inverted instance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    /// Wraps a raw matrix, normalizing it to the canonical representative.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let cond = condition_number(&m);
        if !(cond <= MAX_CONDITION) {
            return Err(GeometryError::Singular(cond));
        }
        Ok(Self { m: normalize(m) })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// Maps raw coordinates with perspective division.
    pub fn map(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let m = &self.m;
        let den = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
        if den.abs() < INFINITY_EPS {
            return Err(GeometryError::AtInfinity);
        }
        let u = (m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)]) / den;
        let v = (m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)]) / den;
        Ok((u, v))
    }

    pub fn apply_point(&self, p: ImagePoint) -> Result<BevPoint> {
        self.map(p.x, p.y).map(|(x, y)| BevPoint { x, y })
    }

    /// Maps a BEV point back to the image; `self` must be a BEV→image map.
    pub fn apply_bev(&self, p: BevPoint) -> Result<ImagePoint> {
        self.map(p.x, p.y).map(|(x, y)| ImagePoint { x, y })
    }

    pub fn invert(&self) -> Result<Homography> {
        let cond = condition_number(&self.m);
        if !(cond <= MAX_CONDITION) {
            return Err(GeometryError::Singular(cond));
        }
        let inv = self
            .m
            .try_inverse()
            .ok_or(GeometryError::Singular(f64::INFINITY))?;
        Ok(Self { m: normalize(inv) })
    }

    /// Jacobian of the mapping at `(x, y)`: rows are d(u, v), columns d(x, y).
    pub fn jacobian(&self, x: f64, y: f64) -> Result<Matrix2<f64>> {
        let m = &self.m;
        let den = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
        if den.abs() < INFINITY_EPS {
            return Err(GeometryError::AtInfinity);
        }
        let nu = m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)];
        let nv = m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)];
        let d2 = den * den;
        Ok(Matrix2::new(
            (m[(0, 0)] * den - nu * m[(2, 0)]) / d2,
            (m[(0, 1)] * den - nu * m[(2, 1)]) / d2,
            (m[(1, 0)] * den - nv * m[(2, 0)]) / d2,
            (m[(1, 1)] * den - nv * m[(2, 1)]) / d2,
        ))
    }
}

fn normalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let mut pivot = 0.0_f64;
    for v in m.iter() {
        if v.abs() > pivot.abs() {
            pivot = *v;
        }
    }
    m / pivot
}

fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Similarity transform moving the centroid to the origin and scaling the
/// mean distance from it to √2.
fn conditioning(points: &[(f64, f64)]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| (p.0 - cx).hypot(p.1 - cy))
        .sum::<f64>()
        / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(GeometryError::DegenerateConfiguration(
            "all points coincide".into(),
        ));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn transform(t: &Matrix3<f64>, p: (f64, f64)) -> (f64, f64) {
    let v = t * Vector3::new(p.0, p.1, 1.0);
    (v.x / v.z, v.y / v.z)
}

fn triangle_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)).abs()
}

fn has_collinear_triple(points: &[(f64, f64)]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if triangle_area(points[i], points[j], points[k]) < COLLINEAR_EPS {
                    return true;
                }
            }
        }
    }
    false
}

/// Least-squares homography from ≥4 correspondences (normalized DLT).
pub fn estimate_homography(pairs: &[Correspondence]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(GeometryError::InsufficientPairs(pairs.len()));
    }
    let finite = pairs
        .iter()
        .all(|p| p.src.x.is_finite() && p.src.y.is_finite() && p.dst.x.is_finite() && p.dst.y.is_finite());
    if !finite {
        return Err(GeometryError::NonFinite);
    }
    let src: Vec<(f64, f64)> = pairs.iter().map(|p| (p.src.x, p.src.y)).collect();
    let dst: Vec<(f64, f64)> = pairs.iter().map(|p| (p.dst.x, p.dst.y)).collect();
    let t_src = conditioning(&src)?;
    let t_dst = conditioning(&dst)?;
    let src_n: Vec<_> = src.iter().map(|&p| transform(&t_src, p)).collect();
    let dst_n: Vec<_> = dst.iter().map(|&p| transform(&t_dst, p)).collect();

    if pairs.len() == 4 && (has_collinear_triple(&src_n) || has_collinear_triple(&dst_n)) {
        return Err(GeometryError::DegenerateConfiguration(
            "three of the four points are collinear".into(),
        ));
    }

    // Pad with zero rows so the SVD always yields all 9 right singular vectors.
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src_n.iter().zip(&dst_n).enumerate() {
        let (xs, ys) = *s;
        let (xd, yd) = *d;
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[xs, ys, 1.0, 0.0, 0.0, 0.0, -xd * xs, -xd * ys, -xd]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, xs, ys, 1.0, -yd * xs, -yd * ys, -yd]);
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| GeometryError::DegenerateConfiguration("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let s_max = svd.singular_values[order[order.len() - 1]];
    let s_second = svd.singular_values[order[1]];
    if s_second <= 1e-10 * s_max {
        return Err(GeometryError::DegenerateConfiguration(
            "more than one vanishing singular value".into(),
        ));
    }
    let h = v_t.row(order[0]);
    let h_n = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| GeometryError::DegenerateConfiguration("conditioning".into()))?;
    let m = t_dst_inv * h_n * t_src;
    Homography::from_matrix(m).map_err(|e| match e {
        GeometryError::Singular(_) => {
            GeometryError::DegenerateConfiguration("estimated map is singular".into())
        }
        other => other,
    })
}

pub fn apply_point(h: &Homography, p: ImagePoint) -> Result<BevPoint> {
    h.apply_point(p)
}

pub fn invert(h: &Homography) -> Result<Homography> {
    h.invert()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSeg {
    p0: ImagePoint,
    p1: ImagePoint,
}

impl LineSeg {
    pub fn new(p0: ImagePoint, p1: ImagePoint) -> Result<Self> {
        if ![p0.x, p0.y, p1.x, p1.y].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if p0 == p1 {
            return Err(GeometryError::DegenerateSegment);
        }
        Ok(Self { p0, p1 })
    }

    pub fn p0(&self) -> ImagePoint {
        self.p0
    }

    pub fn p1(&self) -> ImagePoint {
        self.p1
    }

    /// Homogeneous line coefficients scaled so that `(a, b)` has unit norm.
    fn coefficients(&self) -> Vector3<f64> {
        let l = Vector3::new(self.p0.x, self.p0.y, 1.0).cross(&Vector3::new(self.p1.x, self.p1.y, 1.0));
        l / l.x.hypot(l.y)
    }

    /// x coordinate where the infinite line crosses the horizontal `y`.
    fn x_at(&self, y: f64) -> Option<f64> {
        let dy = self.p1.y - self.p0.y;
        if dy.abs() < INFINITY_EPS {
            return None;
        }
        let t = (y - self.p0.y) / dy;
        Some(self.p0.x + t * (self.p1.x - self.p0.x))
    }
}

pub fn intersect_lines(l1: &LineSeg, l2: &LineSeg) -> Result<ImagePoint> {
    let x = l1.coefficients().cross(&l2.coefficients());
    if x.z.abs() < INFINITY_EPS {
        return Err(GeometryError::Parallel);
    }
    Ok(ImagePoint::new(x.x / x.z, x.y / x.z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Second vanishing point on the same (horizontal) horizon, placed two image
/// widths from the first.
pub fn second_vanishing_point(vp1: ImagePoint, image_width: f64, side: Side) -> ImagePoint {
    let offset = 2.0 * image_width;
    match side {
        Side::Left => ImagePoint::new(vp1.x - offset, vp1.y),
        Side::Right => ImagePoint::new(vp1.x + offset, vp1.y),
    }
}

/// Road region in the image, ordered near-left, near-right, far-right,
/// far-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiQuad {
    pub a: ImagePoint,
    pub b: ImagePoint,
    pub c: ImagePoint,
    pub d: ImagePoint,
}

impl RoiQuad {
    pub fn new(a: ImagePoint, b: ImagePoint, c: ImagePoint, d: ImagePoint) -> Result<Self> {
        let q = Self { a, b, c, d };
        let scale = q
            .corners()
            .iter()
            .flat_map(|p| [p.x.abs(), p.y.abs()])
            .fold(1.0_f64, f64::max);
        if q.signed_area().abs() <= COLLINEAR_EPS * scale * scale {
            return Err(GeometryError::Degenerate("zero area".into()));
        }
        if segments_cross(a, b, c, d) || segments_cross(b, c, d, a) {
            return Err(GeometryError::Degenerate("self-intersecting".into()));
        }
        Ok(q)
    }

    pub fn corners(&self) -> [ImagePoint; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Shoelace area; sign follows corner orientation.
    pub fn signed_area(&self) -> f64 {
        let c = self.corners();
        let mut s = 0.0;
        for i in 0..4 {
            let p = c[i];
            let q = c[(i + 1) % 4];
            s += p.x * q.y - q.x * p.y;
        }
        0.5 * s
    }

    /// Correspondences onto a `length × width` BEV rectangle. Travel runs along
    /// BEV x (near edge at x = 0); the near-left corner maps to the origin.
    pub fn bev_correspondences(&self, bev_length: f64, bev_width: f64) -> [Correspondence; 4] {
        [
            Correspondence::new(self.a, BevPoint::new(0.0, 0.0)),
            Correspondence::new(self.b, BevPoint::new(0.0, bev_width)),
            Correspondence::new(self.c, BevPoint::new(bev_length, bev_width)),
            Correspondence::new(self.d, BevPoint::new(bev_length, 0.0)),
        ]
    }
}

fn orient(a: ImagePoint, b: ImagePoint, c: ImagePoint) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Proper crossing of segments p1p2 and p3p4 (shared endpoints excluded).
fn segments_cross(p1: ImagePoint, p2: ImagePoint, p3: ImagePoint, p4: ImagePoint) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Quad bounded by two road boundary lines and two horizontal scanlines.
pub fn roi_quad(left: &LineSeg, right: &LineSeg, near_y: f64, far_y: f64) -> Result<RoiQuad> {
    if !(near_y.is_finite() && far_y.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    if near_y <= far_y {
        return Err(GeometryError::Degenerate(
            "near scanline must lie below the far scanline".into(),
        ));
    }
    let horizontal = || GeometryError::Degenerate("boundary line is horizontal".into());
    let a = ImagePoint::new(left.x_at(near_y).ok_or_else(horizontal)?, near_y);
    let b = ImagePoint::new(right.x_at(near_y).ok_or_else(horizontal)?, near_y);
    let c = ImagePoint::new(right.x_at(far_y).ok_or_else(horizontal)?, far_y);
    let d = ImagePoint::new(left.x_at(far_y).ok_or_else(horizontal)?, far_y);
    let tol = 1e-9 * (1.0 + a.x.abs().max(b.x.abs()).max(c.x.abs()).max(d.x.abs()));
    if b.x - a.x <= tol {
        return Err(GeometryError::Degenerate("near edge has no width".into()));
    }
    if c.x - d.x <= tol {
        return Err(GeometryError::Degenerate("far edge has no width".into()));
    }
    RoiQuad::new(a, b, c, d)
}

/// Near and far scanlines used when the scene gives none: the image bottom,
/// and halfway between the vanishing point and the bottom.
pub fn default_scanlines(left: &LineSeg, right: &LineSeg, image_height: f64) -> Result<(f64, f64)> {
    let vp = intersect_lines(left, right)?;
    Ok((image_height, 0.5 * (vp.y + image_height)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> ImagePoint {
        ImagePoint::new(x, y)
    }

    fn pair(sx: f64, sy: f64, dx: f64, dy: f64) -> Correspondence {
        Correspondence::new(p(sx, sy), BevPoint::new(dx, dy))
    }

    fn assert_mat_close(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn identity_pairs_give_identity() {
        let pairs = [
            pair(0.0, 0.0, 0.0, 0.0),
            pair(1.0, 0.0, 1.0, 0.0),
            pair(0.0, 1.0, 0.0, 1.0),
            pair(1.0, 1.0, 1.0, 1.0),
        ];
        let h = estimate_homography(&pairs).unwrap();
        assert_mat_close(h.matrix(), &Matrix3::identity(), 1e-12);
    }

    #[test]
    fn translation_pairs() {
        let pairs: Vec<_> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
            .iter()
            .map(|&(x, y)| pair(x, y, x + 5.0, y + 3.0))
            .collect();
        let h = estimate_homography(&pairs).unwrap();
        let expected = normalize(Matrix3::new(1.0, 0.0, 5.0, 0.0, 1.0, 3.0, 0.0, 0.0, 1.0));
        assert_mat_close(h.matrix(), &expected, 1e-12);
    }

    #[test]
    fn too_few_pairs() {
        let pairs = [pair(0.0, 0.0, 0.0, 0.0); 3];
        assert_eq!(
            estimate_homography(&pairs),
            Err(GeometryError::InsufficientPairs(3))
        );
    }

    #[test]
    fn collinear_source_points_rejected() {
        let pairs = [
            pair(0.0, 0.0, 0.0, 0.0),
            pair(1.0, 0.0, 1.0, 0.0),
            pair(2.0, 0.0, 0.0, 1.0),
            pair(1.0, 1.0, 1.0, 1.0),
        ];
        assert!(matches!(
            estimate_homography(&pairs),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn duplicate_points_rejected() {
        let pairs = [pair(1.0, 1.0, 2.0, 2.0); 6];
        assert!(matches!(
            estimate_homography(&pairs),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn apply_point_examples() {
        let id = Homography::identity();
        assert_eq!(id.apply_point(p(3.0, 4.0)).unwrap(), BevPoint::new(3.0, 4.0));

        let scale = Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let q = scale.apply_point(p(1.0, 1.0)).unwrap();
        assert!((q.x - 2.0).abs() < 1e-12 && (q.y - 2.0).abs() < 1e-12);

        let persp = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.1, 0.0, 1.0]]).unwrap();
        let q = persp.apply_point(p(1.0, 0.0)).unwrap();
        assert!((q.x - 1.0 / 1.1).abs() < 1e-15);
        assert_eq!(q.y, 0.0);
    }

    #[test]
    fn apply_point_at_infinity() {
        let h = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(h.apply_point(p(-1.0, 5.0)), Err(GeometryError::AtInfinity));
    }

    #[test]
    fn invert_examples() {
        let id = Homography::identity();
        assert_mat_close(id.invert().unwrap().matrix(), &Matrix3::identity(), 0.0);

        let s = Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let expected = normalize(Matrix3::new(0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0));
        assert_mat_close(s.invert().unwrap().matrix(), &expected, 1e-15);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0);
        assert!(matches!(Homography::from_matrix(m), Err(GeometryError::Singular(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let h = Homography::from_rows([[1.2, 0.1, 5.0], [0.05, 0.9, -3.0], [0.001, 0.002, 1.0]]).unwrap();
        let (x, y) = (40.0, 25.0);
        let j = h.jacobian(x, y).unwrap();
        let e = 1e-5;
        let (u1, v1) = h.map(x + e, y).unwrap();
        let (u0, v0) = h.map(x - e, y).unwrap();
        assert!((j[(0, 0)] - (u1 - u0) / (2.0 * e)).abs() < 1e-7);
        assert!((j[(1, 0)] - (v1 - v0) / (2.0 * e)).abs() < 1e-7);
        let (u1, v1) = h.map(x, y + e).unwrap();
        let (u0, v0) = h.map(x, y - e).unwrap();
        assert!((j[(0, 1)] - (u1 - u0) / (2.0 * e)).abs() < 1e-7);
        assert!((j[(1, 1)] - (v1 - v0) / (2.0 * e)).abs() < 1e-7);
    }

    #[test]
    fn intersect_examples() {
        let xaxis = LineSeg::new(p(-1.0, 0.0), p(1.0, 0.0)).unwrap();
        let yaxis = LineSeg::new(p(0.0, -1.0), p(0.0, 1.0)).unwrap();
        let o = intersect_lines(&xaxis, &yaxis).unwrap();
        assert!(o.x.abs() < 1e-15 && o.y.abs() < 1e-15);

        let d1 = LineSeg::new(p(0.0, 0.0), p(1.0, 1.0)).unwrap();
        let d2 = LineSeg::new(p(0.0, 1.0), p(1.0, 0.0)).unwrap();
        let c = intersect_lines(&d1, &d2).unwrap();
        assert!((c.x - 0.5).abs() < 1e-15 && (c.y - 0.5).abs() < 1e-15);

        let h1 = LineSeg::new(p(0.0, 0.0), p(10.0, 0.0)).unwrap();
        let h2 = LineSeg::new(p(0.0, 5.0), p(10.0, 5.0)).unwrap();
        assert_eq!(intersect_lines(&h1, &h2), Err(GeometryError::Parallel));
    }

    #[test]
    fn degenerate_segment() {
        assert_eq!(
            LineSeg::new(p(1.0, 1.0), p(1.0, 1.0)),
            Err(GeometryError::DegenerateSegment)
        );
    }

    #[test]
    fn second_vanishing_point_examples() {
        assert_eq!(
            second_vanishing_point(p(160.0, 80.0), 320.0, Side::Right),
            p(800.0, 80.0)
        );
        assert_eq!(
            second_vanishing_point(p(0.0, 0.0), 100.0, Side::Left),
            p(-200.0, 0.0)
        );
    }

    #[test]
    fn roi_quad_from_converging_lines() {
        let left = LineSeg::new(p(100.0, 240.0), p(160.0, 80.0)).unwrap();
        let right = LineSeg::new(p(220.0, 240.0), p(160.0, 80.0)).unwrap();
        let q = roi_quad(&left, &right, 240.0, 160.0).unwrap();
        let expected = [p(100.0, 240.0), p(220.0, 240.0), p(190.0, 160.0), p(130.0, 160.0)];
        for (got, want) in q.corners().iter().zip(expected.iter()) {
            assert!(got.distance(want) < 1e-9, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn roi_quad_far_edge_at_vanishing_point() {
        let left = LineSeg::new(p(100.0, 240.0), p(160.0, 80.0)).unwrap();
        let right = LineSeg::new(p(220.0, 240.0), p(160.0, 80.0)).unwrap();
        assert!(matches!(
            roi_quad(&left, &right, 240.0, 80.0),
            Err(GeometryError::Degenerate(_))
        ));
    }

    #[test]
    fn roi_quad_rectangle() {
        let left = LineSeg::new(p(0.0, 0.0), p(0.0, 10.0)).unwrap();
        let right = LineSeg::new(p(20.0, 0.0), p(20.0, 10.0)).unwrap();
        let q = roi_quad(&left, &right, 10.0, 0.0).unwrap();
        assert_eq!(q.corners(), [p(0.0, 10.0), p(20.0, 10.0), p(20.0, 0.0), p(0.0, 0.0)]);
    }

    #[test]
    fn roi_quad_crossing_lines_rejected() {
        // Boundaries cross between the scanlines.
        let left = LineSeg::new(p(0.0, 100.0), p(100.0, 0.0)).unwrap();
        let right = LineSeg::new(p(100.0, 100.0), p(0.0, 0.0)).unwrap();
        assert!(roi_quad(&left, &right, 100.0, 0.0).is_err());
    }

    #[test]
    fn self_intersecting_quad_rejected() {
        let r = RoiQuad::new(p(0.0, 0.0), p(10.0, 10.0), p(10.0, 0.0), p(0.0, 10.0));
        assert!(matches!(r, Err(GeometryError::Degenerate(_))));
    }

    #[test]
    fn default_scanlines_midpoint() {
        let left = LineSeg::new(p(100.0, 240.0), p(160.0, 80.0)).unwrap();
        let right = LineSeg::new(p(220.0, 240.0), p(160.0, 80.0)).unwrap();
        let (near, far) = default_scanlines(&left, &right, 240.0).unwrap();
        assert_eq!(near, 240.0);
        assert!((far - 160.0).abs() < 1e-9);
    }
}
