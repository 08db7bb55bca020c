//! Image-plane geometry of off-nadir views.
//!
//! A building of height `h` seen in an image with pose (θ, φ, s) shows its
//! roof displaced from its footprint by
//!
//! ```text
//! v = h · s · tan θ · (cos φ, sin φ)
//! ```
//!
//! `v` is always the roof→footprint displacement: `footprint = roof + v`.
//! φ is measured from +x toward +y in the y-down pixel frame, and θ is
//! carried as its tangent everywhere.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel displacement.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub dx: f64,
    pub dy: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { dx: 0.0, dy: 0.0 };

    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn norm(self) -> f64 {
        self.dx.hypot(self.dy)
    }

    pub fn l1(self) -> f64 {
        self.dx.abs() + self.dy.abs()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.dx * other.dx + self.dy * other.dy
    }

    pub fn is_finite(self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }

    /// Direction angle in `[0, 2π)`; zero for the null vector.
    pub fn angle(self) -> f64 {
        normalize_angle(self.dy.atan2(self.dx))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.dx + o.dx, self.dy + o.dy)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.dx - o.dx, self.dy - o.dy)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.dx, -self.dy)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.dx * k, self.dy * k)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest angular distance between two directions, in `[0, π]`.
pub fn circular_difference(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    d.min(TAU - d)
}

/// Image-wise viewing geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImagePose {
    /// Tangent of the off-nadir angle.
    pub tan_theta: f64,
    /// Offset angle in `[0, 2π)`.
    pub phi: f64,
    /// Pixels per meter of building height.
    pub scale_s: f64,
}

impl ImagePose {
    pub fn new(tan_theta: f64, phi: f64, scale_s: f64) -> Result<Self> {
        if !tan_theta.is_finite() || tan_theta < 0.0 {
            return Err(Error::invalid(format!(
                "tan_theta must be finite and >= 0, got {tan_theta}"
            )));
        }
        if !phi.is_finite() {
            return Err(Error::invalid(format!("phi must be finite, got {phi}")));
        }
        if !scale_s.is_finite() || scale_s <= 0.0 {
            return Err(Error::invalid(format!(
                "scale_s must be finite and > 0, got {scale_s}"
            )));
        }
        Ok(Self {
            tan_theta,
            phi: normalize_angle(phi),
            scale_s,
        })
    }

    /// Off-nadir angle in radians.
    pub fn theta(&self) -> f64 {
        self.tan_theta.atan()
    }

    /// Unit offset direction `(cos φ, sin φ)`.
    pub fn direction(&self) -> Vec2 {
        Vec2::new(self.phi.cos(), self.phi.sin())
    }
}

impl<'de> Deserialize<'de> for ImagePose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            tan_theta: f64,
            phi: f64,
            scale_s: f64,
        }
        let raw = Raw::deserialize(d)?;
        ImagePose::new(raw.tan_theta, raw.phi, raw.scale_s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn offset(self, v: Vec2) -> Point {
        Point::new(self.x + v.dx, self.y + v.dy)
    }

    pub fn distance(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl Sub for Point {
    type Output = Vec2;
    fn sub(self, o: Point) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// `(b - a) × (c - a)`; positive when `a, b, c` turn from +x toward +y.
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Whether `p` lies on the closed segment `ab`.
pub fn on_segment(a: Point, b: Point, p: Point) -> bool {
    orient(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d)
}

/// Euclidean distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (p - a).dot(ab);
    if t <= 0.0 {
        p.distance(a)
    } else if t >= len2 {
        p.distance(b)
    } else {
        orient(a, b, p).abs() / len2.sqrt()
    }
}

/// Simple polygon with implicit closure.
///
/// Either winding is accepted; positive [`signed_area`](Self::signed_area)
/// (turning from +x toward +y) is the canonical orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    vertices: Vec<Point>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let poly = Self { vertices };
        if poly.signed_area() == 0.0 {
            return Err(Error::InvalidPolygon("zero area".into()));
        }
        if let Some((i, j)) = poly.first_self_intersection() {
            return Err(Error::InvalidPolygon(format!(
                "edges {i} and {j} intersect"
            )));
        }
        Ok(poly)
    }

    /// Builds from `[x0, y0, x1, y1, ...]`.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(2) {
            return Err(Error::InvalidPolygon(format!(
                "odd coordinate count {}",
                coords.len()
            )));
        }
        Self::new(
            coords
                .chunks_exact(2)
                .map(|c| Point::new(c[0], c[1]))
                .collect(),
        )
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area, signed by winding.
    pub fn signed_area(&self) -> f64 {
        let s: f64 = self.edges().map(|(a, b)| a.x * b.y - b.x * a.y).sum();
        0.5 * s
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn is_canonical(&self) -> bool {
        self.signed_area() > 0.0
    }

    /// Same ring with positive signed area.
    pub fn to_canonical(&self) -> Polygon2D {
        if self.is_canonical() {
            self.clone()
        } else {
            let mut v = self.vertices.clone();
            v.reverse();
            Polygon2D { vertices: v }
        }
    }

    /// Even-odd containment; points on the boundary are outside.
    pub fn contains_strict(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(a, b, p) {
                return false;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn first_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        let v = &self.vertices;
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            if a == b {
                return Some((i, i));
            }
            for j in (i + 1)..n {
                let (c, d) = (v[j], v[(j + 1) % n]);
                let adjacent_next = j == i + 1;
                let adjacent_wrap = i == 0 && j == n - 1;
                if adjacent_next || adjacent_wrap {
                    // The shared vertex is expected; the edges must not fold
                    // back over each other beyond it.
                    let folds = if adjacent_next {
                        on_segment(a, b, d) || on_segment(c, d, a)
                    } else {
                        on_segment(a, b, c) || on_segment(c, d, b)
                    };
                    if folds {
                        return Some((i, j));
                    }
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// Axis-aligned box in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max].iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("non-finite bbox coordinate"));
        }
        if x_min > x_max || y_min > y_max {
            return Err(Error::invalid(format!(
                "inverted bbox ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Image rectangle `[0, w] × [0, h]`.
    pub fn image(width: u32, height: u32) -> Self {
        Self {
            x_min: 0.0,
            y_min: 0.0,
            x_max: width as f64,
            y_max: height as f64,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }

    /// Clamps every coordinate into `frame`; the result may be degenerate
    /// when the two boxes do not overlap.
    pub fn clamp_to(&self, frame: &BBox) -> BBox {
        let cx = |x: f64| x.clamp(frame.x_min, frame.x_max);
        let cy = |y: f64| y.clamp(frame.y_min, frame.y_max);
        BBox {
            x_min: cx(self.x_min),
            y_min: cy(self.y_min),
            x_max: cx(self.x_max),
            y_max: cy(self.y_max),
        }
    }

    /// Overlap of two boxes, if it has positive area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            x_min: self.x_min.max(other.x_min),
            y_min: self.y_min.max(other.y_min),
            x_max: self.x_max.min(other.x_max),
            y_max: self.y_max.min(other.y_max),
        };
        (b.x_min < b.x_max && b.y_min < b.y_max).then_some(b)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

/// Roof→footprint offset of a building of height `h` (meters).
pub fn offset_from_pose(h: f64, pose: &ImagePose) -> Result<Vec2> {
    if !h.is_finite() || h < 0.0 {
        return Err(Error::invalid(format!(
            "height must be finite and >= 0, got {h}"
        )));
    }
    let magnitude = h * pose.scale_s * pose.tan_theta;
    Ok(Vec2::new(
        magnitude * pose.phi.cos(),
        magnitude * pose.phi.sin(),
    ))
}

/// Inverts [`offset_from_pose`] for the height. Only the offset magnitude
/// is used.
pub fn height_from_offset(v: Vec2, pose: &ImagePose) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::invalid("non-finite offset"));
    }
    if pose.tan_theta == 0.0 {
        return Err(Error::UnobservableHeight);
    }
    Ok(v.norm() / (pose.scale_s * pose.tan_theta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub pose: ImagePose,
    /// RMS of `‖vᵢ − hᵢ·s·u‖` over the instances.
    pub residual: f64,
    /// Set when every offset is zero and φ is unobservable.
    pub degenerate: bool,
}

/// Least-squares image pose from per-building `(height, offset)` pairs.
///
/// Solves `min_u Σ‖vᵢ − hᵢ·s·u‖²` in closed form, `u = Σ hᵢs·vᵢ / Σ (hᵢs)²`,
/// then reads `tan θ = ‖u‖` and `φ = atan2(u_y, u_x)`.
pub fn estimate_pose(instances: &[(f64, Vec2)], scale_s: f64) -> Result<PoseEstimate> {
    if instances.is_empty() {
        return Err(Error::invalid(
            "pose estimation needs at least one instance",
        ));
    }
    if !scale_s.is_finite() || scale_s <= 0.0 {
        return Err(Error::invalid(format!(
            "scale_s must be > 0, got {scale_s}"
        )));
    }
    let mut num = Vec2::ZERO;
    let mut den = 0.0;
    for (i, &(h, v)) in instances.iter().enumerate() {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::invalid(format!(
                "instance {i}: height must be > 0, got {h}"
            )));
        }
        if !v.is_finite() {
            return Err(Error::invalid(format!("instance {i}: non-finite offset")));
        }
        let w = h * scale_s;
        num = num + v * w;
        den += w * w;
    }
    let u = num * (1.0 / den);
    let tan_theta = u.norm();
    let degenerate = tan_theta == 0.0;
    let phi = if degenerate { 0.0 } else { u.angle() };

    let sq: f64 = instances
        .iter()
        .map(|&(h, v)| {
            let r = v - u * (h * scale_s);
            r.dot(r)
        })
        .sum();
    let residual = (sq / instances.len() as f64).sqrt();

    Ok(PoseEstimate {
        pose: ImagePose::new(tan_theta, phi, scale_s)?,
        residual,
        degenerate,
    })
}

pub fn translate_polygon(p: &Polygon2D, v: Vec2) -> Polygon2D {
    // Translation preserves simplicity and area up to rounding, so the
    // result skips re-validation.
    Polygon2D {
        vertices: p.vertices.iter().map(|q| q.offset(v)).collect(),
    }
}

pub fn bbox_of(p: &Polygon2D) -> BBox {
    let mut b = BBox {
        x_min: f64::INFINITY,
        y_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for q in p.vertices() {
        b.x_min = b.x_min.min(q.x);
        b.y_min = b.y_min.min(q.y);
        b.x_max = b.x_max.max(q.x);
        b.y_max = b.y_max.max(q.y);
    }
    b
}

pub fn bbox_union(a: &BBox, b: &BBox) -> BBox {
    BBox {
        x_min: a.x_min.min(b.x_min),
        y_min: a.y_min.min(b.y_min),
        x_max: a.x_max.max(b.x_max),
        y_max: a.y_max.max(b.y_max),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use proptest::prelude::*;

    use super::*;

    fn pose(t: f64, phi: f64, s: f64) -> ImagePose {
        ImagePose::new(t, phi, s).unwrap()
    }

    fn square(x0: f64, y0: f64, side: f64) -> Polygon2D {
        Polygon2D::from_coords(&[
            (x0, y0),
            (x0 + side, y0),
            (x0 + side, y0 + side),
            (x0, y0 + side),
        ])
        .unwrap()
    }

    #[test]
    fn offset_examples() {
        assert_eq!(
            offset_from_pose(10.0, &pose(0.0, 1.0, 1.0)).unwrap(),
            Vec2::ZERO
        );
        let v = offset_from_pose(20.0, &pose(1.0, 0.0, 2.0)).unwrap();
        assert_eq!(v, Vec2::new(40.0, 0.0));
        let v = offset_from_pose(20.0, &pose(1.0, FRAC_PI_2, 2.0)).unwrap();
        assert!(v.dx.abs() < 1e-12 && (v.dy - 40.0).abs() < 1e-12, "{v:?}");
        assert!(offset_from_pose(-1.0, &pose(1.0, 0.0, 1.0)).is_err());
        assert!(offset_from_pose(f64::NAN, &pose(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn height_examples() {
        assert_eq!(
            height_from_offset(Vec2::new(40.0, 0.0), &pose(1.0, 0.0, 2.0)).unwrap(),
            20.0
        );
        assert_eq!(
            height_from_offset(Vec2::ZERO, &pose(0.5, 0.0, 1.0)).unwrap(),
            0.0
        );
        assert_eq!(
            height_from_offset(Vec2::new(3.0, 4.0), &pose(1.0, 0.0, 1.0)).unwrap(),
            5.0
        );
        assert!(matches!(
            height_from_offset(Vec2::new(1.0, 0.0), &pose(0.0, 0.0, 1.0)),
            Err(Error::UnobservableHeight)
        ));
    }

    #[test]
    fn pose_validation_and_phi_wrap() {
        assert!(ImagePose::new(-0.1, 0.0, 1.0).is_err());
        assert!(ImagePose::new(0.1, 0.0, 0.0).is_err());
        let p = pose(0.5, -FRAC_PI_2, 1.0);
        assert!((p.phi - 1.5 * PI).abs() < 1e-15);
        assert_eq!(pose(0.5, TAU, 1.0).phi, 0.0);
        assert_eq!(normalize_angle(-1e-300), 0.0);
    }

    #[test]
    fn estimate_single_instance_exact() {
        let p = pose(0.8, 2.1, 1.5);
        let v = offset_from_pose(12.0, &p).unwrap();
        let est = estimate_pose(&[(12.0, v)], 1.5).unwrap();
        assert!((est.pose.tan_theta - 0.8).abs() < 1e-12);
        assert!((est.pose.phi - 2.1).abs() < 1e-12);
        assert!(est.residual < 1e-12);
        assert!(!est.degenerate);
    }

    #[test]
    fn estimate_two_instances() {
        let p = pose(0.8, 2.1, 1.5);
        let inst: Vec<_> = [10.0, 30.0]
            .iter()
            .map(|&h| (h, offset_from_pose(h, &p).unwrap()))
            .collect();
        let est = estimate_pose(&inst, 1.5).unwrap();
        assert!((est.pose.tan_theta - 0.8).abs() < 1e-12);
        assert!((est.pose.phi - 2.1).abs() < 1e-12);
        assert!(est.residual < 1e-12);
    }

    #[test]
    fn estimate_degenerate_and_errors() {
        let est = estimate_pose(&[(5.0, Vec2::ZERO), (9.0, Vec2::ZERO)], 1.0).unwrap();
        assert_eq!(est.pose.tan_theta, 0.0);
        assert_eq!(est.pose.phi, 0.0);
        assert!(est.degenerate);
        assert!(estimate_pose(&[], 1.0).is_err());
        assert!(estimate_pose(&[(0.0, Vec2::ZERO)], 1.0).is_err());
        assert!(estimate_pose(&[(1.0, Vec2::ZERO)], 0.0).is_err());
    }

    #[test]
    fn estimate_residual_matches_hand_value() {
        // u = (1*10 + 1*(-10)) / 2 = 0 in x, so both residuals are 10.
        let est = estimate_pose(
            &[(1.0, Vec2::new(10.0, 0.0)), (1.0, Vec2::new(-10.0, 0.0))],
            1.0,
        )
        .unwrap();
        assert!(est.degenerate);
        assert_eq!(est.residual, 10.0);
    }

    #[test]
    fn translate_examples() {
        let sq = square(0.0, 0.0, 2.0);
        assert_eq!(translate_polygon(&sq, Vec2::ZERO), sq);
        let moved = translate_polygon(&sq, Vec2::new(1.0, -1.0));
        assert_eq!(
            moved.to_flat(),
            vec![1.0, -1.0, 3.0, -1.0, 3.0, 1.0, 1.0, 1.0]
        );
        let back = translate_polygon(&moved, Vec2::new(-1.0, 1.0));
        assert_eq!(back, sq);
    }

    #[test]
    fn bbox_examples() {
        let tri = Polygon2D::from_coords(&[(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)]).unwrap();
        assert_eq!(bbox_of(&tri), BBox::new(0.0, 0.0, 4.0, 3.0).unwrap());
        let a = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = BBox::new(2.0, 2.0, 3.0, 3.0).unwrap();
        assert_eq!(bbox_union(&a, &b), BBox::new(0.0, 0.0, 3.0, 3.0).unwrap());
        assert_eq!(bbox_union(&b, &b), b);
        assert!(BBox::new(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn polygon_validation() {
        assert!(Polygon2D::from_flat(&[0.0, 0.0, 1.0, 1.0]).is_err());
        assert!(Polygon2D::from_flat(&[0.0, 0.0, 1.0]).is_err());
        // collinear
        assert!(Polygon2D::from_coords(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).is_err());
        // bow tie
        assert!(Polygon2D::from_coords(&[(0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 2.0)]).is_err());
        // repeated vertex
        assert!(Polygon2D::from_coords(&[(0.0, 0.0), (2.0, 0.0), (2.0, 0.0), (0.0, 2.0)]).is_err());
        // spike folding back on itself
        assert!(Polygon2D::from_coords(&[
            (0.0, 0.0),
            (4.0, 0.0),
            (4.0, 4.0),
            (2.0, 4.0),
            (5.0, 4.0),
            (0.0, 4.0)
        ])
        .is_err());
        // collinear midpoint is fine
        assert!(Polygon2D::from_coords(&[
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (2.0, 2.0),
            (0.0, 2.0)
        ])
        .is_ok());
        let cw = Polygon2D::from_coords(&[(0.0, 0.0), (0.0, 2.0), (2.0, 2.0), (2.0, 0.0)]).unwrap();
        assert_eq!(cw.signed_area(), -4.0);
        assert_eq!(cw.to_canonical().signed_area(), 4.0);
    }

    #[test]
    fn strict_containment() {
        let sq = square(0.0, 0.0, 2.0);
        assert!(sq.contains_strict(Point::new(0.5, 0.5)));
        assert!(!sq.contains_strict(Point::new(2.0, 1.0)));
        assert!(!sq.contains_strict(Point::new(1.0, 0.0)));
        assert!(!sq.contains_strict(Point::new(2.5, 1.0)));
    }

    #[test]
    fn circular_difference_wraps() {
        let d = circular_difference(359f64.to_radians(), 1f64.to_radians());
        assert!((d.to_degrees() - 2.0).abs() < 1e-9);
    }

    fn arb_pose() -> impl Strategy<Value = ImagePose> {
        (1e-3..1.5f64, 0.0..TAU, 0.3..3.0f64).prop_map(|(t, p, s)| pose(t, p, s))
    }

    fn arb_bbox() -> impl Strategy<Value = BBox> {
        (
            -100.0..100.0f64,
            -100.0..100.0f64,
            0.0..50.0f64,
            0.0..50.0f64,
        )
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
    }

    proptest! {
        #[test]
        fn height_round_trip(h in 0.0..200.0f64, p in arb_pose()) {
            let v = offset_from_pose(h, &p).unwrap();
            let back = height_from_offset(v, &p).unwrap();
            prop_assert!((back - h).abs() <= 1e-9 * h.max(1e-300));
        }

        #[test]
        fn offset_magnitude(h in 0.0..200.0f64, p in arb_pose()) {
            let v = offset_from_pose(h, &p).unwrap();
            let expected = h * p.scale_s * p.tan_theta;
            prop_assert!((v.norm() - expected).abs() <= 1e-12 * expected.max(1e-300));
        }

        #[test]
        fn offset_linear_in_height(h in 0.0..100.0f64, p in arb_pose()) {
            let a = offset_from_pose(h, &p).unwrap();
            let b = offset_from_pose(2.0 * h, &p).unwrap();
            prop_assert_eq!(b, a * 2.0);
        }

        #[test]
        fn estimate_recovers_noiseless(p in arb_pose(), hs in prop::collection::vec(1.0..200.0f64, 1..20)) {
            let inst: Vec<_> = hs.iter().map(|&h| (h, offset_from_pose(h, &p).unwrap())).collect();
            let est = estimate_pose(&inst, p.scale_s).unwrap();
            prop_assert!(est.residual < 1e-9);
            prop_assert!((est.pose.tan_theta - p.tan_theta).abs() < 1e-9);
            prop_assert!(circular_difference(est.pose.phi, p.phi) < 1e-9);
        }

        #[test]
        fn bbox_union_laws(a in arb_bbox(), b in arb_bbox(), c in arb_bbox()) {
            prop_assert_eq!(bbox_union(&a, &b), bbox_union(&b, &a));
            prop_assert_eq!(bbox_union(&bbox_union(&a, &b), &c), bbox_union(&a, &bbox_union(&b, &c)));
            prop_assert_eq!(bbox_union(&a, &a), a);
            let u = bbox_union(&a, &b);
            prop_assert!(u.contains(&a) && u.contains(&b));
        }
    }
}
