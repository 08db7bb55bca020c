use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{orient, Point, Polygon2D};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh3D {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh3D {
    /// Volume enclosed by the surface: sum of signed tetrahedra against a
    /// reference point. Positive for outward-facing triangles.
    ///
    /// The reference is the first vertex rather than the origin; the sum is
    /// translation invariant for closed surfaces and this keeps the terms
    /// small for geometry far from the origin.
    pub fn signed_volume(&self) -> f64 {
        let Some(&o) = self.vertices.first() else {
            return 0.0;
        };
        let rel = |i: usize| {
            let v = self.vertices[i];
            [v[0] - o[0], v[1] - o[1], v[2] - o[2]]
        };
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (p, q, r) = (rel(a), rel(b), rel(c));
                p[0] * (q[1] * r[2] - q[2] * r[1]) - p[1] * (q[0] * r[2] - q[2] * r[0])
                    + p[2] * (q[0] * r[1] - q[1] * r[0])
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn indices_in_range(&self) -> bool {
        self.triangles
            .iter()
            .all(|t| t.iter().all(|&i| i < self.vertices.len()))
    }

    /// Every undirected edge is shared by exactly two triangles, which
    /// traverse it in opposite directions.
    pub fn is_watertight(&self) -> bool {
        if !self.indices_in_range() {
            return false;
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
    }
}

/// Ear-clipping triangulation of a simple polygon given in positive
/// (canonical) orientation. Returns `n − 2` index triples, all with
/// non-negative orientation; collinear vertices yield zero-area ears.
pub fn ear_clip(vertices: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::InvalidPolygon(
            "cannot triangulate fewer than 3 vertices".into(),
        ));
    }
    let mut ring: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n - 2);
    while ring.len() > 3 {
        let m = ring.len();
        let corners = |k: usize| (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
        let is_ear = |k: usize| {
            let (a, b, c) = corners(k);
            let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
            if orient(pa, pb, pc) <= 0.0 {
                return false;
            }
            ring.iter().all(|&o| {
                o == a || o == b || o == c || {
                    let q = vertices[o];
                    // inside or on the triangle blocks the ear
                    !(orient(pa, pb, q) >= 0.0
                        && orient(pb, pc, q) >= 0.0
                        && orient(pc, pa, q) >= 0.0)
                }
            })
        };
        let k = (0..m).find(|&k| is_ear(k)).or_else(|| {
            (0..m).find(|&k| {
                let (a, b, c) = corners(k);
                orient(vertices[a], vertices[b], vertices[c]) == 0.0
            })
        });
        let Some(k) = k else {
            return Err(Error::InvalidPolygon(
                "no ear found; polygon is not simple".into(),
            ));
        };
        let (a, b, c) = corners(k);
        out.push([a, b, c]);
        ring.remove(k);
    }
    out.push([ring[0], ring[1], ring[2]]);
    Ok(out)
}

/// Lifts a footprint to a closed prism: floor at `z = 0`, roof at `z = h`.
///
/// Horizontal coordinates are converted from pixels to meters by dividing
/// by `scale_s`. Vertices `0..n` are the floor ring and `n..2n` the roof
/// ring, both in canonical order.
pub fn extrude_prism(footprint: &Polygon2D, h: f64, scale_s: f64) -> Result<Mesh3D> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::invalid(format!("prism height must be > 0, got {h}")));
    }
    if !scale_s.is_finite() || scale_s <= 0.0 {
        return Err(Error::invalid(format!(
            "scale_s must be > 0, got {scale_s}"
        )));
    }
    // re-check: translated or hand-built polygons skip validation
    let canonical = Polygon2D::new(footprint.vertices().to_vec())?.to_canonical();
    let ring = canonical.vertices();
    let n = ring.len();
    let caps = ear_clip(ring)?;

    let mut vertices = Vec::with_capacity(2 * n);
    for z in [0.0, h] {
        vertices.extend(ring.iter().map(|p| [p.x / scale_s, p.y / scale_s, z]));
    }
    let mut triangles = Vec::with_capacity(2 * (n - 2) + 2 * n);
    for &[a, b, c] in &caps {
        triangles.push([c, b, a]);
    }
    for &[a, b, c] in &caps {
        triangles.push([n + a, n + b, n + c]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([i, j, n + j]);
        triangles.push([i, n + j, n + i]);
    }
    Ok(Mesh3D {
        vertices,
        triangles,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn poly(c: &[(f64, f64)]) -> Polygon2D {
        Polygon2D::from_coords(c).unwrap()
    }

    #[test]
    fn unit_cube() {
        let sq = poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let m = extrude_prism(&sq, 1.0, 1.0).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.triangles.len(), 12);
        assert!((m.signed_volume() - 1.0).abs() < 1e-12);
        assert!(m.is_watertight());
    }

    #[test]
    fn rectangle_volume_and_scale() {
        let r = poly(&[(0.0, 0.0), (2.0, 0.0), (2.0, 3.0), (0.0, 3.0)]);
        assert!((extrude_prism(&r, 5.0, 1.0).unwrap().signed_volume() - 30.0).abs() < 1e-12);
        // 2 px per meter: footprint is 1 m x 1.5 m
        assert!((extrude_prism(&r, 5.0, 2.0).unwrap().signed_volume() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn clockwise_input_still_outward() {
        let cw = poly(&[(0.0, 0.0), (0.0, 3.0), (2.0, 3.0), (2.0, 0.0)]);
        let m = extrude_prism(&cw, 2.0, 1.0).unwrap();
        assert!((m.signed_volume() - 12.0).abs() < 1e-12);
        assert!(m.is_watertight());
    }

    #[test]
    fn l_shape_and_collinear_vertices() {
        let l = poly(&[
            (0.0, 0.0),
            (6.0, 0.0),
            (6.0, 2.0),
            (2.0, 2.0),
            (2.0, 5.0),
            (0.0, 5.0),
        ]);
        let m = extrude_prism(&l, 3.0, 1.0).unwrap();
        assert!((m.signed_volume() - l.area() * 3.0).abs() < 1e-9 * l.area() * 3.0);
        assert!(m.is_watertight());
        assert_eq!(m.triangles.len(), 2 * 4 + 12);

        let with_mid = poly(&[(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]);
        let m = extrude_prism(&with_mid, 1.0, 1.0).unwrap();
        assert!(m.is_watertight());
        assert!((m.signed_volume() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn z_is_exactly_floor_or_roof() {
        let l = poly(&[
            (0.0, 0.0),
            (6.0, 0.0),
            (6.0, 2.0),
            (2.0, 2.0),
            (2.0, 5.0),
            (0.0, 5.0),
        ]);
        let m = extrude_prism(&l, 7.25, 0.5).unwrap();
        assert!(m.vertices.iter().all(|v| v[2] == 0.0 || v[2] == 7.25));
    }

    #[test]
    fn bad_inputs() {
        let sq = poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert!(extrude_prism(&sq, 0.0, 1.0).is_err());
        assert!(extrude_prism(&sq, 1.0, 0.0).is_err());
        let broken = Mesh3D {
            vertices: vec![[0.0; 3]],
            triangles: vec![[0, 1, 2]],
        };
        assert!(!broken.is_watertight());
    }

    #[test]
    fn ear_clip_nonconvex_comb() {
        let comb = [
            (0.0, 0.0),
            (9.0, 0.0),
            (9.0, 6.0),
            (8.0, 6.0),
            (8.0, 2.0),
            (6.0, 2.0),
            (6.0, 6.0),
            (5.0, 6.0),
            (5.0, 2.0),
            (3.0, 2.0),
            (3.0, 6.0),
            (2.0, 6.0),
            (2.0, 2.0),
            (0.0, 2.0),
        ];
        let p = poly(&comb);
        let tris = ear_clip(p.vertices()).unwrap();
        assert_eq!(tris.len(), comb.len() - 2);
        let v = p.vertices();
        let area: f64 = tris
            .iter()
            .map(|&[a, b, c]| 0.5 * orient(v[a], v[b], v[c]))
            .sum();
        assert_eq!(area, p.area());
        assert!(tris
            .iter()
            .all(|&[a, b, c]| orient(v[a], v[b], v[c]) >= 0.0));
    }

    proptest! {
        #[test]
        fn random_rectangles(x in -50.0..50.0f64, y in -50.0..50.0f64, w in 0.5..40.0f64, d in 0.5..40.0f64, h in 0.1..100.0f64, s in 0.3..3.0f64) {
            let r = poly(&[(x, y), (x + w, y), (x + w, y + d), (x, y + d)]);
            let m = extrude_prism(&r, h, s).unwrap();
            let expected = r.area() / (s * s) * h;
            prop_assert!((m.signed_volume() - expected).abs() <= 1e-9 * expected);
            prop_assert!(m.is_watertight());
        }
    }
}
