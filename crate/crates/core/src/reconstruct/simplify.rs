use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, Point, Polygon2D};

/// Indices of an open chain kept by Douglas–Peucker; always includes both
/// endpoints. A vertex survives when its distance to the current chord
/// segment exceeds `epsilon`.
pub fn dp_keep(points: &[Point], epsilon: f64) -> Vec<usize> {
    let n = points.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0, n - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let (a, b) = (points[lo], points[hi]);
        let mut best = (lo, f64::NEG_INFINITY);
        for (k, &p) in points.iter().enumerate().take(hi).skip(lo + 1) {
            let d = point_segment_distance(p, a, b);
            if d > best.1 {
                best = (k, d);
            }
        }
        if best.1 > epsilon {
            keep[best.0] = true;
            stack.push((lo, best.0));
            stack.push((best.0, hi));
        }
    }
    (0..n).filter(|&i| keep[i]).collect()
}

/// Douglas–Peucker on an open polyline.
pub fn simplify_chain_dp(points: &[Point], epsilon: f64) -> Vec<Point> {
    dp_keep(points, epsilon)
        .into_iter()
        .map(|i| points[i])
        .collect()
}

/// Douglas–Peucker on a closed ring.
///
/// The ring is cut at its two mutually most distant vertices (first pair in
/// index order on ties); each half is simplified as an open chain and the
/// survivors are rejoined in their original order.
pub fn simplify_dp(p: &Polygon2D, epsilon: f64) -> Result<Polygon2D> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::invalid(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let v = p.vertices();
    let n = v.len();
    let mut split = (0, 1, f64::NEG_INFINITY);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = v[i].distance(v[j]);
            if d > split.2 {
                split = (i, j, d);
            }
        }
    }
    let (i, j, _) = split;

    let mut keep = vec![false; n];
    let first: Vec<usize> = (i..=j).collect();
    let second: Vec<usize> = (j..=i + n).map(|k| k % n).collect();
    for chain in [first, second] {
        let pts: Vec<Point> = chain.iter().map(|&k| v[k]).collect();
        for k in dp_keep(&pts, epsilon) {
            keep[chain[k]] = true;
        }
    }
    let kept: Vec<Point> = (0..n).filter(|&k| keep[k]).map(|k| v[k]).collect();
    if kept.len() < 3 {
        return Err(Error::InvalidPolygon(format!(
            "simplification at epsilon {epsilon} leaves {} vertices",
            kept.len()
        )));
    }
    Polygon2D::new(kept)
}
