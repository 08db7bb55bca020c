//! Footprint shape families for the scene generator.

use rand::{Rng, RngCore};

use crate::geometry::{Point, Polygon2D};
use crate::registry::{Named, Registry};

/// Produces one footprint with integer vertices whose bounding box starts
/// at the origin. Side lengths are drawn from `size` (inclusive, pixels).
pub trait ShapeFamily: Named + Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore, size: (u32, u32)) -> Polygon2D;
}

#[derive(Debug, Default)]
pub struct AxisRect;

impl Named for AxisRect {
    fn name(&self) -> &'static str {
        "axis_rect"
    }
}

impl ShapeFamily for AxisRect {
    fn sample(&self, rng: &mut dyn RngCore, (lo, hi): (u32, u32)) -> Polygon2D {
        let w = rng.gen_range(lo..=hi) as f64;
        let h = rng.gen_range(lo..=hi) as f64;
        Polygon2D::from_coords(&[(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)])
            .expect("positive rectangle")
    }
}

/// Rectangle with one corner notched out, six vertices.
#[derive(Debug, Default)]
pub struct LShape;

impl Named for LShape {
    fn name(&self) -> &'static str {
        "l_shape"
    }
}

impl ShapeFamily for LShape {
    fn sample(&self, rng: &mut dyn RngCore, (lo, hi): (u32, u32)) -> Polygon2D {
        let lo = lo.max(2);
        let hi = hi.max(lo);
        let w = rng.gen_range(lo..=hi);
        let h = rng.gen_range(lo..=hi);
        let arm_w = rng.gen_range(1..w) as f64;
        let arm_h = rng.gen_range(1..h) as f64;
        let (w, h) = (w as f64, h as f64);
        Polygon2D::new(vec![
            Point::new(0.0, 0.0),
            Point::new(w, 0.0),
            Point::new(w, arm_h),
            Point::new(arm_w, arm_h),
            Point::new(arm_w, h),
            Point::new(0.0, h),
        ])
        .expect("valid L-shape")
    }
}

pub fn default_shape_families() -> Registry<dyn ShapeFamily> {
    Registry::<dyn ShapeFamily>::new("shape family")
        .with(Box::new(AxisRect))
        .with(Box::new(LShape))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::bbox_of;

    #[test]
    fn shapes_are_canonical_integer_and_anchored() {
        let reg = default_shape_families();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for name in reg.names() {
            let fam = reg.get(name).unwrap();
            for _ in 0..200 {
                let p = fam.sample(&mut rng, (2, 20));
                assert!(p.is_canonical(), "{name}");
                let b = bbox_of(&p);
                assert_eq!((b.x_min, b.y_min), (0.0, 0.0));
                assert!(b.x_max <= 20.0 && b.y_max <= 20.0);
                assert!(p
                    .vertices()
                    .iter()
                    .all(|q| q.x.fract() == 0.0 && q.y.fract() == 0.0));
            }
        }
    }

    #[test]
    fn l_shape_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LShape.sample(&mut rng, (10, 10));
        let v = p.vertices();
        let (aw, ah) = (v[3].x, v[3].y);
        assert_eq!(p.area(), 100.0 - (10.0 - aw) * (10.0 - ah));
    }
}
