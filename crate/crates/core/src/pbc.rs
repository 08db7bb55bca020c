//! Pseudo building boxes.
//!
//! A building box spans roof and footprint. When only the footprint and a
//! height are annotated, the roof is estimated by shifting the footprint
//! back along the offset predicted from the image pose; with a footprint
//! alone, the footprint box is enlarged by a fixed ratio.

use serde::Serialize;

use crate::dataset::SampleRecord;
use crate::error::{Error, Result};
use crate::geometry::{
    bbox_of, bbox_union, offset_from_pose, translate_polygon, BBox, ImagePose, Polygon2D, Vec2,
};
use crate::registry::{Named, Registry};

pub const DEFAULT_EXPAND_RATIO: f64 = 0.1;

/// Offset implied by an annotated height and a predicted pose.
pub fn pseudo_offset(h_gt: f64, scale_s: f64, tan_theta_pred: f64, phi_pred: f64) -> Result<Vec2> {
    let pose = ImagePose::new(tan_theta_pred, phi_pred, scale_s)?;
    offset_from_pose(h_gt, &pose)
}

/// Union of the footprint box and the box of `footprint - v`, clipped to
/// the image. Fails when nothing of the building is inside the image.
pub fn pseudo_bbox_level_h(
    footprint: &Polygon2D,
    v: Vec2,
    image_w: u32,
    image_h: u32,
) -> Result<BBox> {
    if !v.is_finite() {
        return Err(Error::invalid("non-finite offset"));
    }
    let roof = translate_polygon(footprint, -v);
    let full = bbox_union(&bbox_of(footprint), &bbox_of(&roof));
    let clipped = full.clamp_to(&BBox::image(image_w, image_h));
    if clipped.width() <= 0.0 || clipped.height() <= 0.0 {
        return Err(Error::invalid(
            "pseudo bbox is empty after clipping: building lies outside the image",
        ));
    }
    Ok(clipped)
}

/// Footprint box grown by `expand_ratio` of its width (height) on each
/// side, clipped to the image.
pub fn pseudo_bbox_level_n(
    footprint: &Polygon2D,
    expand_ratio: f64,
    image_w: u32,
    image_h: u32,
) -> Result<BBox> {
    if !expand_ratio.is_finite() || expand_ratio < 0.0 {
        return Err(Error::invalid(format!(
            "expand_ratio must be >= 0, got {expand_ratio}"
        )));
    }
    let b = bbox_of(footprint);
    let (mx, my) = (expand_ratio * b.width(), expand_ratio * b.height());
    let grown = BBox {
        x_min: b.x_min - mx,
        y_min: b.y_min - my,
        x_max: b.x_max + mx,
        y_max: b.y_max + my,
    };
    Ok(grown.clamp_to(&BBox::image(image_w, image_h)))
}

/// Everything a strategy may draw on for one building.
#[derive(Debug, Clone, Copy)]
pub struct BoxContext<'a> {
    pub footprint: &'a Polygon2D,
    pub height: Option<f64>,
    pub pose: Option<ImagePose>,
    pub image_w: u32,
    pub image_h: u32,
}

pub trait PseudoBoxStrategy: Named + Send + Sync {
    /// Whether the context carries what this strategy needs.
    fn applicable(&self, ctx: &BoxContext<'_>) -> bool;

    fn pseudo_bbox(&self, ctx: &BoxContext<'_>) -> Result<BBox>;
}

/// Height + pose → offset → shifted footprint.
#[derive(Debug, Default)]
pub struct PoseGuided;

impl Named for PoseGuided {
    fn name(&self) -> &'static str {
        "pose"
    }
}

impl PseudoBoxStrategy for PoseGuided {
    fn applicable(&self, ctx: &BoxContext<'_>) -> bool {
        ctx.height.is_some() && ctx.pose.is_some()
    }

    fn pseudo_bbox(&self, ctx: &BoxContext<'_>) -> Result<BBox> {
        let h = ctx
            .height
            .ok_or_else(|| Error::invalid("pose-guided pseudo box needs a height"))?;
        let pose = ctx
            .pose
            .ok_or_else(|| Error::invalid("pose-guided pseudo box needs an image pose"))?;
        let v = pseudo_offset(h, pose.scale_s, pose.tan_theta, pose.phi)?;
        pseudo_bbox_level_h(ctx.footprint, v, ctx.image_w, ctx.image_h)
    }
}

#[derive(Debug)]
pub struct FootprintExpansion {
    pub ratio: f64,
}

impl Default for FootprintExpansion {
    fn default() -> Self {
        Self {
            ratio: DEFAULT_EXPAND_RATIO,
        }
    }
}

impl Named for FootprintExpansion {
    fn name(&self) -> &'static str {
        "expand"
    }
}

impl PseudoBoxStrategy for FootprintExpansion {
    fn applicable(&self, _ctx: &BoxContext<'_>) -> bool {
        true
    }

    fn pseudo_bbox(&self, ctx: &BoxContext<'_>) -> Result<BBox> {
        pseudo_bbox_level_n(ctx.footprint, self.ratio, ctx.image_w, ctx.image_h)
    }
}

/// Registry in fallback order: pose-guided first, then expansion.
pub fn default_box_strategies(expand_ratio: f64) -> Registry<dyn PseudoBoxStrategy> {
    Registry::<dyn PseudoBoxStrategy>::new("pseudo-box strategy")
        .with(Box::new(PoseGuided))
        .with(Box::new(FootprintExpansion {
            ratio: expand_ratio,
        }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategySelection<'a> {
    /// First applicable strategy in registry order.
    Auto,
    Named(&'a str),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoBox {
    pub instance: usize,
    pub bbox: [f64; 4],
    pub method: &'static str,
}

/// Pseudo boxes for every instance with a footprint. `pose` overrides the
/// record's own pose when given.
pub fn pseudo_boxes(
    record: &SampleRecord,
    registry: &Registry<dyn PseudoBoxStrategy>,
    selection: StrategySelection<'_>,
    pose: Option<ImagePose>,
) -> Result<Vec<PseudoBox>> {
    let pose = pose.or(record.pose);
    let forced = match selection {
        StrategySelection::Named(name) => Some(registry.get(name)?),
        StrategySelection::Auto => None,
    };
    let names = registry.names();
    let mut out = Vec::new();
    for (i, inst) in record.instances.iter().enumerate() {
        let Some(footprint) = inst.footprint.as_ref() else {
            continue;
        };
        let ctx = BoxContext {
            footprint,
            height: inst.height,
            pose,
            image_w: record.width,
            image_h: record.height,
        };
        let strategy = match forced {
            Some(s) => s,
            None => names
                .iter()
                .map(|n| registry.get(n).expect("registered"))
                .find(|s| s.applicable(&ctx))
                .ok_or_else(|| Error::Record {
                    image_id: record.image_id.clone(),
                    instance: Some(i),
                    message: "no applicable pseudo-box strategy".into(),
                })?,
        };
        let bbox = strategy.pseudo_bbox(&ctx).map_err(|e| Error::Record {
            image_id: record.image_id.clone(),
            instance: Some(i),
            message: e.to_string(),
        })?;
        out.push(PseudoBox {
            instance: i,
            bbox: bbox.to_array(),
            method: strategy.name(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::dataset::BuildingInstance;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon2D {
        Polygon2D::from_coords(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]).unwrap()
    }

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn pseudo_offset_examples() {
        assert_eq!(pseudo_offset(0.0, 2.0, 1.0, 0.3).unwrap(), Vec2::ZERO);
        assert_eq!(
            pseudo_offset(20.0, 2.0, 1.0, 0.0).unwrap(),
            Vec2::new(40.0, 0.0)
        );
        assert!(pseudo_offset(-1.0, 2.0, 1.0, 0.0).is_err());
        assert!(pseudo_offset(1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn level_h_examples() {
        let fp = rect(10.0, 10.0, 20.0, 20.0);
        assert_eq!(
            pseudo_bbox_level_h(&fp, Vec2::ZERO, 100, 100).unwrap(),
            bb(10.0, 10.0, 20.0, 20.0)
        );
        assert_eq!(
            pseudo_bbox_level_h(&fp, Vec2::new(-5.0, 0.0), 100, 100).unwrap(),
            bb(10.0, 10.0, 25.0, 20.0)
        );
        // roof pushed past the image edge is clipped
        assert_eq!(
            pseudo_bbox_level_h(&fp, Vec2::new(15.0, 0.0), 100, 100).unwrap(),
            bb(0.0, 10.0, 20.0, 20.0)
        );
        let outside = rect(200.0, 200.0, 210.0, 210.0);
        assert!(pseudo_bbox_level_h(&outside, Vec2::ZERO, 100, 100).is_err());
    }

    #[test]
    fn level_n_examples() {
        let fp = rect(10.0, 10.0, 20.0, 20.0);
        assert_eq!(
            pseudo_bbox_level_n(&fp, 0.0, 100, 100).unwrap(),
            bb(10.0, 10.0, 20.0, 20.0)
        );
        assert_eq!(
            pseudo_bbox_level_n(&fp, 0.1, 100, 100).unwrap(),
            bb(9.0, 9.0, 21.0, 21.0)
        );
        let corner = rect(0.0, 0.0, 20.0, 20.0);
        assert_eq!(
            pseudo_bbox_level_n(&corner, 0.5, 25, 25).unwrap(),
            bb(0.0, 0.0, 25.0, 25.0)
        );
        assert!(pseudo_bbox_level_n(&fp, -0.1, 100, 100).is_err());
    }

    #[test]
    fn auto_selection_falls_back() {
        let mut r = SampleRecord::new("img", 100, 100);
        let mut with_h = BuildingInstance::from_footprint(rect(10.0, 10.0, 20.0, 20.0));
        with_h.height = Some(5.0);
        let without = BuildingInstance::from_footprint(rect(50.0, 50.0, 60.0, 60.0));
        r.instances = vec![with_h, without];
        let reg = default_box_strategies(0.1);

        // no pose: both fall back to expansion
        let boxes = pseudo_boxes(&r, &reg, StrategySelection::Auto, None).unwrap();
        assert!(boxes.iter().all(|b| b.method == "expand"));

        let pose = ImagePose::new(1.0, std::f64::consts::PI, 1.0).unwrap();
        let boxes = pseudo_boxes(&r, &reg, StrategySelection::Auto, Some(pose)).unwrap();
        assert_eq!(boxes[0].method, "pose");
        // v = (-5, ~0): roof sits at x 15..25
        assert_eq!(boxes[0].bbox[2], 25.0);
        assert_eq!(boxes[1].method, "expand");

        let forced = pseudo_boxes(&r, &reg, StrategySelection::Named("pose"), Some(pose));
        assert!(forced.is_err(), "second instance lacks a height");
        assert!(pseudo_boxes(&r, &reg, StrategySelection::Named("magic"), None).is_err());
    }

    proptest! {
        #[test]
        fn level_h_contains_clipped_footprint(
            x in 0.0..80.0f64, y in 0.0..80.0f64, w in 1.0..20.0f64, h in 1.0..20.0f64,
            dx in -30.0..30.0f64, dy in -30.0..30.0f64,
        ) {
            let fp = rect(x, y, x + w, y + h);
            let b = pseudo_bbox_level_h(&fp, Vec2::new(dx, dy), 100, 100).unwrap();
            let inner = bbox_of(&fp).clamp_to(&BBox::image(100, 100));
            prop_assert!(b.contains(&inner));
        }

        #[test]
        fn level_h_area_grows_with_offset(
            x in 0.0..50.0f64, y in 0.0..50.0f64, dx in -10.0..10.0f64, dy in -10.0..10.0f64, k in 1.0..3.0f64,
        ) {
            // pre-clipping area: use an image large enough to never clip
            let fp = rect(x + 100.0, y + 100.0, x + 110.0, y + 115.0);
            let a = pseudo_bbox_level_h(&fp, Vec2::new(dx, dy), 400, 400).unwrap().area();
            let b = pseudo_bbox_level_h(&fp, Vec2::new(dx, dy) * k, 400, 400).unwrap().area();
            prop_assert!(b >= a);
        }

        #[test]
        fn level_n_monotone(r1 in 0.0..1.0f64, r2 in 0.0..1.0f64, x in 0.0..60.0f64, y in 0.0..60.0f64) {
            let fp = rect(x, y, x + 12.0, y + 7.0);
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let a = pseudo_bbox_level_n(&fp, lo, 80, 80).unwrap();
            let b = pseudo_bbox_level_n(&fp, hi, 80, 80).unwrap();
            prop_assert!(b.contains(&a));
        }
    }
}
