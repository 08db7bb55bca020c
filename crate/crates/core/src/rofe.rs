//! Roof → footprint translation.
//!
//! A footprint is its roof moved by the roof→footprint offset. Masks move
//! by the offset rounded half away from zero; pixels pushed off the grid
//! are dropped.

use crate::dataset::{Dataset, SampleRecord};
use crate::error::Result;
use crate::geometry::{translate_polygon, Polygon2D, Vec2};
use crate::registry::{Named, Registry};
use crate::synth::{rasterize_polygon, BitMask};

/// Shifts every set pixel by `(round(dx), round(dy))`.
pub fn translate_mask(m: &BitMask, v: Vec2) -> BitMask {
    let (w, h) = (m.width(), m.height());
    let mut out = BitMask::new(w, h);
    let sx = v.dx.round();
    let sy = v.dy.round();
    // anything beyond the grid extent leaves nothing behind
    if !sx.is_finite() || !sy.is_finite() || sx.abs() >= w as f64 || sy.abs() >= h as f64 {
        return out;
    }
    let (sx, sy) = (sx as i64, sy as i64);
    for (x, y) in m.ones() {
        let nx = x as i64 + sx;
        let ny = y as i64 + sy;
        if (0..w as i64).contains(&nx) && (0..h as i64).contains(&ny) {
            out.set(nx as u32, ny as u32, true);
        }
    }
    out
}

pub fn footprint_from_roof(roof: &BitMask, v: Vec2) -> BitMask {
    translate_mask(roof, v)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FootprintOutput {
    Polygon(Polygon2D),
    Mask(BitMask),
}

/// One way of turning a roof and its offset into a footprint.
pub trait FootprintExtractor: Named + Send + Sync {
    fn extract(
        &self,
        roof: &Polygon2D,
        offset: Vec2,
        image_w: u32,
        image_h: u32,
    ) -> FootprintOutput;
}

#[derive(Debug, Default)]
pub struct PolygonTranslation;

impl Named for PolygonTranslation {
    fn name(&self) -> &'static str {
        "polygon"
    }
}

impl FootprintExtractor for PolygonTranslation {
    fn extract(&self, roof: &Polygon2D, offset: Vec2, _w: u32, _h: u32) -> FootprintOutput {
        FootprintOutput::Polygon(translate_polygon(roof, offset))
    }
}

/// Rasterizes the roof, then shifts the mask.
#[derive(Debug, Default)]
pub struct MaskTranslation;

impl Named for MaskTranslation {
    fn name(&self) -> &'static str {
        "raster"
    }
}

impl FootprintExtractor for MaskTranslation {
    fn extract(&self, roof: &Polygon2D, offset: Vec2, w: u32, h: u32) -> FootprintOutput {
        FootprintOutput::Mask(footprint_from_roof(&rasterize_polygon(roof, w, h), offset))
    }
}

pub fn default_footprint_extractors() -> Registry<dyn FootprintExtractor> {
    Registry::<dyn FootprintExtractor>::new("footprint extractor")
        .with(Box::new(PolygonTranslation))
        .with(Box::new(MaskTranslation))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordFootprints {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    /// `(instance index, footprint)` for instances with roof and offset.
    pub footprints: Vec<(usize, FootprintOutput)>,
    pub skipped: Vec<usize>,
}

pub fn extract_record(r: &SampleRecord, extractor: &dyn FootprintExtractor) -> RecordFootprints {
    let mut footprints = Vec::new();
    let mut skipped = Vec::new();
    for (i, inst) in r.instances.iter().enumerate() {
        match (&inst.roof, inst.offset) {
            (Some(roof), Some(v)) => {
                footprints.push((i, extractor.extract(roof, v, r.width, r.height)))
            }
            _ => skipped.push(i),
        }
    }
    RecordFootprints {
        image_id: r.image_id.clone(),
        width: r.width,
        height: r.height,
        footprints,
        skipped,
    }
}

/// Copy of `d` with every roof+offset instance's footprint replaced by the
/// translated roof.
pub fn complete_footprints(d: &Dataset) -> Result<Dataset> {
    let mut out = d.clone();
    for r in &mut out.records {
        for inst in &mut r.instances {
            if let (Some(roof), Some(v)) = (&inst.roof, inst.offset) {
                inst.footprint = Some(translate_polygon(roof, v));
            }
        }
    }
    out.validate()?;
    Ok(out)
}
