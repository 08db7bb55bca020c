//! Vector 3D building models: simplified footprints extruded to their
//! heights and written out as OBJ meshes.

mod mesh;
mod obj;
mod simplify;

use rayon::prelude::*;
use serde::Serialize;

pub use mesh::{ear_clip, extrude_prism, Mesh3D};
pub use obj::{export_obj, parse_obj, write_obj, OBJ_HEADER};
pub use simplify::{dp_keep, simplify_chain_dp, simplify_dp};

use crate::dataset::{BuildingInstance, Dataset, SampleRecord};
use crate::error::{Error, Result};
use crate::geometry::{translate_polygon, Polygon2D};

pub const DEFAULT_EPSILON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructParams {
    /// Douglas–Peucker tolerance in pixels.
    pub epsilon: f64,
    /// Used for instances without a positive height.
    pub default_height: Option<f64>,
    /// Pixels per meter for records without a pose.
    pub scale_s: f64,
}

impl Default for ReconstructParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            default_height: None,
            scale_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedInstance {
    pub image_id: String,
    pub instance: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reconstruction {
    /// Ordered by image, then instance index.
    pub meshes: Vec<(String, Mesh3D)>,
    pub skipped: Vec<SkippedInstance>,
}

pub fn mesh_name(image_id: &str, instance: usize) -> String {
    format!("{image_id}_b{instance:04}")
}

/// Footprint of an instance: the annotated one, else the roof moved by the
/// offset.
pub fn usable_footprint(inst: &BuildingInstance) -> Result<Polygon2D> {
    if let Some(f) = &inst.footprint {
        return Ok(f.clone());
    }
    match (&inst.roof, inst.offset) {
        (Some(roof), Some(v)) => Ok(translate_polygon(roof, v)),
        _ => Err(Error::invalid("no footprint and no roof + offset")),
    }
}

pub fn reconstruct_instance(
    inst: &BuildingInstance,
    scale_s: f64,
    params: &ReconstructParams,
) -> Result<Mesh3D> {
    let footprint = usable_footprint(inst)?;
    let height = match inst.height {
        Some(h) if h > 0.0 => h,
        _ => params
            .default_height
            .filter(|h| *h > 0.0)
            .ok_or_else(|| Error::invalid("no positive height and no default height"))?,
    };
    let simplified = simplify_dp(&footprint, params.epsilon)?;
    extrude_prism(&simplified, height, scale_s)
}

fn reconstruct_record(r: &SampleRecord, params: &ReconstructParams) -> Reconstruction {
    let scale_s = r.pose.map_or(params.scale_s, |p| p.scale_s);
    let mut out = Reconstruction::default();
    for (i, inst) in r.instances.iter().enumerate() {
        match reconstruct_instance(inst, scale_s, params) {
            Ok(mesh) => out.meshes.push((mesh_name(&r.image_id, i), mesh)),
            Err(e) => out.skipped.push(SkippedInstance {
                image_id: r.image_id.clone(),
                instance: i,
                reason: e.to_string(),
            }),
        }
    }
    out
}

/// One prism per usable building. Instances that fail a precondition are
/// listed in [`Reconstruction::skipped`] instead of aborting the run.
pub fn reconstruct(d: &Dataset, params: &ReconstructParams) -> Result<Reconstruction> {
    if !params.epsilon.is_finite() || params.epsilon < 0.0 {
        return Err(Error::invalid(format!(
            "epsilon must be >= 0, got {}",
            params.epsilon
        )));
    }
    if !params.scale_s.is_finite() || params.scale_s <= 0.0 {
        return Err(Error::invalid(format!(
            "scale_s must be > 0, got {}",
            params.scale_s
        )));
    }
    let parts: Vec<Reconstruction> = d
        .records
        .par_iter()
        .map(|r| reconstruct_record(r, params))
        .collect();
    let mut all = Reconstruction::default();
    for p in parts {
        all.meshes.extend(p.meshes);
        all.skipped.extend(p.skipped);
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scenes, SynthConfig};

    fn scenes() -> Dataset {
        generate_scenes(&SynthConfig {
            image_w: 128,
            image_h: 128,
            n_images: 3,
            buildings_per_image: [2, 6],
            shape_family: "l_shape".into(),
            scale_s: 1.5,
            seed: 5,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn volumes_match_shoelace() {
        let d = scenes();
        let rec = reconstruct(
            &d,
            &ReconstructParams {
                epsilon: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rec.skipped.is_empty());
        assert_eq!(rec.meshes.len(), d.instance_count());
        let mut k = 0;
        for r in &d.records {
            for inst in &r.instances {
                let expected =
                    inst.footprint.as_ref().unwrap().area() * inst.height.unwrap() / (1.5 * 1.5);
                let (_, mesh) = &rec.meshes[k];
                assert!((mesh.signed_volume() - expected).abs() <= 1e-9 * expected);
                assert!(mesh.is_watertight());
                k += 1;
            }
        }
    }

    #[test]
    fn roof_plus_offset_matches_footprint_path() {
        let d = scenes();
        let mut roofs_only = d.clone();
        for r in &mut roofs_only.records {
            for inst in &mut r.instances {
                inst.footprint = None;
            }
        }
        let p = ReconstructParams::default();
        assert_eq!(
            reconstruct(&d, &p).unwrap(),
            reconstruct(&roofs_only, &p).unwrap()
        );
    }

    #[test]
    fn default_height_and_skips() {
        let mut d = scenes();
        d.records[0].instances[0].height = None;
        d.records[0].instances[1].height = Some(0.0);
        let p = ReconstructParams {
            default_height: Some(3.0),
            ..Default::default()
        };
        let rec = reconstruct(&d, &p).unwrap();
        let first = &rec.meshes[0].1;
        assert!(first.vertices.iter().all(|v| v[2] == 0.0 || v[2] == 3.0));
        assert!(first.vertices.iter().any(|v| v[2] == 3.0));

        let rec = reconstruct(&d, &ReconstructParams::default()).unwrap();
        assert_eq!(rec.skipped.len(), 2);
        assert_eq!(rec.skipped[0].instance, 0);

        let bare = BuildingInstance {
            roof: d.records[0].instances[2].roof.clone(),
            ..Default::default()
        };
        assert!(reconstruct_instance(&bare, 1.0, &ReconstructParams::default()).is_err());
        assert!(reconstruct(
            &d,
            &ReconstructParams {
                epsilon: -1.0,
                ..Default::default()
            }
        )
        .is_err());
    }
}
