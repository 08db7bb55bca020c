//! Annotated samples and their supervision level.
//!
//! File layout (UTF-8 JSON):
//!
//! ```text
//! {"images": [{"id", "width", "height", "pose"?: {"tan_theta", "phi", "scale_s"},
//!              "instances": [{"footprint": [x0, y0, ...], "roof"?: [...],
//!                             "offset"?: [dx, dy], "height"?: h, "score"?: p}]}],
//!  "metadata": {...}}
//! ```
//!
//! Keys this crate does not understand are kept and written back.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{circular_difference, offset_from_pose, ImagePose, Polygon2D, Vec2};

/// Vertex tolerance for the roof/footprint/offset agreement check.
pub const ROOF_CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuildingInstance {
    /// Required for grading and evaluation; may be absent in roof-only
    /// inputs that are later completed from `roof + offset`.
    pub footprint: Option<Polygon2D>,
    pub roof: Option<Polygon2D>,
    /// Roof→footprint displacement in pixels.
    pub offset: Option<Vec2>,
    /// Meters.
    pub height: Option<f64>,
    pub score: Option<f64>,
    pub extra: Map<String, Value>,
}

impl BuildingInstance {
    pub fn from_footprint(footprint: Polygon2D) -> Self {
        Self {
            footprint: Some(footprint),
            ..Default::default()
        }
    }

    /// Level of this instance alone; `None` when the footprint is missing.
    pub fn level(&self) -> Option<SupervisionLevel> {
        self.footprint.as_ref()?;
        Some(match (self.offset, self.height) {
            (Some(_), Some(_)) => SupervisionLevel::OH,
            (None, Some(_)) => SupervisionLevel::H,
            _ => SupervisionLevel::N,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub pose: Option<ImagePose>,
    pub instances: Vec<BuildingInstance>,
    pub extra: Map<String, Value>,
}

impl SampleRecord {
    pub fn new(image_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            image_id: image_id.into(),
            width,
            height,
            pose: None,
            instances: Vec::new(),
            extra: Map::new(),
        }
    }

    fn error(&self, instance: Option<usize>, message: impl Into<String>) -> Error {
        Error::Record {
            image_id: self.image_id.clone(),
            instance,
            message: message.into(),
        }
    }

    /// Checks every record-level invariant.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(self.error(None, "image dimensions must be positive"));
        }
        let (w, h) = (self.width as f64, self.height as f64);
        let in_slack = |p: &Polygon2D| {
            p.vertices()
                .iter()
                .all(|q| q.x >= -w && q.x <= 2.0 * w && q.y >= -h && q.y <= 2.0 * h)
        };
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.footprint.is_none() && inst.roof.is_none() {
                return Err(self.error(Some(i), "instance has neither footprint nor roof"));
            }
            for (label, poly) in [("footprint", &inst.footprint), ("roof", &inst.roof)] {
                if let Some(p) = poly {
                    if !in_slack(p) {
                        return Err(self.error(
                            Some(i),
                            format!("{label} vertex outside [-w, 2w] x [-h, 2h]"),
                        ));
                    }
                }
            }
            if let Some(v) = inst.offset {
                if !v.is_finite() {
                    return Err(self.error(Some(i), "non-finite offset"));
                }
            }
            if let Some(hh) = inst.height {
                if !hh.is_finite() || hh < 0.0 {
                    return Err(self.error(Some(i), format!("height must be >= 0, got {hh}")));
                }
            }
            if let Some(s) = inst.score {
                if !(0.0..=1.0).contains(&s) {
                    return Err(self.error(Some(i), format!("score must be in [0, 1], got {s}")));
                }
            }
            if let (Some(f), Some(r), Some(v)) = (&inst.footprint, &inst.roof, inst.offset) {
                if f.len() != r.len() {
                    return Err(self.error(
                        Some(i),
                        "roof and footprint vertex counts differ while an offset is given",
                    ));
                }
                let worst = f
                    .vertices()
                    .iter()
                    .zip(r.vertices())
                    .map(|(fp, rp)| fp.offset(-v).distance(*rp))
                    .fold(0.0, f64::max);
                if worst > ROOF_CONSISTENCY_TOL {
                    return Err(self.error(
                        Some(i),
                        format!("roof deviates from footprint - offset by {worst} px"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<SampleRecord>,
    pub metadata: Map<String, Value>,
    pub extra: Map<String, Value>,
}

/// How much annotation a sample carries. Ordered `N < H < OH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SupervisionLevel {
    /// Footprints only.
    N,
    /// Footprints and heights.
    H,
    /// Footprints, offsets and heights.
    OH,
}

impl SupervisionLevel {
    pub const ALL: [SupervisionLevel; 3] = [Self::N, Self::H, Self::OH];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::N => "N",
            Self::H => "H",
            Self::OH => "OH",
        }
    }
}

impl fmt::Display for SupervisionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SupervisionLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" => Ok(Self::N),
            "H" => Ok(Self::H),
            "OH" => Ok(Self::OH),
            other => Err(Error::invalid(format!(
                "unknown supervision level `{other}`"
            ))),
        }
    }
}

/// Grades a sample to the weakest level among its instances.
pub fn grade_sample(r: &SampleRecord) -> Result<SupervisionLevel> {
    let mut level = SupervisionLevel::OH;
    for (i, inst) in r.instances.iter().enumerate() {
        let l = inst
            .level()
            .ok_or_else(|| r.error(Some(i), "instance has no footprint"))?;
        level = level.min(l);
    }
    Ok(level)
}

impl Dataset {
    pub fn from_json_str(s: &str) -> std::result::Result<Self, DatasetParseError> {
        let raw: RawDataset = serde_json::from_str(s).map_err(DatasetParseError::Json)?;
        raw.into_dataset().map_err(DatasetParseError::Invalid)
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawDataset::from_dataset(self);
        let mut s = serde_json::to_string_pretty(&raw).expect("dataset serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.image_id.as_str()) {
                return Err(r.error(None, "duplicate image id"));
            }
            r.validate()?;
        }
        Ok(())
    }

    pub fn record(&self, image_id: &str) -> Option<&SampleRecord> {
        self.records.iter().find(|r| r.image_id == image_id)
    }

    pub fn instance_count(&self) -> usize {
        self.records.iter().map(|r| r.instances.len()).sum()
    }
}

#[derive(Debug)]
pub enum DatasetParseError {
    Json(serde_json::Error),
    Invalid(Error),
}

impl fmt::Display for DatasetParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Json(e) => write!(f, "{e}"),
            Self::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for DatasetParseError {}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_json_str(&text).map_err(|e| match e {
        DatasetParseError::Json(source) => Error::Json {
            path: path.to_path_buf(),
            source,
        },
        DatasetParseError::Invalid(e) => e,
    })
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, d.to_json_string()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyFinding {
    pub instance: usize,
    /// `‖v‖ − h·s·tanθ` in pixels.
    pub magnitude_excess: f64,
    /// Circular difference between the offset direction and φ, radians.
    pub angle_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConsistencyReport {
    pub image_id: String,
    pub findings: Vec<ConsistencyFinding>,
    pub notes: Vec<String>,
}

/// Compares each annotated offset against the one implied by its height
/// and the image pose.
///
/// The angular check is scaled to pixels: an instance is flagged when its
/// direction error times the expected offset length exceeds `tol_px`.
pub fn validate_consistency(r: &SampleRecord, tol_px: f64) -> ConsistencyReport {
    let mut report = ConsistencyReport {
        image_id: r.image_id.clone(),
        ..Default::default()
    };
    let Some(pose) = r.pose else {
        report.notes.push("pose absent".to_string());
        return report;
    };
    let mut skipped = 0;
    for (i, inst) in r.instances.iter().enumerate() {
        let (Some(v), Some(h)) = (inst.offset, inst.height) else {
            skipped += 1;
            continue;
        };
        let Ok(expected) = offset_from_pose(h, &pose) else {
            skipped += 1;
            continue;
        };
        let magnitude_excess = v.norm() - expected.norm();
        let angle_error = if v.norm() > 0.0 && expected.norm() > 0.0 {
            circular_difference(v.angle(), pose.phi)
        } else {
            0.0
        };
        let lateral = angle_error * expected.norm();
        if magnitude_excess.abs() > tol_px || lateral > tol_px {
            report.findings.push(ConsistencyFinding {
                instance: i,
                magnitude_excess,
                angle_error,
            });
        }
    }
    if skipped > 0 {
        report
            .notes
            .push(format!("{skipped} instance(s) lack offset or height"));
    }
    report
}

#[derive(Serialize, Deserialize)]
struct RawDataset {
    images: Vec<RawImage>,
    #[serde(default)]
    metadata: Map<String, Value>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct RawImage {
    id: String,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose: Option<RawPose>,
    #[serde(default)]
    instances: Vec<RawInstance>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct RawPose {
    tan_theta: f64,
    phi: f64,
    scale_s: f64,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    footprint: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roof: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

impl RawDataset {
    fn into_dataset(self) -> Result<Dataset> {
        let mut records = Vec::with_capacity(self.images.len());
        for img in self.images {
            let err = |instance: Option<usize>, message: String| Error::Record {
                image_id: img.id.clone(),
                instance,
                message,
            };
            let pose = img
                .pose
                .as_ref()
                .map(|p| ImagePose::new(p.tan_theta, p.phi, p.scale_s))
                .transpose()
                .map_err(|e| err(None, format!("pose: {e}")))?;
            let mut instances = Vec::with_capacity(img.instances.len());
            for (i, inst) in img.instances.into_iter().enumerate() {
                let poly = |label: &str, c: Option<Vec<f64>>| {
                    c.map(|c| Polygon2D::from_flat(&c))
                        .transpose()
                        .map_err(|e| err(Some(i), format!("{label}: {e}")))
                };
                instances.push(BuildingInstance {
                    footprint: poly("footprint", inst.footprint)?,
                    roof: poly("roof", inst.roof)?,
                    offset: inst.offset.map(|[dx, dy]| Vec2::new(dx, dy)),
                    height: inst.height,
                    score: inst.score,
                    extra: inst.extra,
                });
            }
            records.push(SampleRecord {
                image_id: img.id,
                width: img.width,
                height: img.height,
                pose,
                instances,
                extra: img.extra,
            });
        }
        let d = Dataset {
            records,
            metadata: self.metadata,
            extra: self.extra,
        };
        d.validate()?;
        Ok(d)
    }

    fn from_dataset(d: &Dataset) -> Self {
        RawDataset {
            images: d
                .records
                .iter()
                .map(|r| RawImage {
                    id: r.image_id.clone(),
                    width: r.width,
                    height: r.height,
                    pose: r.pose.map(|p| RawPose {
                        tan_theta: p.tan_theta,
                        phi: p.phi,
                        scale_s: p.scale_s,
                    }),
                    instances: r
                        .instances
                        .iter()
                        .map(|inst| RawInstance {
                            footprint: inst.footprint.as_ref().map(Polygon2D::to_flat),
                            roof: inst.roof.as_ref().map(Polygon2D::to_flat),
                            offset: inst.offset.map(|v| [v.dx, v.dy]),
                            height: inst.height,
                            score: inst.score,
                            extra: inst.extra.clone(),
                        })
                        .collect(),
                    extra: r.extra.clone(),
                })
                .collect(),
            metadata: d.metadata.clone(),
            extra: d.extra.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::translate_polygon;

    fn square(x: f64, y: f64, s: f64) -> Polygon2D {
        Polygon2D::from_coords(&[(x, y), (x + s, y), (x + s, y + s), (x, y + s)]).unwrap()
    }

    fn record(instances: Vec<BuildingInstance>) -> SampleRecord {
        let mut r = SampleRecord::new("img", 100, 100);
        r.instances = instances;
        r
    }

    fn full(h: f64, v: Vec2) -> BuildingInstance {
        let fp = square(10.0, 10.0, 10.0);
        BuildingInstance {
            roof: Some(translate_polygon(&fp, -v)),
            footprint: Some(fp),
            offset: Some(v),
            height: Some(h),
            ..Default::default()
        }
    }

    #[test]
    fn grading_levels() {
        let n = BuildingInstance::from_footprint(square(0.0, 0.0, 5.0));
        let mut h = n.clone();
        h.height = Some(12.0);
        let oh = full(10.0, Vec2::new(2.0, 0.0));

        assert_eq!(
            grade_sample(&record(vec![n.clone(), n.clone()])).unwrap(),
            SupervisionLevel::N
        );
        assert_eq!(
            grade_sample(&record(vec![h.clone(), h.clone()])).unwrap(),
            SupervisionLevel::H
        );
        assert_eq!(
            grade_sample(&record(vec![oh.clone()])).unwrap(),
            SupervisionLevel::OH
        );
        assert_eq!(
            grade_sample(&record(vec![oh.clone(), h.clone()])).unwrap(),
            SupervisionLevel::H
        );
        assert_eq!(
            grade_sample(&record(vec![oh, h, n])).unwrap(),
            SupervisionLevel::N
        );
    }

    #[test]
    fn offset_without_height_is_n() {
        let mut i = BuildingInstance::from_footprint(square(0.0, 0.0, 5.0));
        i.offset = Some(Vec2::new(1.0, 1.0));
        assert_eq!(grade_sample(&record(vec![i])).unwrap(), SupervisionLevel::N);
    }

    #[test]
    fn grading_requires_footprint() {
        let i = BuildingInstance {
            roof: Some(square(0.0, 0.0, 5.0)),
            ..Default::default()
        };
        let err = grade_sample(&record(vec![i])).unwrap_err();
        assert!(matches!(
            err,
            Error::Record {
                instance: Some(0),
                ..
            }
        ));
    }

    #[test]
    fn grade_is_monotone_under_removal() {
        let base = full(10.0, Vec2::new(3.0, 0.0));
        let variants = [
            base.clone(),
            BuildingInstance {
                offset: None,
                roof: None,
                ..base.clone()
            },
            BuildingInstance {
                height: None,
                ..base.clone()
            },
            BuildingInstance {
                height: None,
                offset: None,
                roof: None,
                ..base.clone()
            },
        ];
        for a in &variants {
            let la = a.level().unwrap();
            for b in &variants {
                let removed_only = (b.offset.is_none() || a.offset.is_some())
                    && (b.height.is_none() || a.height.is_some());
                if removed_only {
                    assert!(b.level().unwrap() <= la);
                }
            }
        }
    }

    #[test]
    fn json_round_trip_with_unknown_keys() {
        let text = r#"{
          "images": [{
            "id": "a", "width": 64, "height": 48, "tile": 7,
            "pose": {"tan_theta": 0.5, "phi": 1.25, "scale_s": 2.0},
            "instances": [
              {"footprint": [10, 10, 20, 10, 20, 20, 10, 20], "height": 4.0,
               "offset": [4.0, 0.0], "roof": [6, 10, 16, 10, 16, 20, 6, 20], "label": "x"},
              {"footprint": [30.5, 30, 40, 30, 40, 40.25], "score": 0.5}
            ]}],
          "metadata": {"source": "test"},
          "version": 3
        }"#;
        let d = Dataset::from_json_str(text).unwrap();
        assert_eq!(d.records[0].extra["tile"], 7);
        assert_eq!(d.records[0].instances[0].extra["label"], "x");
        assert_eq!(d.extra["version"], 3);
        let again = Dataset::from_json_str(&d.to_json_string()).unwrap();
        assert_eq!(again, d);
        assert_eq!(again.to_json_string(), d.to_json_string());
    }

    #[test]
    fn malformed_polygon_names_record_and_instance() {
        let text = r#"{"images": [{"id": "img7", "width": 10, "height": 10,
            "instances": [{"footprint": [0,0,1,1,2,2,2,0]}, {"footprint": [0, 0, 1, 1]}]}]}"#;
        let err = Dataset::from_json_str(text).unwrap_err().to_string();
        assert!(err.contains("img7") && err.contains("instance 1"), "{err}");
    }

    #[test]
    fn load_rejects_invariant_violations() {
        let cases = [
            r#"{"images": [{"id": "a", "width": 10, "height": 10, "instances": [{"footprint": [0,0,1,0,1,1], "height": -1}]}]}"#,
            r#"{"images": [{"id": "a", "width": 10, "height": 10, "instances": [{"footprint": [0,0,1,0,1,1], "score": 2}]}]}"#,
            r#"{"images": [{"id": "a", "width": 10, "height": 10, "instances": [{"footprint": [0,0,100,0,1,1]}]}]}"#,
            r#"{"images": [{"id": "a", "width": 10, "height": 10, "instances": [{"footprint": [0,0,1,0,1,1], "roof": [0,0,1,0,1,1], "offset": [1, 0]}]}]}"#,
            r#"{"images": [{"id": "a", "width": 10, "height": 10, "instances": []}, {"id": "a", "width": 10, "height": 10, "instances": []}]}"#,
            r#"{"images": [{"id": "a", "width": 0, "height": 10, "instances": []}]}"#,
            r#"{"images": [{"id": "a", "width": 10, "height": 10, "instances": [{}]}]}"#,
            r#"{"images": [{"id": "a", "width": 10, "height": 10, "pose": {"tan_theta": -1, "phi": 0, "scale_s": 1}}]}"#,
        ];
        for c in cases {
            assert!(Dataset::from_json_str(c).is_err(), "{c}");
        }
    }

    #[test]
    fn file_round_trip_and_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let mut r = record(vec![full(10.0, Vec2::new(2.0, -1.0))]);
        r.pose = Some(ImagePose::new(0.3, 1.0, 1.0).unwrap());
        let d = Dataset {
            records: vec![r],
            ..Default::default()
        };
        save_dataset(&d, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, d);
        assert_eq!(
            grade_sample(&back.records[0]).unwrap(),
            grade_sample(&d.records[0]).unwrap()
        );
        assert!(matches!(
            load_dataset(dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Json { .. })));
    }

    #[test]
    fn consistency_findings() {
        let pose = ImagePose::new(1.0, 0.0, 1.0).unwrap();
        let mut r = record(vec![full(5.0, Vec2::new(5.0, 0.0))]);
        r.pose = Some(pose);
        assert!(validate_consistency(&r, 1e-6).findings.is_empty());

        // doubling the offset leaves one finding whose excess is the original norm
        let mut doubled = r.clone();
        doubled.instances[0] = full(5.0, Vec2::new(10.0, 0.0));
        let rep = validate_consistency(&doubled, 1e-6);
        assert_eq!(rep.findings.len(), 1);
        assert_eq!(rep.findings[0].magnitude_excess, 5.0);

        let mut rotated = r.clone();
        rotated.instances[0] = full(5.0, Vec2::new(0.0, 5.0));
        let rep = validate_consistency(&rotated, 1e-6);
        assert_eq!(rep.findings.len(), 1);
        assert!((rep.findings[0].angle_error - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

        let mut no_pose = r.clone();
        no_pose.pose = None;
        let rep = validate_consistency(&no_pose, 1e-6);
        assert!(rep.findings.is_empty());
        assert_eq!(rep.notes, vec!["pose absent".to_string()]);
    }

    #[test]
    fn level_parse_and_order() {
        assert!(SupervisionLevel::N < SupervisionLevel::H);
        assert!(SupervisionLevel::H < SupervisionLevel::OH);
        for l in SupervisionLevel::ALL {
            assert_eq!(l.as_str().parse::<SupervisionLevel>().unwrap(), l);
        }
        assert!("X".parse::<SupervisionLevel>().is_err());
    }
}
