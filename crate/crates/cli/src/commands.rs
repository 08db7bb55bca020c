use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use offnadir_core::dataset::{
    grade_sample, load_dataset, save_dataset, validate_consistency, SupervisionLevel,
};
use offnadir_core::geometry::ImagePose;
use offnadir_core::losses::{hybrid_loss, level_loss, LevelComponents, LossWeights};
use offnadir_core::metrics::{evaluate, EvalParams, EvalReport};
use offnadir_core::pbc::{default_box_strategies, pseudo_boxes, PseudoBox, StrategySelection};
use offnadir_core::reconstruct::{reconstruct, write_obj, ReconstructParams};
use offnadir_core::rofe::{default_footprint_extractors, extract_record, FootprintOutput};
use offnadir_core::synth::{degrade_dataset, generate_scenes, SynthConfig};

use crate::args::*;

pub fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Grade(a) => grade(a),
        Command::Validate(a) => validate(a),
        Command::Degrade(a) => degrade(a),
        Command::Pbc(a) => pbc(a),
        Command::Footprint(a) => footprint(a),
        Command::Eval(a) => eval(a),
        Command::Loss(a) => loss(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes to `path`, or to standard output without one.
fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            let mut out = std::io::stdout().lock();
            match out
                .write_all(contents.as_bytes())
                .and_then(|()| out.flush())
            {
                // a closed pipe (`| head`) is the reader's choice, not a failure
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let d = generate_scenes(&cfg)?;
    save_dataset(&d, &a.out)?;
    println!(
        "wrote {} images, {} buildings to {}",
        d.records.len(),
        d.instance_count(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct GradeEntry<'a> {
    image_id: &'a str,
    level: SupervisionLevel,
}

#[derive(Serialize)]
struct GradeReport<'a> {
    images: Vec<GradeEntry<'a>>,
    counts: BTreeMap<&'static str, usize>,
}

fn grade(a: &GradeArgs) -> Result<()> {
    let d = load_dataset(&a.input)?;
    let levels = d
        .records
        .par_iter()
        .map(grade_sample)
        .collect::<offnadir_core::Result<Vec<_>>>()?;
    let mut counts: BTreeMap<&'static str, usize> = SupervisionLevel::ALL
        .iter()
        .map(|l| (l.as_str(), 0))
        .collect();
    let width = d
        .records
        .iter()
        .map(|r| r.image_id.len())
        .max()
        .unwrap_or(0)
        .max("image_id".len());
    let mut table = format!("{:<width$}  level\n", "image_id");
    for (r, level) in d.records.iter().zip(&levels) {
        *counts.entry(level.as_str()).or_default() += 1;
        table.push_str(&format!("{:<width$}  {}\n", r.image_id, level));
    }
    let summary: Vec<String> = SupervisionLevel::ALL
        .iter()
        .map(|l| format!("{}={}", l, counts[l.as_str()]))
        .collect();
    table.push_str(&format!("counts: {}\n", summary.join(" ")));
    emit(None, &table)?;
    if let Some(out) = &a.out {
        let report = GradeReport {
            images: d
                .records
                .iter()
                .zip(&levels)
                .map(|(r, &level)| GradeEntry {
                    image_id: &r.image_id,
                    level,
                })
                .collect(),
            counts,
        };
        write_file(out, &to_json(&report)?)?;
    }
    Ok(())
}

fn validate(a: &ValidateArgs) -> Result<()> {
    if !a.tol.is_finite() || a.tol < 0.0 {
        bail!("--tol must be >= 0, got {}", a.tol);
    }
    let d = load_dataset(&a.input)?;
    let reports: Vec<_> = d
        .records
        .par_iter()
        .map(|r| validate_consistency(r, a.tol))
        .collect();
    let flagged: usize = reports.iter().map(|r| r.findings.len()).sum();
    let mut text = String::new();
    for r in &reports {
        for f in &r.findings {
            text.push_str(&format!(
                "{} instance {}: magnitude excess {:.6} px, angle error {:.6} rad\n",
                r.image_id, f.instance, f.magnitude_excess, f.angle_error
            ));
        }
        for n in &r.notes {
            text.push_str(&format!("{}: {}\n", r.image_id, n));
        }
    }
    text.push_str(&format!(
        "{} images, {} instances, {} inconsistent\n",
        d.records.len(),
        d.instance_count(),
        flagged
    ));
    emit(None, &text)?;
    if let Some(out) = &a.out {
        write_file(out, &to_json(&reports)?)?;
    }
    if flagged > 0 {
        bail!("{flagged} instance(s) inconsistent with the image pose");
    }
    Ok(())
}

fn degrade(a: &DegradeArgs) -> Result<()> {
    let d = load_dataset(&a.input)?;
    let out = degrade_dataset(&d, a.frac_oh, a.frac_h, a.seed)?;
    save_dataset(&out, &a.out)?;
    Ok(())
}

#[derive(Serialize)]
struct ImageBoxes<'a> {
    image_id: &'a str,
    boxes: Vec<PseudoBox>,
}

#[derive(Serialize)]
struct BoxesDoc<'a> {
    images: Vec<ImageBoxes<'a>>,
}

fn pbc(a: &PbcArgs) -> Result<()> {
    let d = load_dataset(&a.input)?;
    let registry = default_box_strategies(a.expand_ratio);
    let selection = match a.strategy {
        BoxStrategy::Auto => StrategySelection::Auto,
        BoxStrategy::Pose => StrategySelection::Named("pose"),
        BoxStrategy::Expand => StrategySelection::Named("expand"),
    };
    let images = d
        .records
        .par_iter()
        .map(|r| -> Result<ImageBoxes<'_>> {
            let pose = match (a.tan_theta, a.phi) {
                (Some(t), Some(phi)) => {
                    let s = r.pose.map_or(a.scale_s, |p| p.scale_s);
                    Some(ImagePose::new(t, phi, s)?)
                }
                _ => None,
            };
            Ok(ImageBoxes {
                image_id: &r.image_id,
                boxes: pseudo_boxes(r, &registry, selection, pose)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    emit(a.out.as_deref(), &to_json(&BoxesDoc { images })?)
}

#[derive(Serialize)]
struct FootprintEntry {
    instance: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    polygon: Option<Vec<f64>>,
    /// Row-major run lengths, starting with a run of zeros.
    #[serde(skip_serializing_if = "Option::is_none")]
    rle: Option<Vec<u32>>,
}

#[derive(Serialize)]
struct ImageFootprints {
    image_id: String,
    width: u32,
    height: u32,
    footprints: Vec<FootprintEntry>,
    skipped: Vec<usize>,
}

#[derive(Serialize)]
struct FootprintsDoc {
    mode: &'static str,
    images: Vec<ImageFootprints>,
}

fn footprint(a: &FootprintArgs) -> Result<()> {
    let d = load_dataset(&a.input)?;
    let registry = default_footprint_extractors();
    let extractor = registry.get(a.mode.extractor_name())?;
    let images: Vec<ImageFootprints> = d
        .records
        .par_iter()
        .map(|r| {
            let rf = extract_record(r, extractor);
            ImageFootprints {
                image_id: rf.image_id,
                width: rf.width,
                height: rf.height,
                footprints: rf
                    .footprints
                    .into_iter()
                    .map(|(instance, out)| match out {
                        FootprintOutput::Polygon(p) => FootprintEntry {
                            instance,
                            polygon: Some(p.to_flat()),
                            rle: None,
                        },
                        FootprintOutput::Mask(m) => FootprintEntry {
                            instance,
                            polygon: None,
                            rle: Some(m.to_rle()),
                        },
                    })
                    .collect(),
                skipped: rf.skipped,
            }
        })
        .collect();
    let doc = FootprintsDoc {
        mode: a.mode.extractor_name(),
        images,
    };
    emit(a.out.as_deref(), &to_json(&doc)?)
}

fn summary_line(r: &EvalReport) -> String {
    format!(
        "F1 {:.4}  P {:.4}  R {:.4}  EPE {:.4} px  height MAE {:.4} m  RMSE {:.4} m  \
         off-nadir MAE {:.4} deg  offset-angle MAE {:.4} deg  TP {} FP {} FN {}\n",
        r.f1,
        r.precision,
        r.recall,
        r.epe,
        r.height_mae,
        r.height_rmse,
        r.offnadir_mae_deg,
        r.offsetangle_mae_deg,
        r.tp,
        r.fp,
        r.fn_
    )
}

fn eval(a: &EvalArgs) -> Result<()> {
    let pred = load_dataset(&a.pred)?;
    let gt = load_dataset(&a.gt)?;
    let ev = evaluate(
        &pred,
        &gt,
        &EvalParams {
            iou_threshold: a.iou,
        },
    )?;
    let json = to_json(&ev)?;
    match &a.report {
        Some(path) => {
            write_file(path, &json)?;
            emit(None, &summary_line(&ev.aggregate))
        }
        None => emit(None, &json),
    }
}

struct LossSample {
    id: String,
    level: SupervisionLevel,
    components: LevelComponents,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LossInput {
    samples: Vec<serde_json::Map<String, serde_json::Value>>,
}

// `#[serde(flatten)]` would silently drop misspelled component names, so
// the sample keys are split by hand.
fn parse_sample(
    index: usize,
    mut raw: serde_json::Map<String, serde_json::Value>,
) -> Result<LossSample> {
    let id = match raw.remove("id") {
        Some(serde_json::Value::String(s)) => s,
        Some(other) => bail!("sample {index}: id must be a string, got {other}"),
        None => bail!("sample {index}: missing id"),
    };
    let level = raw
        .remove("level")
        .with_context(|| format!("sample `{id}`: missing level"))?;
    let level: SupervisionLevel =
        serde_json::from_value(level).with_context(|| format!("sample `{id}`: bad level"))?;
    let components = serde_json::from_value(serde_json::Value::Object(raw))
        .with_context(|| format!("sample `{id}`"))?;
    Ok(LossSample {
        id,
        level,
        components,
    })
}

#[derive(Serialize)]
struct SampleLoss<'a> {
    id: &'a str,
    level: SupervisionLevel,
    loss: f64,
}

#[derive(Serialize)]
struct LossReport<'a> {
    weights: LossWeights,
    samples: Vec<SampleLoss<'a>>,
    total: f64,
}

fn loss(a: &LossArgs) -> Result<()> {
    let input: LossInput = read_json(&a.input)?;
    let input: Vec<LossSample> = input
        .samples
        .into_iter()
        .enumerate()
        .map(|(i, raw)| parse_sample(i, raw))
        .collect::<Result<_>>()?;
    let weights = match &a.weights {
        Some(p) => read_json::<LossWeights>(p)?,
        None => LossWeights::default(),
    };
    weights.validate()?;
    let mut samples = Vec::with_capacity(input.len());
    for s in &input {
        let loss = level_loss(s.level, &s.components, &weights)
            .with_context(|| format!("sample `{}`", s.id))?;
        samples.push(SampleLoss {
            id: &s.id,
            level: s.level,
            loss,
        });
    }
    let graded: Vec<_> = input.iter().map(|s| (s.level, s.components)).collect();
    let total = hybrid_loss(&graded, &weights)?;

    let mut text = String::new();
    for s in &samples {
        text.push_str(&format!("{}\t{}\t{:.12}\n", s.id, s.level, s.loss));
    }
    text.push_str(&format!("total\t\t{total:.12}\n"));
    emit(None, &text)?;
    if let Some(out) = &a.out {
        write_file(
            out,
            &to_json(&LossReport {
                weights,
                samples,
                total,
            })?,
        )?;
    }
    Ok(())
}

fn reconstruct_cmd(a: &ReconstructArgs) -> Result<()> {
    let d = load_dataset(&a.input)?;
    let params = ReconstructParams {
        epsilon: a.epsilon,
        default_height: a.default_height,
        scale_s: a.scale_s,
    };
    let rec = reconstruct(&d, &params)?;
    write_file(&a.out, &write_obj(&rec.meshes))?;
    for s in &rec.skipped {
        eprintln!(
            "skipped {} instance {}: {}",
            s.image_id, s.instance, s.reason
        );
    }
    println!(
        "wrote {} meshes to {} ({} skipped)",
        rec.meshes.len(),
        a.out.display(),
        rec.skipped.len()
    );
    Ok(())
}
