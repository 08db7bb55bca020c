//! Instance-level evaluation of predicted buildings against ground truth.
//!
//! Footprints are compared as pixel masks on the ground-truth image grid.
//! Predictions are matched greedily in descending score order, one-to-one,
//! at an IoU threshold (0.5 by default). Counts and errors are
//! micro-averaged over the whole dataset.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{BuildingInstance, Dataset, SampleRecord};
use crate::error::{Error, Result};
use crate::geometry::{circular_difference, ImagePose, Polygon2D};
use crate::synth::{polygon_spans, rasterize_polygon, BitMask, Span};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

pub fn mask_iou(a: &BitMask, b: &BitMask) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "masks {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

/// IoU of two polygons rasterized on a `grid = (width, height)` canvas.
pub fn polygon_iou(a: &Polygon2D, b: &Polygon2D, grid: (u32, u32)) -> f64 {
    let (w, h) = grid;
    mask_iou(&rasterize_polygon(a, w, h), &rasterize_polygon(b, w, h)).expect("same grid")
}

/// Run-length view of a rasterized footprint; cheap to intersect.
#[derive(Debug, Clone)]
struct SpanMask {
    spans: Vec<Span>,
    area: u64,
}

impl SpanMask {
    fn new(p: &Polygon2D, grid: (u32, u32)) -> Self {
        let spans = polygon_spans(p, grid.0, grid.1);
        let area = spans.iter().map(|s| s.len() as u64).sum();
        Self { spans, area }
    }

    fn rows(&self) -> Option<(u32, u32)> {
        Some((self.spans.first()?.y, self.spans.last()?.y))
    }

    fn intersection(&self, other: &SpanMask) -> u64 {
        match (self.rows(), other.rows()) {
            (Some((a0, a1)), Some((b0, b1))) if a0 <= b1 && b0 <= a1 => {}
            _ => return 0,
        }
        let (a, b) = (&self.spans, &other.spans);
        let (mut i, mut j, mut total) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            let (sa, sb) = (a[i], b[j]);
            if sa.y != sb.y {
                if sa.y < sb.y {
                    i += 1;
                } else {
                    j += 1;
                }
                continue;
            }
            let lo = sa.x0.max(sb.x0);
            let hi = sa.x1.min(sb.x1);
            if hi > lo {
                total += (hi - lo) as u64;
            }
            if sa.x1 <= sb.x1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }

    fn iou(&self, other: &SpanMask) -> f64 {
        let inter = self.intersection(other);
        let union = self.area + other.area - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.pairs.len()
    }

    pub fn fp(&self) -> usize {
        self.unmatched_preds.len()
    }

    pub fn fn_count(&self) -> usize {
        self.unmatched_gts.len()
    }
}

fn footprints<'a>(insts: &'a [BuildingInstance], side: &str) -> Result<Vec<&'a Polygon2D>> {
    insts
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            inst.footprint
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("{side} instance {i} has no footprint")))
        })
        .collect()
}

/// Greedy one-to-one matching of predicted to ground-truth footprints.
///
/// Predictions are visited by descending score (missing scores count as 1,
/// ties keep input order); each takes the still-unmatched ground truth of
/// highest IoU (lowest index on ties) if that IoU is positive and at least
/// `iou_threshold`.
pub fn match_instances(
    preds: &[BuildingInstance],
    gts: &[BuildingInstance],
    iou_threshold: f64,
    grid: (u32, u32),
) -> Result<MatchResult> {
    let pred_masks: Vec<SpanMask> = footprints(preds, "predicted")?
        .into_iter()
        .map(|p| SpanMask::new(p, grid))
        .collect();
    let gt_masks: Vec<SpanMask> = footprints(gts, "ground-truth")?
        .into_iter()
        .map(|p| SpanMask::new(p, grid))
        .collect();

    let mut order: Vec<usize> = (0..preds.len()).collect();
    let score = |i: usize| preds[i].score.unwrap_or(1.0);
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)));

    let mut taken = vec![false; gts.len()];
    let mut result = MatchResult::default();
    for p in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gm) in gt_masks.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let iou = pred_masks[p].iou(gm);
            if iou > 0.0 && iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        match best {
            Some((g, iou)) => {
                taken[g] = true;
                result.pairs.push(MatchPair {
                    pred: p,
                    gt: g,
                    iou,
                });
            }
            None => result.unmatched_preds.push(p),
        }
    }
    result.unmatched_preds.sort_unstable();
    result.unmatched_gts = (0..gts.len()).filter(|&g| !taken[g]).collect();
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn prf_from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

pub fn detection_prf(m: &MatchResult) -> Prf {
    prf_from_counts(m.tp(), m.fp(), m.fn_count())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Epe {
    pub epe: f64,
    /// Matched pairs with offsets on both sides.
    pub count: usize,
    /// No pair contributed; `epe` is reported as 0.
    pub empty: bool,
}

/// Mean end-point error over matched pairs carrying offsets on both sides.
pub fn offset_epe(m: &MatchResult, preds: &[BuildingInstance], gts: &[BuildingInstance]) -> Epe {
    let (sum, count) = epe_sums(m, preds, gts);
    Epe {
        epe: if count == 0 { 0.0 } else { sum / count as f64 },
        count,
        empty: count == 0,
    }
}

fn epe_sums(m: &MatchResult, preds: &[BuildingInstance], gts: &[BuildingInstance]) -> (f64, usize) {
    m.pairs
        .iter()
        .filter_map(|p| Some((preds[p.pred].offset? - gts[p.gt].offset?).norm()))
        .fold((0.0, 0), |(s, n), e| (s + e, n + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeightErrors {
    pub mae: f64,
    pub rmse: f64,
    pub count: usize,
}

pub fn height_errors(
    m: &MatchResult,
    preds: &[BuildingInstance],
    gts: &[BuildingInstance],
) -> HeightErrors {
    let (abs, sq, count) = height_sums(m, preds, gts);
    finish_heights(abs, sq, count)
}

fn height_sums(
    m: &MatchResult,
    preds: &[BuildingInstance],
    gts: &[BuildingInstance],
) -> (f64, f64, usize) {
    m.pairs
        .iter()
        .filter_map(|p| Some(preds[p.pred].height? - gts[p.gt].height?))
        .fold((0.0, 0.0, 0), |(a, s, n), d| {
            (a + d.abs(), s + d * d, n + 1)
        })
}

fn finish_heights(abs: f64, sq: f64, count: usize) -> HeightErrors {
    if count == 0 {
        return HeightErrors {
            mae: 0.0,
            rmse: 0.0,
            count,
        };
    }
    let n = count as f64;
    HeightErrors {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        count,
    }
}

/// Mean absolute errors in degrees: off-nadir angle (through arctan of the
/// stored tangents) and circular offset angle.
pub fn angle_errors(pred_poses: &[ImagePose], gt_poses: &[ImagePose]) -> Result<(f64, f64)> {
    if pred_poses.len() != gt_poses.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted poses vs {} ground-truth poses",
            pred_poses.len(),
            gt_poses.len()
        )));
    }
    if pred_poses.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (ona, ova) = angle_sums(pred_poses.iter().zip(gt_poses));
    let n = pred_poses.len() as f64;
    Ok((ona / n, ova / n))
}

fn angle_sums<'a>(pairs: impl Iterator<Item = (&'a ImagePose, &'a ImagePose)>) -> (f64, f64) {
    pairs.fold((0.0, 0.0), |(ona, ova), (p, g)| {
        (
            ona + (p.theta() - g.theta()).abs().to_degrees(),
            ova + circular_difference(p.phi, g.phi).to_degrees(),
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    pub iou_threshold: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Pixels.
    pub epe: f64,
    /// Meters.
    pub height_mae: f64,
    pub height_rmse: f64,
    pub offnadir_mae_deg: f64,
    pub offsetangle_mae_deg: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub epe_count: usize,
    pub height_count: usize,
    pub angle_count: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    tp: usize,
    fp: usize,
    fn_: usize,
    epe_sum: f64,
    epe_n: usize,
    h_abs: f64,
    h_sq: f64,
    h_n: usize,
    ona_sum: f64,
    ova_sum: f64,
    ang_n: usize,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            epe_sum: self.epe_sum + o.epe_sum,
            epe_n: self.epe_n + o.epe_n,
            h_abs: self.h_abs + o.h_abs,
            h_sq: self.h_sq + o.h_sq,
            h_n: self.h_n + o.h_n,
            ona_sum: self.ona_sum + o.ona_sum,
            ova_sum: self.ova_sum + o.ova_sum,
            ang_n: self.ang_n + o.ang_n,
        }
    }

    fn report(&self) -> EvalReport {
        let prf = prf_from_counts(self.tp, self.fp, self.fn_);
        let heights = finish_heights(self.h_abs, self.h_sq, self.h_n);
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        EvalReport {
            f1: prf.f1,
            precision: prf.precision,
            recall: prf.recall,
            epe: mean(self.epe_sum, self.epe_n),
            height_mae: heights.mae,
            height_rmse: heights.rmse,
            offnadir_mae_deg: mean(self.ona_sum, self.ang_n),
            offsetangle_mae_deg: mean(self.ova_sum, self.ang_n),
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            epe_count: self.epe_n,
            height_count: self.h_n,
            angle_count: self.ang_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageEval {
    pub image_id: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub aggregate: EvalReport,
    pub per_image: Vec<ImageEval>,
    pub iou_threshold: f64,
}

fn evaluate_record(pred: &SampleRecord, gt: &SampleRecord, params: &EvalParams) -> Result<Tally> {
    let wrap = |e: Error| Error::Record {
        image_id: gt.image_id.clone(),
        instance: None,
        message: e.to_string(),
    };
    let m = match_instances(
        &pred.instances,
        &gt.instances,
        params.iou_threshold,
        (gt.width, gt.height),
    )
    .map_err(wrap)?;
    let (epe_sum, epe_n) = epe_sums(&m, &pred.instances, &gt.instances);
    let (h_abs, h_sq, h_n) = height_sums(&m, &pred.instances, &gt.instances);
    let (ona_sum, ova_sum, ang_n) = match (&pred.pose, &gt.pose) {
        (Some(p), Some(g)) => {
            let (a, b) = angle_sums(std::iter::once((p, g)));
            (a, b, 1)
        }
        _ => (0.0, 0.0, 0),
    };
    Ok(Tally {
        tp: m.tp(),
        fp: m.fp(),
        fn_: m.fn_count(),
        epe_sum,
        epe_n,
        h_abs,
        h_sq,
        h_n,
        ona_sum,
        ova_sum,
        ang_n,
    })
}

/// Evaluates every ground-truth image against the prediction with the same
/// id. Both datasets must contain exactly the same image ids.
pub fn evaluate(pred: &Dataset, gt: &Dataset, params: &EvalParams) -> Result<Evaluation> {
    if !(0.0..=1.0).contains(&params.iou_threshold) {
        return Err(Error::invalid(format!(
            "IoU threshold must be in [0, 1], got {}",
            params.iou_threshold
        )));
    }
    let gt_ids: HashSet<&str> = gt.records.iter().map(|r| r.image_id.as_str()).collect();
    if let Some(r) = pred
        .records
        .iter()
        .find(|r| !gt_ids.contains(r.image_id.as_str()))
    {
        return Err(Error::invalid(format!(
            "prediction image `{}` has no ground truth",
            r.image_id
        )));
    }
    let pairs = gt
        .records
        .iter()
        .map(|g| {
            pred.record(&g.image_id).map(|p| (p, g)).ok_or_else(|| {
                Error::invalid(format!(
                    "ground-truth image `{}` has no prediction",
                    g.image_id
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let tallies = pairs
        .par_iter()
        .map(|(p, g)| evaluate_record(p, g, params))
        .collect::<Result<Vec<_>>>()?;

    // sequential reduction keeps the sums independent of scheduling
    let total = tallies
        .iter()
        .fold(Tally::default(), |acc, t| acc.merge(*t));
    let per_image = pairs
        .iter()
        .zip(&tallies)
        .map(|((_, g), t)| ImageEval {
            image_id: g.image_id.clone(),
            report: t.report(),
        })
        .collect();
    Ok(Evaluation {
        aggregate: total.report(),
        per_image,
        iou_threshold: params.iou_threshold,
    })
}
