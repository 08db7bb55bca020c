//! Training losses and their composition over supervision levels.
//!
//! Detection-network losses (RPN, R-CNN, mask head, offset head) are
//! computed elsewhere and enter as plain scalars. Per-instance losses are
//! reduced to one value per sample by the arithmetic mean.

use serde::{Deserialize, Serialize};

use crate::dataset::SupervisionLevel;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::registry::{Named, Registry};
use crate::synth::BitMask;

/// Floor and ceiling applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Tolerance on `‖v_gt‖ = 1` for the offset-angle loss.
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub alpha5: f64,
    pub alpha6: f64,
    pub alpha7: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub lambda1: f64,
    pub smooth_l1_beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 32.0,
            alpha3: 1.0,
            alpha4: 1.0,
            alpha5: 16.0,
            alpha6: 1.0,
            alpha7: 8.0,
            beta1: 1.0,
            beta2: 1.0,
            beta3: 16.0,
            lambda1: 0.1,
            smooth_l1_beta: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("alpha4", self.alpha4),
            ("alpha5", self.alpha5),
            ("alpha6", self.alpha6),
            ("alpha7", self.alpha7),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
            ("lambda1", self.lambda1),
        ];
        for (name, w) in named {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!(
                    "weight {name} must be finite and >= 0, got {w}"
                )));
            }
        }
        if !self.smooth_l1_beta.is_finite() || self.smooth_l1_beta <= 0.0 {
            return Err(Error::invalid("smooth_l1_beta must be > 0"));
        }
        Ok(())
    }

    /// Whether the incremental and expanded forms of the OH objective
    /// coincide (`α1 = 1, α3 = β1, α4 = β2, α5 = β3`).
    pub fn oh_forms_agree(&self) -> bool {
        self.alpha1 == 1.0
            && self.alpha3 == self.beta1
            && self.alpha4 == self.beta2
            && self.alpha5 == self.beta3
    }
}

/// Losses of the detection network, supplied from outside.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalLossInputs {
    /// Region proposal network.
    pub l_rp: f64,
    /// Box head.
    pub l_rc: f64,
    /// Roof mask head.
    pub l_mh: f64,
    /// Offset head.
    pub l_o: f64,
}

impl ExternalLossInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("l_rp", self.l_rp),
            ("l_rc", self.l_rc),
            ("l_mh", self.l_mh),
            ("l_o", self.l_o),
        ] {
            check_component(name, v)?;
        }
        Ok(())
    }
}

fn check_component(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::invalid(format!(
            "loss component {name} must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

/// Per-sample loss values; which ones are required depends on the level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelComponents {
    /// Footprint mask loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_f: Option<f64>,
    /// Height loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_h: Option<f64>,
    /// Off-nadir angle loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_ona: Option<f64>,
    /// Offset angle loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_ova: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_rp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_rc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_mh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_o: Option<f64>,
}

impl LevelComponents {
    fn require(&self, level: SupervisionLevel, name: &'static str) -> Result<f64> {
        let v = match name {
            "l_f" => self.l_f,
            "l_h" => self.l_h,
            "l_ona" => self.l_ona,
            "l_ova" => self.l_ova,
            "l_rp" => self.l_rp,
            "l_rc" => self.l_rc,
            "l_mh" => self.l_mh,
            "l_o" => self.l_o,
            _ => unreachable!("unknown component {name}"),
        };
        let v = v.ok_or(Error::MissingComponent {
            level: level.as_str(),
            component: name,
        })?;
        check_component(name, v)?;
        Ok(v)
    }

    pub fn external(&self, level: SupervisionLevel) -> Result<ExternalLossInputs> {
        Ok(ExternalLossInputs {
            l_rp: self.require(level, "l_rp")?,
            l_rc: self.require(level, "l_rc")?,
            l_mh: self.require(level, "l_mh")?,
            l_o: self.require(level, "l_o")?,
        })
    }
}

/// Mean smooth-L1 over paired elements; quadratic below `beta`.
pub fn smooth_l1(pred: &[f64], gt: &[f64], beta: f64) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "smooth_l1 over {} predictions and {} targets",
            pred.len(),
            gt.len()
        )));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::invalid(format!(
            "smooth_l1 beta must be > 0, got {beta}"
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let d = (p - g).abs();
            if d < beta {
                0.5 * d * d / beta
            } else {
                d - 0.5 * beta
            }
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Smooth-L1 over the stacked `(dx, dy)` components of offset pairs.
pub fn offset_loss(pred: &[Vec2], gt: &[Vec2], beta: f64) -> Result<f64> {
    let flat = |vs: &[Vec2]| vs.iter().flat_map(|v| [v.dx, v.dy]).collect::<Vec<_>>();
    smooth_l1(&flat(pred), &flat(gt), beta)
}

/// Row-major per-pixel foreground probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbGrid {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl ProbGrid {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for a {width}x{height} grid",
                data.len()
            )));
        }
        if let Some(p) = data.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn uniform(width: u32, height: u32, p: f64) -> Result<Self> {
        Self::new(width, height, vec![p; width as usize * height as usize])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Mean binary cross entropy of a probability grid against a mask.
pub fn mask_cross_entropy(pred: &ProbGrid, gt: &BitMask) -> Result<f64> {
    if pred.width != gt.width() || pred.height != gt.height() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs mask {}x{}",
            pred.width,
            pred.height,
            gt.width(),
            gt.height()
        )));
    }
    if pred.data.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .data
        .iter()
        .zip(gt.bits())
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / pred.data.len() as f64)
}

/// `‖v_pred − v_gt‖₁ + λ·|‖v_pred‖₂ − 1|` against a unit ground truth.
pub fn offset_angle_loss(v_pred: Vec2, v_gt_unit: Vec2, lambda1: f64) -> Result<f64> {
    if (v_gt_unit.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid(format!(
            "ground-truth direction must be a unit vector, norm is {}",
            v_gt_unit.norm()
        )));
    }
    Ok((v_pred - v_gt_unit).l1() + lambda1 * (v_pred.norm() - 1.0).abs())
}

/// Mean offset-angle loss over `(predicted direction, ground-truth offset)`
/// pairs. Ground-truth offsets of zero length carry no direction and are
/// skipped; returns the loss and the number of pairs used.
pub fn mean_offset_angle_loss(pairs: &[(Vec2, Vec2)], lambda1: f64) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    let mut used = 0;
    for &(pred, gt) in pairs {
        let n = gt.norm();
        if n == 0.0 {
            continue;
        }
        sum += offset_angle_loss(pred, gt * (1.0 / n), lambda1)?;
        used += 1;
    }
    Ok((if used == 0 { 0.0 } else { sum / used as f64 }, used))
}

pub fn off_nadir_loss(tan_pred: f64, tan_gt: f64) -> f64 {
    (tan_pred - tan_gt).abs()
}

pub fn height_loss(h_pred: f64, h_gt: f64) -> f64 {
    (h_pred - h_gt).abs()
}

/// Mean absolute height error over `(pred, gt)` pairs; zero when empty.
pub fn mean_height_loss(pairs: &[(f64, f64)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|&(p, g)| height_loss(p, g)).sum::<f64>() / pairs.len() as f64
}

/// Loss of the fully supervised offset-aware detector.
pub fn loft_loss(x: &ExternalLossInputs, w: &LossWeights) -> f64 {
    x.l_rp + w.beta1 * x.l_rc + w.beta2 * x.l_mh + w.beta3 * x.l_o
}

/// Objective applied to samples of one supervision level.
pub trait LevelObjective: Named + Send + Sync {
    fn level(&self) -> SupervisionLevel;
    fn loss(&self, c: &LevelComponents, w: &LossWeights) -> Result<f64>;
}

/// Footprint mask loss only.
#[derive(Debug, Default)]
pub struct FootprintOnly;

impl Named for FootprintOnly {
    fn name(&self) -> &'static str {
        "N"
    }
}

impl LevelObjective for FootprintOnly {
    fn level(&self) -> SupervisionLevel {
        SupervisionLevel::N
    }

    fn loss(&self, c: &LevelComponents, _w: &LossWeights) -> Result<f64> {
        c.require(SupervisionLevel::N, "l_f")
    }
}

/// Adds the proposal loss (supervised by pseudo boxes) and the height loss.
#[derive(Debug, Default)]
pub struct HeightSupervised;

impl Named for HeightSupervised {
    fn name(&self) -> &'static str {
        "H"
    }
}

impl LevelObjective for HeightSupervised {
    fn level(&self) -> SupervisionLevel {
        SupervisionLevel::H
    }

    fn loss(&self, c: &LevelComponents, w: &LossWeights) -> Result<f64> {
        let l = SupervisionLevel::H;
        let base = FootprintOnly.loss(c, w)?;
        Ok(base + w.alpha1 * c.require(l, "l_rp")? + w.alpha2 * c.require(l, "l_h")?)
    }
}

/// Adds box, mask, offset and both angle losses on top of the H objective.
#[derive(Debug, Default)]
pub struct FullySupervised;

impl Named for FullySupervised {
    fn name(&self) -> &'static str {
        "OH"
    }
}

impl LevelObjective for FullySupervised {
    fn level(&self) -> SupervisionLevel {
        SupervisionLevel::OH
    }

    fn loss(&self, c: &LevelComponents, w: &LossWeights) -> Result<f64> {
        let l = SupervisionLevel::OH;
        let h = HeightSupervised.loss(c, w)?;
        Ok(h + w.alpha3 * c.require(l, "l_rc")?
            + w.alpha4 * c.require(l, "l_mh")?
            + w.alpha5 * c.require(l, "l_o")?
            + w.alpha6 * c.require(l, "l_ona")?
            + w.alpha7 * c.require(l, "l_ova")?)
    }
}

pub fn default_level_objectives() -> Registry<dyn LevelObjective> {
    Registry::<dyn LevelObjective>::new("level objective")
        .with(Box::new(FootprintOnly))
        .with(Box::new(HeightSupervised))
        .with(Box::new(FullySupervised))
}

fn objective_for(level: SupervisionLevel) -> &'static dyn LevelObjective {
    match level {
        SupervisionLevel::N => &FootprintOnly,
        SupervisionLevel::H => &HeightSupervised,
        SupervisionLevel::OH => &FullySupervised,
    }
}

pub fn level_loss(level: SupervisionLevel, c: &LevelComponents, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    objective_for(level).loss(c, w)
}

/// OH objective written as the detector loss plus the footprint, height
/// and angle terms. Equals [`level_loss`] at `OH` whenever
/// [`LossWeights::oh_forms_agree`] holds.
pub fn oh_loss_expanded(c: &LevelComponents, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    let l = SupervisionLevel::OH;
    let ext = c.external(l)?;
    Ok(loft_loss(&ext, w)
        + c.require(l, "l_f")?
        + w.alpha2 * c.require(l, "l_h")?
        + w.alpha6 * c.require(l, "l_ona")?
        + w.alpha7 * c.require(l, "l_ova")?)
}

/// Sum of per-sample level losses.
pub fn hybrid_loss(graded: &[(SupervisionLevel, LevelComponents)], w: &LossWeights) -> Result<f64> {
    w.validate()?;
    graded
        .iter()
        .map(|(level, c)| objective_for(*level).loss(c, w))
        .sum()
}
