//! Oriented anchor generation and positive/negative/neutral assignment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rotated_iou, RotatedBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnchorError {
    #[error("anchor grid must have at least one cell (got {grid_w}x{grid_h})")]
    EmptyGrid { grid_w: usize, grid_h: usize },
    #[error("anchor config field `{0}` must be a non-empty list")]
    EmptyList(&'static str),
    #[error("anchor config field `{0}` must contain only finite positive values")]
    NonPositive(&'static str),
    #[error("stride must be finite and positive")]
    BadStride,
    #[error("positive threshold {pos} must exceed negative threshold {neg}")]
    Thresholds { pos: f64, neg: f64 },
}

/// Anchor layout for one feature-map level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorConfig {
    /// Degrees.
    pub orientations: Vec<f64>,
    /// Pixels; the side of the square anchor with ratio 1.
    pub scales: Vec<f64>,
    /// Width-to-height ratios.
    pub aspect_ratios: Vec<f64>,
    /// Pixels per feature-map cell.
    pub stride: f64,
    pub grid_w: usize,
    pub grid_h: usize,
}

impl Default for AnchorConfig {
    /// Seven orientations from -45 to 45 degrees, scales 128/256/512 and
    /// ratios 1:1, 1:2, 2:1 on a single cell with stride 16.
    fn default() -> Self {
        Self {
            orientations: vec![-45.0, -30.0, -15.0, 0.0, 15.0, 30.0, 45.0],
            scales: vec![128.0, 256.0, 512.0],
            aspect_ratios: vec![1.0, 0.5, 2.0],
            stride: 16.0,
            grid_w: 1,
            grid_h: 1,
        }
    }
}

impl AnchorConfig {
    /// Anchors per cell.
    pub fn per_cell(&self) -> usize {
        self.orientations.len() * self.scales.len() * self.aspect_ratios.len()
    }

    pub fn validate(&self) -> Result<(), AnchorError> {
        if self.grid_w == 0 || self.grid_h == 0 {
            return Err(AnchorError::EmptyGrid { grid_w: self.grid_w, grid_h: self.grid_h });
        }
        for (name, list) in [
            ("orientations", &self.orientations),
            ("scales", &self.scales),
            ("aspect_ratios", &self.aspect_ratios),
        ] {
            if list.is_empty() {
                return Err(AnchorError::EmptyList(name));
            }
        }
        if !self.orientations.iter().all(|v| v.is_finite()) {
            return Err(AnchorError::NonPositive("orientations"));
        }
        for (name, list) in [("scales", &self.scales), ("aspect_ratios", &self.aspect_ratios)] {
            if !list.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(AnchorError::NonPositive(name));
            }
        }
        if !(self.stride.is_finite() && self.stride > 0.0) {
            return Err(AnchorError::BadStride);
        }
        Ok(())
    }
}

/// Tiles the configured anchors over the grid.
///
/// Ordering is row-major over cells (`j` outer, `i` inner), then orientation,
/// scale and ratio. A ratio `r = w:h` keeps the area at `scale^2`.
pub fn generate_anchors(cfg: &AnchorConfig) -> Result<Vec<RotatedBox>, AnchorError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.grid_w * cfg.grid_h * cfg.per_cell());
    for j in 0..cfg.grid_h {
        for i in 0..cfg.grid_w {
            let x_c = (i as f64 + 0.5) * cfg.stride;
            let y_c = (j as f64 + 0.5) * cfg.stride;
            for &theta in &cfg.orientations {
                for &s in &cfg.scales {
                    for &r in &cfg.aspect_ratios {
                        let root = r.sqrt();
                        out.push(RotatedBox { x_c, y_c, w: s * root, h: s / root, theta });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorCategory {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorAssignment {
    pub anchor_index: usize,
    pub category: AnchorCategory,
    pub matched_gt: Option<usize>,
    /// IoU with `matched_gt`, or the anchor's best IoU when unmatched.
    pub iou: f64,
}

/// Thresholds used by [`assign_anchors`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignThresholds {
    pub positive: f64,
    pub negative: f64,
}

impl Default for AssignThresholds {
    fn default() -> Self {
        Self { positive: 0.7, negative: 0.3 }
    }
}

/// Labels every anchor against the ground-truth boxes.
///
/// An anchor is positive when its best IoU exceeds `positive`, or when it is
/// the highest-IoU anchor of some ground-truth box (the lowest index wins
/// ties; the rule applies even if that IoU is below `negative`). Remaining
/// anchors are negative below `negative` and neutral otherwise.
///
/// A forced positive points at the lowest-indexed box that forced it; other
/// positives point at their best box.
pub fn assign_anchors(
    anchors: &[RotatedBox],
    gt: &[RotatedBox],
    thresholds: AssignThresholds,
) -> Result<Vec<AnchorAssignment>, AnchorError> {
    let AssignThresholds { positive, negative } = thresholds;
    if !(positive > negative) {
        return Err(AnchorError::Thresholds { pos: positive, neg: negative });
    }

    // best (iou, gt) per anchor, and best (iou, anchor) per gt
    let mut anchor_best: Vec<(f64, Option<usize>)> = vec![(0.0, None); anchors.len()];
    let mut gt_best: Vec<(f64, Option<usize>)> = vec![(0.0, None); gt.len()];
    for (ai, a) in anchors.iter().enumerate() {
        for (gi, g) in gt.iter().enumerate() {
            let iou = rotated_iou(a, g);
            if iou <= 0.0 {
                continue;
            }
            if iou > anchor_best[ai].0 {
                anchor_best[ai] = (iou, Some(gi));
            }
            if iou > gt_best[gi].0 {
                gt_best[gi] = (iou, Some(ai));
            }
        }
    }

    let mut forced: Vec<Option<(usize, f64)>> = vec![None; anchors.len()];
    for (gi, &(iou, best)) in gt_best.iter().enumerate() {
        if let Some(ai) = best {
            if forced[ai].is_none() {
                forced[ai] = Some((gi, iou));
            }
        }
    }

    Ok(anchor_best
        .iter()
        .enumerate()
        .map(|(ai, &(best_iou, best_gt))| {
            let (category, matched_gt, iou) = if let Some((gi, iou)) = forced[ai] {
                (AnchorCategory::Positive, Some(gi), iou)
            } else if best_iou > positive {
                (AnchorCategory::Positive, best_gt, best_iou)
            } else if best_iou < negative {
                (AnchorCategory::Negative, None, best_iou)
            } else {
                (AnchorCategory::Neutral, None, best_iou)
            };
            AnchorAssignment { anchor_index: ai, category, matched_gt, iou }
        })
        .collect())
}
