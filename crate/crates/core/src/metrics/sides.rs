//! Per-side segmentation error, MAE, angle error and SlapSeg-II tolerance.

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::geometry::{to_quad, Point, RotatedBox};
use crate::numeric::{mean_and_pop_std, wrap_half_turn};

/// Signed per-side pixel error of a predicted box against ground truth.
/// Positive means the predicted side lies outside the ground truth
/// (over-segmentation), negative means inside (under-segmentation).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SideErrors {
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
}

impl SideErrors {
    pub fn as_array(&self) -> [f64; 4] {
        [self.left, self.right, self.top, self.bottom]
    }

    pub const SIDE_NAMES: [&'static str; 4] = ["left", "right", "top", "bottom"];
}

// Vertex index pairs of each side in `to_quad` order (TL, TR, BR, BL).
const TOP: (usize, usize) = (0, 1);
const RIGHT: (usize, usize) = (1, 2);
const BOTTOM: (usize, usize) = (2, 3);
const LEFT: (usize, usize) = (3, 0);

fn dot(a: Point, b: Point) -> f64 {
    a.x * b.x + a.y * b.y
}

fn unit(a: Point, b: Point) -> Point {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let n = dx.hypot(dy);
    Point::new(dx / n, dy / n)
}

fn perp(v: Point) -> Point {
    Point::new(-v.y, v.x)
}

fn side_error(pred: &[Point; 4], gt: &[Point; 4], gt_center: Point, side: (usize, usize)) -> f64 {
    let (p1, p2) = (pred[side.0], pred[side.1]);
    let (g1, g2) = (gt[side.0], gt[side.1]);
    let pred_normal = perp(unit(p1, p2));
    let gt_normal = perp(unit(g1, g2));
    let g_mid = Point::new(0.5 * (g1.x + g2.x), 0.5 * (g1.y + g2.y));
    let outward = if dot(gt_normal, Point::new(g_mid.x - gt_center.x, g_mid.y - gt_center.y)) >= 0.0 {
        gt_normal
    } else {
        Point::new(-gt_normal.x, -gt_normal.y)
    };

    // Walk from each predicted endpoint along the predicted side's normal
    // until the (extended) ground-truth side line is reached.
    let cos = dot(pred_normal, outward);
    let reach = |p: Point| -> f64 {
        let offset = dot(Point::new(p.x - g1.x, p.y - g1.y), outward);
        if cos.abs() < 1e-12 {
            offset.abs()
        } else {
            (offset / cos).abs()
        }
    };
    let magnitude = 0.5 * (reach(p1) + reach(p2));
    if magnitude == 0.0 {
        return 0.0;
    }
    let p_mid = Point::new(0.5 * (p1.x + p2.x) - g1.x, 0.5 * (p1.y + p2.y) - g1.y);
    if dot(p_mid, outward) > 0.0 {
        magnitude
    } else {
        -magnitude
    }
}

/// Side errors of `pred` against `gt`.
///
/// Sides are matched through the box-local frame (top/bottom are
/// perpendicular to the height axis). The predicted box is first expressed
/// with the angle representative closest to the ground truth's, so a half
/// turn of labelling difference does not swap top and bottom. For each
/// predicted side, lines perpendicular to that side are drawn from its two
/// endpoints to the extended ground-truth side; the error is the mean of
/// the two lengths, signed by whether the predicted side's midpoint lies
/// outside the ground-truth box.
pub fn side_errors(pred: &RotatedBox, gt: &RotatedBox) -> SideErrors {
    let aligned = RotatedBox { theta: gt.theta + wrap_half_turn(pred.theta - gt.theta), ..*pred };
    let qp = to_quad(&aligned).vertices;
    let qg = to_quad(gt).vertices;
    let c = gt.center();
    SideErrors {
        left: side_error(&qp, &qg, c, LEFT),
        right: side_error(&qp, &qg, c, RIGHT),
        top: side_error(&qp, &qg, c, TOP),
        bottom: side_error(&qp, &qg, c, BOTTOM),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        mean_and_pop_std(values).map(|(mean, std)| Self { mean, std })
    }
}

/// MAE and the spread of absolute errors, per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideStats {
    pub left: MeanStd,
    pub right: MeanStd,
    pub top: MeanStd,
    pub bottom: MeanStd,
}

/// Mean absolute error per side over all fingerprints, with the population
/// standard deviation of the absolute errors.
pub fn mae(errors: &[SideErrors]) -> Result<SideStats, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::Empty("side errors"));
    }
    let side = |f: fn(&SideErrors) -> f64| {
        let abs: Vec<f64> = errors.iter().map(|e| f(e).abs()).collect();
        MeanStd::of(&abs).expect("non-empty")
    };
    Ok(SideStats {
        left: side(|e| e.left),
        right: side(|e| e.right),
        top: side(|e| e.top),
        bottom: side(|e| e.bottom),
    })
}

/// Absolute angle difference, wrapped so that `-89` and `89` are 2 apart.
pub fn angle_error(theta_gt: f64, theta_pred: f64) -> f64 {
    wrap_half_turn(theta_pred - theta_gt).abs()
}

/// Error in angle prediction: mean and population std of
/// [`angle_error`] over `(theta_gt, theta_pred)` pairs.
pub fn eap(pairs: &[(f64, f64)]) -> Result<MeanStd, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty("angle pairs"));
    }
    let errs: Vec<f64> = pairs.iter().map(|&(g, p)| angle_error(g, p)).collect();
    Ok(MeanStd::of(&errs).expect("non-empty"))
}

/// Minimum allowed signed side errors (under-segmentation bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricTolerance {
    /// Left and right sides, pixels.
    pub left_right: f64,
    /// Top and bottom sides, pixels.
    pub top_bottom: f64,
}

impl Default for GeometricTolerance {
    /// SlapSeg-II limits at 500 ppi: -32 px sideways, -64 px top and bottom.
    fn default() -> Self {
        Self { left_right: -32.0, top_bottom: -64.0 }
    }
}

/// `true` when no side is under-segmented beyond the tolerance. Bounds are
/// inclusive; over-segmentation is not limited.
pub fn tolerance_check(err: &SideErrors, gtl: &GeometricTolerance) -> bool {
    err.left >= gtl.left_right
        && err.right >= gtl.left_right
        && err.top >= gtl.top_bottom
        && err.bottom >= gtl.top_bottom
}
