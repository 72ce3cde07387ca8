//! Detection post-processing: score filtering, class-wise rotated NMS and
//! rectified fingerprint crops.

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset_io::FingerLabel;
use crate::geometry::{rotated_iou, to_quad, RotatedBox};
use crate::raster::{sample_bilinear, to_u8, WHITE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PostprocessError {
    #[error("box lies entirely outside the {width}x{height} image")]
    OutsideImage { width: u32, height: u32 },
    #[error("invalid box: {0}")]
    Box(#[from] crate::geometry::GeometryError),
}

/// A scored, labelled oriented box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: RotatedBox,
    pub label: FingerLabel,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmsConfig {
    /// Detections scoring below this are dropped before suppression.
    pub score_threshold: f64,
    /// Same-label detections overlapping a kept one by more than this are
    /// suppressed.
    pub iou_threshold: f64,
    pub max_keep: usize,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self { score_threshold: 0.7, iou_threshold: 0.5, max_keep: 1000 }
    }
}

/// Greedy class-wise rotated NMS.
///
/// Candidates with `score >= score_threshold` are visited by descending
/// score (ties by ascending input index). A candidate is kept unless an
/// already kept detection with the same label overlaps it with IoU above
/// `iou_threshold`. At most `max_keep` detections are returned, in visit
/// order.
pub fn rotated_nms(dets: &[Detection], cfg: &NmsConfig) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len())
        .filter(|&i| dets[i].score >= cfg.score_threshold)
        .collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));

    let mut kept: Vec<Detection> = Vec::new();
    for i in order {
        if kept.len() >= cfg.max_keep {
            break;
        }
        let d = dets[i];
        let clash = kept
            .iter()
            .any(|k| k.label == d.label && rotated_iou(&k.bbox, &d.bbox) > cfg.iou_threshold);
        if !clash {
            kept.push(d);
        }
    }
    kept
}

/// Pixel size of the crop for `b`: `(ceil(w), ceil(h))`.
pub fn crop_size(b: &RotatedBox) -> (u32, u32) {
    (b.w.ceil().max(1.0) as u32, b.h.ceil().max(1.0) as u32)
}

/// Upright, rectified crop of `b` sampled bilinearly from `image`.
///
/// Crop pixel `(i, j)` samples the box-local point
/// `(i + 0.5 - W/2, j + 0.5 - H/2)`, where `(W, H)` is [`crop_size`].
/// Samples outside the source are white.
pub fn extract_crop(image: &GrayImage, b: &RotatedBox) -> Result<GrayImage, PostprocessError> {
    b.validate()?;
    let (iw, ih) = image.dimensions();
    let q = to_quad(b);
    let (min_x, max_x) = q.vertices.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let (min_y, max_y) = q.vertices.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    if max_x <= 0.0 || max_y <= 0.0 || min_x >= iw as f64 || min_y >= ih as f64 {
        return Err(PostprocessError::OutsideImage { width: iw, height: ih });
    }
    let image_box = RotatedBox { x_c: iw as f64 / 2.0, y_c: ih as f64 / 2.0, w: iw as f64, h: ih as f64, theta: 0.0 };
    if rotated_iou(&image_box, b) == 0.0 {
        return Err(PostprocessError::OutsideImage { width: iw, height: ih });
    }

    let (cw, ch) = crop_size(b);
    let (hw, hh) = (cw as f64 / 2.0, ch as f64 / 2.0);
    Ok(GrayImage::from_fn(cw, ch, |i, j| {
        let p = b.local_to_image(i as f64 + 0.5 - hw, j as f64 + 0.5 - hh);
        Luma([to_u8(sample_bilinear(image, p.x, p.y, WHITE))])
    }))
}
