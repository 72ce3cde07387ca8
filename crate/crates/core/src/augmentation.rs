//! Rotation augmentation of upright annotated slaps.
//!
//! A slap rotated by `alpha` degrees (same sense as box angles) maps every
//! ground-truth box center `c` to `R(alpha) (c - old_center) + new_center`
//! and its angle to `theta + alpha`, wrapped into `[-90, 90)`. Width, height
//! and label never change.

use std::collections::HashSet;

use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset_io::{AnnotatedSlap, BoxRecord, Provenance};
use crate::geometry::{rotate_vec, RotatedBox};
use crate::raster::{sample_bilinear, to_u8, WHITE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("rotation angle {0} is outside [-90, 90]")]
    AngleOutOfRange(f64),
    #[error("angle range [{min}, {max}] must satisfy -90 <= min <= max <= 90")]
    BadRange { min: f64, max: f64 },
    #[error("samples_per_slap must be at least 1")]
    NoSamples,
    #[error("image is empty")]
    EmptyImage,
    #[error("duplicate output slap id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` is not an augmented slap with full provenance")]
    NotAugmented(String),
}

/// What happens to the canvas when an image is rotated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanvasPolicy {
    /// Grow the canvas to the rotated extent so no content is lost.
    #[default]
    Expand,
    /// Keep the original canvas size; corners rotate out of view.
    Crop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationSpec {
    pub angle_min: f64,
    pub angle_max: f64,
    pub samples_per_slap: usize,
    pub rng_seed: u64,
    pub canvas_policy: CanvasPolicy,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        Self {
            angle_min: -90.0,
            angle_max: 90.0,
            samples_per_slap: 10,
            rng_seed: 0,
            canvas_policy: CanvasPolicy::Expand,
        }
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let ok = self.angle_min.is_finite()
            && self.angle_max.is_finite()
            && -90.0 <= self.angle_min
            && self.angle_min <= self.angle_max
            && self.angle_max <= 90.0;
        if !ok {
            return Err(AugmentError::BadRange { min: self.angle_min, max: self.angle_max });
        }
        if self.samples_per_slap == 0 {
            return Err(AugmentError::NoSamples);
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<(), AugmentError> {
    if alpha.is_finite() && alpha.abs() <= 90.0 {
        Ok(())
    } else {
        Err(AugmentError::AngleOutOfRange(alpha))
    }
}

/// Canvas size after rotating a `width x height` image by `alpha`.
pub fn rotated_canvas_size(width: u32, height: u32, alpha: f64, policy: CanvasPolicy) -> (u32, u32) {
    match policy {
        CanvasPolicy::Crop => (width, height),
        CanvasPolicy::Expand => {
            let (s, c) = alpha.to_radians().sin_cos();
            let (w, h) = (width as f64, height as f64);
            let nw = (w * c.abs() + h * s.abs()).round().max(1.0);
            let nh = (w * s.abs() + h * c.abs()).round().max(1.0);
            (nw as u32, nh as u32)
        }
    }
}

/// Maps a box from a `src` canvas into a `dst` canvas rotated by `alpha`
/// about the canvas centers.
pub fn rotate_box(b: &RotatedBox, alpha: f64, src: (u32, u32), dst: (u32, u32)) -> RotatedBox {
    let (rx, ry) = rotate_vec(b.x_c - src.0 as f64 / 2.0, b.y_c - src.1 as f64 / 2.0, alpha);
    RotatedBox {
        x_c: rx + dst.0 as f64 / 2.0,
        y_c: ry + dst.1 as f64 / 2.0,
        theta: b.theta + alpha,
        ..*b
    }
    .canonical()
}

/// Inverse of [`rotate_box`] for the same `src`/`dst` pair.
pub fn unrotate_box(b: &RotatedBox, alpha: f64, src: (u32, u32), dst: (u32, u32)) -> RotatedBox {
    rotate_box(b, -alpha, dst, src)
}

/// Rotates the raster about its center with bilinear resampling; uncovered
/// pixels are white.
pub fn rotate_image(img: &GrayImage, alpha: f64, policy: CanvasPolicy) -> Result<GrayImage, AugmentError> {
    check_alpha(alpha)?;
    if img.width() == 0 || img.height() == 0 {
        return Err(AugmentError::EmptyImage);
    }
    if alpha == 0.0 {
        return Ok(img.clone());
    }
    let (nw, nh) = rotated_canvas_size(img.width(), img.height(), alpha, policy);
    let (ocx, ocy) = (img.width() as f64 / 2.0, img.height() as f64 / 2.0);
    let (ncx, ncy) = (nw as f64 / 2.0, nh as f64 / 2.0);
    let mut out = GrayImage::new(nw, nh);
    for (x, y, px) in out.enumerate_pixels_mut() {
        let (sx, sy) = rotate_vec(x as f64 + 0.5 - ncx, y as f64 + 0.5 - ncy, -alpha);
        *px = Luma([to_u8(sample_bilinear(img, sx + ocx, sy + ocy, WHITE))]);
    }
    Ok(out)
}

/// A rotated slap raster, its transformed boxes and the applied angle.
#[derive(Debug, Clone)]
pub struct RotatedSlap {
    pub image: GrayImage,
    pub boxes: Vec<BoxRecord>,
    pub alpha: f64,
}

/// Rotates a slap image and its labelled ground truth by `alpha`.
pub fn rotate_slap(
    image: &GrayImage,
    boxes: &[BoxRecord],
    alpha: f64,
    policy: CanvasPolicy,
) -> Result<RotatedSlap, AugmentError> {
    let rotated = rotate_image(image, alpha, policy)?;
    let src = image.dimensions();
    let dst = rotated.dimensions();
    let boxes = boxes
        .iter()
        .map(|b| BoxRecord { bbox: rotate_box(&b.bbox, alpha, src, dst), ..b.clone() })
        .collect();
    Ok(RotatedSlap { image: rotated, boxes, alpha })
}

/// Rotation angle for `(seed, slap_id, index)`, uniform on
/// `[angle_min, angle_max]`.
///
/// Every draw gets its own generator keyed by a hash of the triple, so the
/// value does not depend on processing order or thread count.
pub fn draw_angle(spec: &AugmentationSpec, slap_id: &str, index: usize) -> f64 {
    let mut rng = keyed_rng(spec.rng_seed, slap_id, index as u64);
    if spec.angle_min == spec.angle_max {
        return spec.angle_min;
    }
    rng.random_range(spec.angle_min..=spec.angle_max)
}

/// ChaCha generator seeded from SHA-256 of `(seed, key, index)`.
pub fn keyed_rng(seed: u64, key: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((key.len() as u64).to_le_bytes());
    h.update(key.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// Id of the `index`-th rotated copy of `source_id`.
pub fn augmented_id(source_id: &str, index: usize) -> String {
    format!("{source_id}_r{index:03}")
}

/// One planned rotated copy.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentJob {
    /// Index into the input slice.
    pub source: usize,
    pub sample_index: usize,
    pub alpha: f64,
    pub out_id: String,
}

/// Plans `samples_per_slap` copies per input, ordered by
/// `(input position, sample index)`, and rejects colliding output ids.
pub fn plan_augmentation(slaps: &[AnnotatedSlap], spec: &AugmentationSpec) -> Result<Vec<AugmentJob>, AugmentError> {
    spec.validate()?;
    let mut seen: HashSet<String> = slaps.iter().map(|s| s.slap_id.clone()).collect();
    if seen.len() != slaps.len() {
        let mut ids = HashSet::new();
        for s in slaps {
            if !ids.insert(&s.slap_id) {
                return Err(AugmentError::DuplicateId(s.slap_id.clone()));
            }
        }
    }
    let mut jobs = Vec::with_capacity(slaps.len() * spec.samples_per_slap);
    for (source, s) in slaps.iter().enumerate() {
        for k in 0..spec.samples_per_slap {
            let out_id = augmented_id(&s.slap_id, k);
            if !seen.insert(out_id.clone()) {
                return Err(AugmentError::DuplicateId(out_id));
            }
            jobs.push(AugmentJob { source, sample_index: k, alpha: draw_angle(spec, &s.slap_id, k), out_id });
        }
    }
    Ok(jobs)
}

/// The annotation record for a planned copy of `src` whose image is
/// `src_size` pixels.
pub fn augmented_record(
    src: &AnnotatedSlap,
    job: &AugmentJob,
    src_size: (u32, u32),
    policy: CanvasPolicy,
    image_path: String,
) -> AnnotatedSlap {
    let dst = rotated_canvas_size(src_size.0, src_size.1, job.alpha, policy);
    let boxes = src
        .boxes
        .iter()
        .map(|b| BoxRecord { bbox: rotate_box(&b.bbox, job.alpha, src_size, dst), ..b.clone() })
        .collect();
    AnnotatedSlap {
        slap_id: job.out_id.clone(),
        image_path,
        provenance: Provenance::augmented(&src.slap_id, job.alpha, [src_size.0, src_size.1], policy),
        boxes,
        ..src.clone()
    }
}

/// An annotation together with its raster.
#[derive(Debug, Clone)]
pub struct Sample {
    pub record: AnnotatedSlap,
    pub image: GrayImage,
}

/// Rotated copies of every input slap, in `(input, sample index)` order.
/// Output images are named `images/<out_id>.png` in the records.
pub fn augment_dataset(slaps: &[Sample], spec: &AugmentationSpec) -> Result<Vec<Sample>, AugmentError> {
    let records: Vec<AnnotatedSlap> = slaps.iter().map(|s| s.record.clone()).collect();
    let jobs = plan_augmentation(&records, spec)?;
    jobs.par_iter()
        .map(|job| {
            let src = &slaps[job.source];
            let image = rotate_image(&src.image, job.alpha, spec.canvas_policy)?;
            let record = augmented_record(
                &src.record,
                job,
                src.image.dimensions(),
                spec.canvas_policy,
                format!("images/{}.png", job.out_id),
            );
            Ok(Sample { record, image })
        })
        .collect()
}

/// Maps an augmented record's boxes back onto its source canvas using the
/// recorded provenance. The slap id and source id are kept; the rotation
/// fields are dropped and the kind becomes plain, since the boxes now live
/// in the source frame.
pub fn unrotate_record(rec: &AnnotatedSlap) -> Result<AnnotatedSlap, AugmentError> {
    let p = &rec.provenance;
    let (Some(alpha), Some([sw, sh])) = (p.alpha_deg, p.source_size) else {
        return Err(AugmentError::NotAugmented(rec.slap_id.clone()));
    };
    let policy = p.canvas.unwrap_or_default();
    let dst = rotated_canvas_size(sw, sh, alpha, policy);
    let boxes = rec
        .boxes
        .iter()
        .map(|b| BoxRecord { bbox: unrotate_box(&b.bbox, alpha, (sw, sh), dst), ..b.clone() })
        .collect();
    let mut provenance = Provenance::plain();
    provenance.source_id = p.source_id.clone();
    provenance.extra = p.extra.clone();
    Ok(AnnotatedSlap { boxes, provenance, ..rec.clone() })
}
