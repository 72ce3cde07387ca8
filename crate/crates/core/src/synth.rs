//! Synthetic slap generator and a texture-correlation scorer.
//!
//! Each finger is an elliptical patch of wavy sinusoidal ridges whose
//! texture depends only on `(seed, subject, finger)`, so two impressions of
//! the same finger correlate strongly and different fingers do not. Pixels
//! are evaluated analytically in box-local coordinates, which makes the
//! ground-truth boxes exact and lets crops be compared against the pristine
//! patch.

use std::f64::consts::PI;

use image::{imageops, GrayImage, Luma};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::augmentation::keyed_rng;
use crate::dataset_io::{AgeGroup, AnnotatedSlap, BoxRecord, FingerLabel, Hand};
use crate::geometry::{rotated_iou, to_quad, RotatedBox};
use crate::raster::{to_u8, WHITE};

pub const MAX_PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("could not place fingers of `{slap_id}` without overlap after {attempts} attempts")]
    Placement { slap_id: String, attempts: usize },
}

/// Inclusive pixel ranges for finger width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRange {
    pub w: [u32; 2],
    pub h: [u32; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Maximum center offset from the anatomical slot, per axis.
    pub center_px: f64,
    /// Maximum whole-hand tilt; each finger adds up to half this again.
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub hands: Vec<Hand>,
    /// Fraction of subjects that are children.
    pub age_mix: f64,
    /// `[width, height]` of every slap image.
    pub image_size: [u32; 2],
    pub ridge_period: f64,
    pub adult_size: SizeRange,
    pub child_size: SizeRange,
    pub jitter: Jitter,
    /// Impressions per subject and hand. Two or more give genuine pairs.
    pub sessions: usize,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 10,
            hands: vec![Hand::Right, Hand::Left, Hand::Thumbs],
            age_mix: 0.3,
            image_size: [768, 512],
            ridge_period: 12.0,
            adult_size: SizeRange { w: [64, 84], h: [100, 130] },
            child_size: SizeRange { w: [40, 56], h: [64, 90] },
            jitter: Jitter { center_px: 4.0, angle_deg: 10.0 },
            sessions: 2,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if !(0.0..=1.0).contains(&self.age_mix) {
            return bad("age_mix must lie in [0, 1]");
        }
        if self.hands.is_empty() || self.hands.contains(&Hand::Unknown) {
            return bad("hands must be a non-empty subset of left, right, thumbs");
        }
        if !(self.ridge_period.is_finite() && self.ridge_period >= 3.0) {
            return bad("ridge_period must be at least 3 pixels");
        }
        for r in [&self.adult_size, &self.child_size] {
            if r.w[0] == 0 || r.h[0] == 0 || r.w[0] > r.w[1] || r.h[0] > r.h[1] {
                return bad("size ranges must be positive and ordered");
            }
        }
        if self.child_size.w[1] >= self.adult_size.w[0] || self.child_size.h[1] >= self.adult_size.h[0] {
            return bad("child finger sizes must be strictly smaller than adult sizes");
        }
        if !(self.jitter.center_px >= 0.0 && self.jitter.angle_deg >= 0.0 && self.jitter.angle_deg < 45.0) {
            return bad("jitter must be non-negative and the angle below 45 degrees");
        }
        if self.sessions == 0 {
            return bad("sessions must be at least 1");
        }
        let [iw, ih] = self.image_size;
        if (iw as f64) < 5.0 * self.adult_size.w[1] as f64 || (ih as f64) < 1.5 * self.adult_size.h[1] as f64 {
            return bad("image_size too small for four adult fingers");
        }
        Ok(())
    }

    pub fn n_children(&self) -> usize {
        (self.age_mix * self.n_subjects as f64).round() as usize
    }

    /// Children are the first `n_children()` subjects.
    pub fn age_of(&self, subject: usize) -> AgeGroup {
        if subject < self.n_children() {
            AgeGroup::Child
        } else {
            AgeGroup::Adult
        }
    }
}

pub fn subject_id(subject: usize) -> String {
    format!("s{subject:04}")
}

/// Fingers of a slap in left-to-right image order.
pub fn finger_order(hand: Hand) -> &'static [FingerLabel] {
    use FingerLabel::*;
    match hand {
        Hand::Right => &[RightIndex, RightMiddle, RightRing, RightLittle],
        Hand::Left => &[LeftLittle, LeftRing, LeftMiddle, LeftIndex],
        Hand::Thumbs => &[LeftThumb, RightThumb],
        Hand::Unknown => &[],
    }
}

// Vertical offset of each finger tip row relative to the image middle,
// as a fraction of image height. Middle fingers sit higher.
fn arc_offset(label: FingerLabel) -> f64 {
    use FingerLabel::*;
    match label {
        RightIndex | LeftIndex => 0.02,
        RightMiddle | LeftMiddle => -0.04,
        RightRing | LeftRing => -0.01,
        RightLittle | LeftLittle => 0.06,
        RightThumb | LeftThumb => 0.0,
    }
}

/// Ridge pattern of one finger in patch-local coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Texture {
    period: f64,
    orientation: f64,
    phase: f64,
    wave_dir: f64,
    wave_len: f64,
    wave_amp: f64,
}

impl Texture {
    pub fn for_finger(seed: u64, subject: usize, label: FingerLabel, period: f64) -> Self {
        let mut rng = keyed_rng(seed, &format!("texture/{}/{}", subject_id(subject), label), 0);
        Self {
            period,
            orientation: rng.random_range(0.0..PI),
            phase: rng.random_range(0.0..2.0 * PI),
            wave_dir: rng.random_range(0.0..PI),
            wave_len: rng.random_range(4.0 * period..8.0 * period),
            wave_amp: rng.random_range(1.5..3.5),
        }
    }

    /// Gray level at local point `(u, v)` of a `w x h` patch: dark and light
    /// ridges inside the inscribed ellipse fading to white at its rim.
    pub fn value(&self, u: f64, v: f64, w: f64, h: f64) -> f64 {
        let r = ((2.0 * u / w).powi(2) + (2.0 * v / h).powi(2)).sqrt();
        let alpha = if r >= 1.0 {
            return WHITE as f64;
        } else if r <= 0.8 {
            1.0
        } else {
            let t = (1.0 - r) / 0.2;
            t * t * (3.0 - 2.0 * t)
        };
        let along = u * self.orientation.cos() + v * self.orientation.sin();
        let wave = u * self.wave_dir.cos() + v * self.wave_dir.sin();
        let phase = 2.0 * PI * along / self.period
            + self.wave_amp * (2.0 * PI * wave / self.wave_len).sin()
            + self.phase;
        let ridge = 135.0 + 80.0 * phase.cos();
        WHITE as f64 * (1.0 - alpha) + alpha * ridge
    }

    /// The finger rendered upright at `w x h` pixels.
    pub fn render_patch(&self, w: u32, h: u32) -> GrayImage {
        let (fw, fh) = (w as f64, h as f64);
        GrayImage::from_fn(w, h, |i, j| {
            Luma([to_u8(self.value(i as f64 + 0.5 - fw / 2.0, j as f64 + 0.5 - fh / 2.0, fw, fh))])
        })
    }
}

/// One generated slap with its pristine finger patches, parallel to
/// `record.boxes`.
#[derive(Debug, Clone)]
pub struct SynthSlap {
    pub record: AnnotatedSlap,
    pub image: GrayImage,
    pub patches: Vec<GrayImage>,
    pub subject: usize,
    pub session: usize,
}

fn finger_size(spec: &SynthSpec, subject: usize, label: FingerLabel) -> (u32, u32) {
    let range = match spec.age_of(subject) {
        AgeGroup::Child => spec.child_size,
        AgeGroup::Adult => spec.adult_size,
    };
    let mut rng = keyed_rng(spec.rng_seed, &format!("size/{}/{}", subject_id(subject), label), 0);
    (rng.random_range(range.w[0]..=range.w[1]), rng.random_range(range.h[0]..=range.h[1]))
}

fn inside_image(b: &RotatedBox, iw: u32, ih: u32) -> bool {
    to_quad(b)
        .vertices
        .iter()
        .all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= iw as f64 && p.y <= ih as f64)
}

fn place(spec: &SynthSpec, slap_id: &str, sizes: &[(u32, u32)], labels: &[FingerLabel]) -> Result<Vec<RotatedBox>, SynthError> {
    let [iw, ih] = spec.image_size;
    let n = labels.len();
    let slot = iw as f64 / (n + 1) as f64;
    let j = spec.jitter;
    for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut rng = keyed_rng(spec.rng_seed, &format!("place/{slap_id}"), attempt as u64);
        let tilt = if j.angle_deg > 0.0 { rng.random_range(-j.angle_deg..=j.angle_deg) } else { 0.0 };
        let mut jit = |m: f64| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
        let boxes: Vec<RotatedBox> = labels
            .iter()
            .zip(sizes)
            .enumerate()
            .map(|(k, (&l, &(w, h)))| RotatedBox {
                x_c: slot * (k + 1) as f64 + jit(j.center_px),
                y_c: ih as f64 * (0.5 + arc_offset(l)) + jit(j.center_px),
                w: w as f64,
                h: h as f64,
                theta: tilt + jit(j.angle_deg / 2.0),
            })
            .collect();
        let fits = boxes.iter().all(|b| inside_image(b, iw, ih));
        let apart = (0..n).all(|a| (a + 1..n).all(|b| rotated_iou(&boxes[a], &boxes[b]) == 0.0));
        if fits && apart {
            return Ok(boxes);
        }
    }
    Err(SynthError::Placement { slap_id: slap_id.to_string(), attempts: MAX_PLACEMENT_ATTEMPTS })
}

fn render_slap(iw: u32, ih: u32, boxes: &[RotatedBox], textures: &[Texture]) -> GrayImage {
    let mut img = GrayImage::from_pixel(iw, ih, Luma([WHITE]));
    for (b, t) in boxes.iter().zip(textures) {
        let q = to_quad(b);
        let lo_x = q.vertices.iter().map(|p| p.x).fold(f64::MAX, f64::min).floor().max(0.0) as u32;
        let hi_x = q.vertices.iter().map(|p| p.x).fold(f64::MIN, f64::max).ceil().min(iw as f64) as u32;
        let lo_y = q.vertices.iter().map(|p| p.y).fold(f64::MAX, f64::min).floor().max(0.0) as u32;
        let hi_y = q.vertices.iter().map(|p| p.y).fold(f64::MIN, f64::max).ceil().min(ih as f64) as u32;
        for y in lo_y..hi_y {
            for x in lo_x..hi_x {
                let (u, v) = b.image_to_local(crate::geometry::Point::new(x as f64 + 0.5, y as f64 + 0.5));
                if u.abs() <= b.w / 2.0 && v.abs() <= b.h / 2.0 {
                    img.put_pixel(x, y, Luma([to_u8(t.value(u, v, b.w, b.h))]));
                }
            }
        }
    }
    img
}

fn generate_one(spec: &SynthSpec, subject: usize, hand: Hand, session: usize) -> Result<SynthSlap, SynthError> {
    let slap_id = format!("{}_{}_{}", subject_id(subject), hand.as_str(), session);
    let labels = finger_order(hand);
    let sizes: Vec<(u32, u32)> = labels.iter().map(|&l| finger_size(spec, subject, l)).collect();
    let textures: Vec<Texture> = labels
        .iter()
        .map(|&l| Texture::for_finger(spec.rng_seed, subject, l, spec.ridge_period))
        .collect();
    let boxes = place(spec, &slap_id, &sizes, labels)?;
    let [iw, ih] = spec.image_size;
    let image = render_slap(iw, ih, &boxes, &textures);
    let patches = textures.iter().zip(&sizes).map(|(t, &(w, h))| t.render_patch(w, h)).collect();

    let mut record = AnnotatedSlap::new(&slap_id, &format!("images/{slap_id}.png"), hand, spec.age_of(subject));
    record.boxes = boxes.iter().zip(labels).map(|(b, &l)| BoxRecord::new(*b, l)).collect();
    record.extra.insert("subject".into(), Value::String(subject_id(subject)));
    record.extra.insert("session".into(), Value::from(session));
    Ok(SynthSlap { record, image, patches, subject, session })
}

/// Every slap for the spec, ordered by subject, then hand (in spec order),
/// then session.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SynthSlap>, SynthError> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for s in 0..spec.n_subjects {
        for &h in &spec.hands {
            for k in 0..spec.sessions {
                jobs.push((s, h, k));
            }
        }
    }
    jobs.par_iter().map(|&(s, h, k)| generate_one(spec, s, h, k)).collect()
}

/// Side of the square both crops are resized to before comparison.
pub const SCORER_SIZE: u32 = 64;

/// Normalized cross-correlation of two fingerprint crops after resizing
/// both to a common square, restricted to the inner part of the inscribed
/// ellipse so that the common elliptical outline does not count as
/// similarity. Returns a value in `[-1, 1]`; flat inputs score 0.
pub fn synth_scorer(a: &GrayImage, b: &GrayImage) -> f64 {
    if a.width() == 0 || a.height() == 0 || b.width() == 0 || b.height() == 0 {
        return 0.0;
    }
    let ra = imageops::resize(a, SCORER_SIZE, SCORER_SIZE, imageops::FilterType::Triangle);
    let rb = imageops::resize(b, SCORER_SIZE, SCORER_SIZE, imageops::FilterType::Triangle);
    let half = SCORER_SIZE as f64 / 2.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for y in 0..SCORER_SIZE {
        for x in 0..SCORER_SIZE {
            let (u, v) = ((x as f64 + 0.5 - half) / half, (y as f64 + 0.5 - half) / half);
            if u * u + v * v <= 0.75 * 0.75 {
                xs.push(ra.get_pixel(x, y).0[0] as f64);
                ys.push(rb.get_pixel(x, y).0[0] as f64);
            }
        }
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postprocess::extract_crop;
    use crate::raster::mean_abs_diff;

    fn small(n: usize, hands: Vec<Hand>) -> SynthSpec {
        SynthSpec { n_subjects: n, hands, ..Default::default() }
    }

    #[test]
    fn one_right_hand() {
        let spec = SynthSpec { sessions: 1, ..small(1, vec![Hand::Right]) };
        let out = generate(&spec).unwrap();
        assert_eq!(out.len(), 1);
        let r = &out[0].record;
        assert_eq!(r.labels(), finger_order(Hand::Right).to_vec());
        let xs: Vec<f64> = r.boxes.iter().map(|b| b.bbox.x_c).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert!(crate::dataset_io::validate_record(r, crate::dataset_io::RecordKind::Annotation).is_empty());
    }

    #[test]
    fn left_and_thumbs_order() {
        let out = generate(&SynthSpec { sessions: 1, ..small(1, vec![Hand::Left, Hand::Thumbs]) }).unwrap();
        assert_eq!(out[0].record.labels()[0], FingerLabel::LeftLittle);
        assert_eq!(out[1].record.labels(), vec![FingerLabel::LeftThumb, FingerLabel::RightThumb]);
        assert!(out[1].record.boxes[0].bbox.x_c < out[1].record.boxes[1].bbox.x_c);
    }

    #[test]
    fn deterministic() {
        let spec = small(2, vec![Hand::Right]);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image.as_raw(), y.image.as_raw());
            assert_eq!(x.record, y.record);
        }
        let c = generate(&SynthSpec { rng_seed: 1, ..spec }).unwrap();
        assert_ne!(a[0].image.as_raw(), c[0].image.as_raw());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = SynthSpec::default();
        s.child_size.w[1] = s.adult_size.w[0];
        assert!(s.validate().is_err());
        assert!(SynthSpec { age_mix: 1.5, ..Default::default() }.validate().is_err());
        assert!(SynthSpec { hands: vec![], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn crowded_layout_errors() {
        let spec = SynthSpec {
            image_size: [420, 200],
            adult_size: SizeRange { w: [80, 84], h: [120, 130] },
            jitter: Jitter { center_px: 30.0, angle_deg: 40.0 },
            n_subjects: 1,
            age_mix: 0.0,
            hands: vec![Hand::Right],
            ..Default::default()
        };
        assert!(matches!(generate(&spec), Err(SynthError::Placement { .. })));
    }

    #[test]
    fn children_are_smaller() {
        let spec = SynthSpec { n_subjects: 6, age_mix: 0.5, sessions: 1, ..Default::default() };
        let out = generate(&spec).unwrap();
        let mean = |age| {
            let a: Vec<f64> = out
                .iter()
                .filter(|s| s.record.age_group == age)
                .flat_map(|s| s.record.boxes.iter().map(|b| b.bbox.area()))
                .collect();
            a.iter().sum::<f64>() / a.len() as f64
        };
        assert!(mean(AgeGroup::Child) < mean(AgeGroup::Adult));
    }

    #[test]
    fn boxes_bound_patches_tightly() {
        let out = generate(&small(1, vec![Hand::Right])).unwrap();
        let s = &out[0];
        for (b, p) in s.record.boxes.iter().zip(&s.patches) {
            assert_eq!(p.dimensions(), (b.bbox.w as u32, b.bbox.h as u32));
            // the ellipse touches all four sides: the middle row and column
            // carry ink within a pixel of each edge
            let (w, h) = p.dimensions();
            assert!(p.get_pixel(0, h / 2).0[0] < 255 || p.get_pixel(1, h / 2).0[0] < 255);
            assert!(p.get_pixel(w - 1, h / 2).0[0] < 255 || p.get_pixel(w - 2, h / 2).0[0] < 255);
            assert!(p.get_pixel(w / 2, 0).0[0] < 255 || p.get_pixel(w / 2, 1).0[0] < 255);
            assert!(p.get_pixel(w / 2, h - 1).0[0] < 255 || p.get_pixel(w / 2, h - 2).0[0] < 255);
            // corners are outside the ellipse
            assert_eq!(p.get_pixel(0, 0).0[0], 255);
        }
    }

    #[test]
    fn crops_reproduce_pristine_patches() {
        let out = generate(&small(3, vec![Hand::Right, Hand::Thumbs])).unwrap();
        for s in &out {
            for (b, p) in s.record.boxes.iter().zip(&s.patches) {
                let crop = extract_crop(&s.image, &b.bbox).unwrap();
                let mad = mean_abs_diff(&crop, p);
                assert!(mad <= 3.0, "{}: mad {mad}", s.record.slap_id);
            }
        }
    }

    #[test]
    fn scorer_basics() {
        let t = Texture::for_finger(0, 0, FingerLabel::RightIndex, 12.0);
        let p = t.render_patch(70, 110);
        assert_eq!(synth_scorer(&p, &p), 1.0);
        let mut inv = p.clone();
        imageops::invert(&mut inv);
        assert!(synth_scorer(&p, &inv) <= 0.0);
        let flat = GrayImage::from_pixel(10, 10, Luma([255]));
        assert_eq!(synth_scorer(&p, &flat), 0.0);
    }

    #[test]
    fn genuine_beats_impostor() {
        let out = generate(&small(4, vec![Hand::Right])).unwrap();
        let crop = |s: &SynthSlap, k: usize| extract_crop(&s.image, &s.record.boxes[k].bbox).unwrap();
        // sessions 0 and 1 of subject 0, and session 1 of subject 1
        let (a0, a1, b1) = (&out[0], &out[1], &out[3]);
        for k in 0..4 {
            let g = synth_scorer(&crop(a0, k), &crop(a1, k));
            let i = synth_scorer(&crop(a0, k), &crop(b1, k));
            assert!(g > 0.8 && i < 0.5, "finger {k}: genuine {g} impostor {i}");
        }
    }
}
