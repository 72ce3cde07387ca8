//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::time::{Duration, Instant};

use orientseg_core::anchors::{assign_anchors, generate_anchors, AnchorCategory, AnchorConfig, AssignThresholds};
use orientseg_core::augmentation::{
    augment_dataset, keyed_rng, rotate_slap, unrotate_box, unrotate_record, AugmentationSpec, CanvasPolicy, Sample,
};
use orientseg_core::dataset_io::{parse_records, to_jsonl, AgeGroup, AnnotatedSlap, BoxRecord, FingerLabel, Hand, RecordKind};
use orientseg_core::geometry::{rotated_iou, to_quad, Point, RotatedBox};
use orientseg_core::losses::{
    cls_loss, cls_loss_grad, decode, encode, grad_check, gradient_sweep, reg_loss, reg_loss_grad, smooth_l1,
    smooth_l1_grad, RegressionOffsets,
};
use orientseg_core::metrics::{
    angle_error, eap, evaluate_segmentation, gaussian_calibration_trials, label_accuracy, roc, side_errors,
    tar_at_far, tolerance_check, Cohort, EvalReport, GeometricTolerance, LabelSet, SideErrors,
};
use orientseg_core::numeric::wrap_half_turn;
use orientseg_core::postprocess::{rotated_nms, Detection, NmsConfig};
use orientseg_core::synth::{generate, SynthSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(key: &str, i: u64) -> ChaCha8Rng {
    keyed_rng(2024, key, i)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

// Scanline rasterization: horizontal rows at fine spacing, with each
// polygon's span on a row found from its edges. Intersection spans are the
// overlap of the two spans.

fn span(poly: &[Point; 4], y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..4 {
        let (a, b) = (poly[i], poly[(i + 1) % 4]);
        if (a.y <= y && y <= b.y) || (b.y <= y && y <= a.y) {
            let x = if a.y == b.y { a.x.min(b.x) } else { a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y) };
            let x2 = if a.y == b.y { a.x.max(b.x) } else { x };
            lo = lo.min(x);
            hi = hi.max(x2);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn raster_iou(a: &RotatedBox, b: &RotatedBox, rows: usize) -> f64 {
    let (qa, qb) = (to_quad(a).vertices, to_quad(b).vertices);
    let ys = qa.iter().chain(&qb).map(|p| p.y);
    let y0 = ys.clone().fold(f64::INFINITY, f64::min);
    let y1 = ys.fold(f64::NEG_INFINITY, f64::max);
    let dy = (y1 - y0) / rows as f64;
    let (mut area_a, mut area_b, mut inter) = (0.0, 0.0, 0.0);
    for r in 0..rows {
        let y = y0 + (r as f64 + 0.5) * dy;
        let sa = span(&qa, y);
        let sb = span(&qb, y);
        if let Some((l, h)) = sa {
            area_a += (h - l) * dy;
        }
        if let Some((l, h)) = sb {
            area_b += (h - l) * dy;
        }
        if let (Some((la, ha)), Some((lb, hb))) = (sa, sb) {
            inter += (ha.min(hb) - la.max(lb)).max(0.0) * dy;
        }
    }
    let union = area_a + area_b - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn random_box(r: &mut ChaCha8Rng, center: Option<(f64, f64)>) -> RotatedBox {
    let (x, y) = match center {
        Some((cx, cy)) => (
            (cx + r.random_range(-64.0..64.0)).clamp(0.0, 512.0),
            (cy + r.random_range(-64.0..64.0)).clamp(0.0, 512.0),
        ),
        None => (r.random_range(0.0..=512.0), r.random_range(0.0..=512.0)),
    };
    RotatedBox {
        x_c: x,
        y_c: y,
        w: r.random_range(8.0..=256.0),
        h: r.random_range(8.0..=256.0),
        theta: r.random_range(-90.0..90.0),
    }
}

fn iou_oracle() -> Outcome {
    let start = Instant::now();
    let n = 1000;
    let mut worst = 0.0_f64;
    let mut overlapping = 0;
    for i in 0..n {
        let mut r = rng("iou", i);
        let a = random_box(&mut r, None);
        // half the pairs are drawn near each other so most of them overlap
        let b = random_box(&mut r, (i % 2 == 0).then_some((a.x_c, a.y_c)));
        let exact = rotated_iou(&a, &b);
        if exact > 0.0 {
            overlapping += 1;
        }
        worst = worst.max((exact - raster_iou(&a, &b, 20_000)).abs());
    }
    let t = start.elapsed();
    check(
        worst <= 1e-3 && within(t, Duration::from_secs(60)),
        format!("{n} pairs ({overlapping} overlapping), max |diff| {worst:.2e}, {:.2}s", t.as_secs_f64()),
    )
}

fn encode_decode() -> Outcome {
    let n = 10_000;
    let mut worst = 0.0_f64;
    for i in 0..n {
        let mut r = rng("codec", i);
        let target = random_box(&mut r, None);
        let anchor = random_box(&mut r, None);
        let t = encode(&target, &anchor).map_err(|e| e.to_string())?;
        let back = decode(&t, &anchor);
        let errs = [
            back.x_c - target.x_c,
            back.y_c - target.y_c,
            back.w - target.w,
            back.h - target.h,
            wrap_half_turn(back.theta - target.theta),
        ];
        worst = errs.iter().fold(worst, |m, e| m.max(e.abs()));
    }
    check(worst <= 1e-9, format!("{n} pairs, max coordinate error {worst:.2e}"))
}

fn gradients() -> Outcome {
    let sweep = gradient_sweep(100, 11);
    // joint per-anchor loss L(p, t) = L_cls(p) + lambda * L_reg(t, t*)
    let lambda = 1.0;
    let mut worst_joint = 0.0_f64;
    let mut worst_sl1 = 0.0_f64;
    for i in 0..100 {
        let mut r = rng("grad", i);
        let away = |r: &mut ChaCha8Rng| {
            let m = if r.random_bool(0.5) { r.random_range(0.05..=0.95) } else { r.random_range(1.05..=3.0) };
            if r.random_bool(0.5) {
                m
            } else {
                -m
            }
        };
        let x = away(&mut r);
        worst_sl1 = worst_sl1.max(grad_check(|v| smooth_l1(v[0]), |v| vec![smooth_l1_grad(v[0])], &[x]));

        let t_star = RegressionOffsets::from_array(std::array::from_fn(|_| r.random_range(-2.0..=2.0)));
        let ts = t_star.to_array();
        let mut at = vec![r.random_range(0.05..=0.95)];
        at.extend((0..5).map(|k| ts[k] + away(&mut r)));
        let offs = |v: &[f64]| RegressionOffsets::from_array([v[1], v[2], v[3], v[4], v[5]]);
        worst_joint = worst_joint.max(grad_check(
            |v| cls_loss(v[0], true) + lambda * reg_loss(&offs(v), &t_star, true),
            |v| {
                let mut g = vec![cls_loss_grad(v[0], true)];
                g.extend(reg_loss_grad(&offs(v), &t_star, true).map(|d| lambda * d));
                g
            },
            &at,
        ));
    }
    let worst = sweep.worst_cls.max(sweep.worst_reg).max(worst_joint).max(worst_sl1);
    check(
        worst <= 1e-5,
        format!(
            "100 points: cls {:.2e}, reg {:.2e}, smooth-L1 {worst_sl1:.2e}, joint {worst_joint:.2e}",
            sweep.worst_cls, sweep.worst_reg
        ),
    )
}

/// Category and matched box per anchor, from the full IoU matrix.
fn brute_assign(anchors: &[RotatedBox], gt: &[RotatedBox], th: AssignThresholds) -> Vec<(AnchorCategory, Option<usize>)> {
    let iou: Vec<Vec<f64>> = anchors.iter().map(|a| gt.iter().map(|g| rotated_iou(a, g)).collect()).collect();
    let mut forced_by: Vec<Option<usize>> = vec![None; anchors.len()];
    for gi in 0..gt.len() {
        let mut best: Option<usize> = None;
        for (ai, row) in iou.iter().enumerate() {
            if row[gi] > 0.0 && best.is_none_or(|b| row[gi] > iou[b][gi]) {
                best = Some(ai);
            }
        }
        if let Some(ai) = best {
            forced_by[ai] = Some(forced_by[ai].map_or(gi, |g| g.min(gi)));
        }
    }
    (0..anchors.len())
        .map(|ai| {
            if let Some(gi) = forced_by[ai] {
                return (AnchorCategory::Positive, Some(gi));
            }
            let row = &iou[ai];
            let top = row.iter().cloned().fold(0.0, f64::max);
            if top > th.positive {
                (AnchorCategory::Positive, row.iter().position(|&v| v == top))
            } else if top < th.negative {
                (AnchorCategory::Negative, None)
            } else {
                (AnchorCategory::Neutral, None)
            }
        })
        .collect()
}

fn anchors_and_assignment() -> Outcome {
    let default = AnchorConfig::default();
    let one_cell = generate_anchors(&default).map_err(|e| e.to_string())?;
    if one_cell.len() != 63 || default.per_cell() != 63 {
        return Err(format!("{} anchors per cell", one_cell.len()));
    }
    let cfg = AnchorConfig { grid_w: 16, grid_h: 12, ..AnchorConfig::default() };
    let anchors = generate_anchors(&cfg).map_err(|e| e.to_string())?;
    let th = AssignThresholds::default();
    let mut mismatches = 0;
    let mut uncovered = 0;
    let mut positives = 0;
    for s in 0..50 {
        let mut r = rng("scene", s);
        let n_gt = r.random_range(1..=5);
        let gt: Vec<RotatedBox> = (0..n_gt)
            .map(|_| RotatedBox {
                x_c: r.random_range(0.0..256.0),
                y_c: r.random_range(0.0..192.0),
                w: r.random_range(30.0..200.0),
                h: r.random_range(30.0..200.0),
                theta: r.random_range(-90.0..90.0),
            })
            .collect();
        let got = assign_anchors(&anchors, &gt, th).map_err(|e| e.to_string())?;
        let want = brute_assign(&anchors, &gt, th);
        mismatches += got.iter().zip(&want).filter(|(g, w)| (g.category, g.matched_gt) != **w).count();
        positives += got.iter().filter(|a| a.category == AnchorCategory::Positive).count();
        for g in &gt {
            let best = anchors.iter().map(|a| rotated_iou(a, g)).fold(0.0, f64::max);
            let covered = got
                .iter()
                .any(|a| a.category == AnchorCategory::Positive && rotated_iou(&anchors[a.anchor_index], g) == best);
            if best > 0.0 && !covered {
                uncovered += 1;
            }
        }
    }
    check(
        mismatches == 0 && uncovered == 0,
        format!("63 per cell; 50 scenes x {} anchors: {mismatches} mismatches, {uncovered} uncovered gt, {positives} positives", anchors.len()),
    )
}

fn synth_slaps(n_subjects: usize) -> Result<Vec<Sample>, String> {
    let spec = SynthSpec { n_subjects, ..SynthSpec::default() };
    Ok(generate(&spec)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|s| Sample { record: s.record, image: s.image })
        .collect())
}

fn augmentation_consistency() -> Outcome {
    let slaps = synth_slaps(34)?;
    let slaps = &slaps[..200];
    let mut angle_pairs = Vec::new();
    let mut worst_center = 0.0_f64;
    for (i, s) in slaps.iter().enumerate() {
        let alpha = rng("alpha", i as u64).random_range(-90.0..=90.0);
        let policy = if i % 2 == 0 { CanvasPolicy::Expand } else { CanvasPolicy::Crop };
        let rot = rotate_slap(&s.image, &s.record.boxes, alpha, policy).map_err(|e| e.to_string())?;
        let (src, dst) = (s.image.dimensions(), rot.image.dimensions());
        for (orig, moved) in s.record.boxes.iter().zip(&rot.boxes) {
            angle_pairs.push((orig.bbox.theta + alpha, moved.bbox.theta));
            let back = unrotate_box(&moved.bbox, alpha, src, dst);
            worst_center = worst_center.max((back.x_c - orig.bbox.x_c).hypot(back.y_c - orig.bbox.y_c));
        }
    }
    let e = eap(&angle_pairs).map_err(|e| e.to_string())?;
    check(
        e.mean <= 1e-9 && worst_center <= 1e-6,
        format!("200 slaps, {} boxes: EAP {:.2e}, max center error {worst_center:.2e} px", angle_pairs.len(), e.mean),
    )
}

fn metric_invariance() -> Outcome {
    let n = 1000;
    let mut worst_side = 0.0_f64;
    let mut before_pairs = Vec::with_capacity(n);
    let mut after_pairs = Vec::with_capacity(n);
    let mut worst_angle = 0.0_f64;
    for i in 0..n {
        let mut r = rng("invariance", i as u64);
        let gt = RotatedBox {
            x_c: r.random_range(0.0..512.0),
            y_c: r.random_range(0.0..512.0),
            w: r.random_range(20.0..120.0),
            h: r.random_range(30.0..200.0),
            theta: r.random_range(-90.0..90.0),
        };
        let pred = RotatedBox {
            x_c: gt.x_c + r.random_range(-10.0..10.0),
            y_c: gt.y_c + r.random_range(-10.0..10.0),
            w: gt.w + r.random_range(-10.0..10.0),
            h: gt.h + r.random_range(-10.0..10.0),
            theta: gt.theta + r.random_range(-20.0..20.0),
        };
        let pivot = Point { x: r.random_range(-200.0..700.0), y: r.random_range(-200.0..700.0) };
        let (deg, dx, dy) = (r.random_range(-180.0..180.0), r.random_range(-300.0..300.0), r.random_range(-300.0..300.0));
        let (gt2, pred2) = (gt.rigid_motion(pivot, deg, dx, dy), pred.rigid_motion(pivot, deg, dx, dy));
        let a: SideErrors = side_errors(&pred, &gt);
        let b = side_errors(&pred2, &gt2);
        for (x, y) in a.as_array().iter().zip(b.as_array()) {
            worst_side = worst_side.max((x - y).abs());
        }
        worst_angle = worst_angle.max((angle_error(gt.theta, pred.theta) - angle_error(gt2.theta, pred2.theta)).abs());
        before_pairs.push((gt.theta, pred.theta));
        after_pairs.push((gt2.theta, pred2.theta));
    }
    let (e1, e2) = (eap(&before_pairs).map_err(|e| e.to_string())?, eap(&after_pairs).map_err(|e| e.to_string())?);
    let worst_eap = (e1.mean - e2.mean).abs().max((e1.std - e2.std).abs()).max(worst_angle);
    check(
        worst_side <= 1e-9 && worst_eap <= 1e-9,
        format!("{n} cases: max side change {worst_side:.2e}, max angle/EAP change {worst_eap:.2e}"),
    )
}

fn tolerance_grid() -> Outcome {
    let gtl = GeometricTolerance::default();
    let mut checked = 0_u64;
    let mut wrong = 0_u64;
    let range = || (-66..=2).map(f64::from);
    for left in range() {
        for right in range() {
            for top in range() {
                for bottom in range() {
                    let e = SideErrors { left, right, top, bottom };
                    let rule = left >= -32.0 && right >= -32.0 && top >= -64.0 && bottom >= -64.0;
                    if tolerance_check(&e, &gtl) != rule {
                        wrong += 1;
                    }
                    checked += 1;
                }
            }
        }
    }
    check(wrong == 0, format!("{checked} grid points, {wrong} disagreements"))
}

fn roc_calibration() -> Outcome {
    let start = Instant::now();
    let (n_genuine, n_impostor) = (100_000, 900_000);
    let trials = gaussian_calibration_trials(0.9717, 0.001, n_genuine, n_impostor);
    let curve = roc(&trials).map_err(|e| e.to_string())?;
    let tar = tar_at_far(&curve, 0.001);
    let t = start.elapsed();
    check(
        (tar - 0.9717).abs() <= 0.005 && within(t, Duration::from_secs(120)),
        format!("{} trials: TAR@FAR=0.001 {tar:.5}, {:.2}s", trials.len(), t.as_secs_f64()),
    )
}

fn labels(ls: &[FingerLabel]) -> LabelSet {
    ls.iter().copied().collect()
}

fn label_cases() -> Outcome {
    use FingerLabel::*;
    let four = labels(&[RightIndex, RightMiddle, RightRing, RightLittle]);
    let one_wrong = labels(&[RightIndex, RightMiddle, RightRing, LeftLittle]);
    let three = labels(&[RightIndex, RightMiddle, RightRing]);
    let cases: [(&str, Vec<LabelSet>, Vec<LabelSet>, f64); 5] = [
        ("perfect", vec![four], vec![four], 1.0),
        ("one wrong label", vec![four], vec![one_wrong], 0.8),
        ("one missing", vec![four], vec![three], 0.9),
        ("nothing found", vec![four], vec![LabelSet::default()], 0.6),
        ("two slaps, one wrong", vec![four, four], vec![four, one_wrong], 0.9),
    ];
    let mut bad = Vec::new();
    for (name, y, z, want) in &cases {
        let got = label_accuracy(y, z, 10).map_err(|e| e.to_string())?.accuracy;
        if (got - want).abs() > 1e-12 {
            bad.push(format!("{name}: {got} != {want}"));
        }
    }

    // the same case through the segmentation evaluator
    let mut gt = AnnotatedSlap::new("slap", "images/slap.png", Hand::Right, AgeGroup::Adult);
    for (k, l) in [RightIndex, RightMiddle, RightRing, RightLittle].into_iter().enumerate() {
        gt.boxes.push(BoxRecord::new(RotatedBox { x_c: 60.0 + 80.0 * k as f64, y_c: 100.0, w: 50.0, h: 90.0, theta: 0.0 }, l));
    }
    let mut pred = gt.clone();
    pred.boxes[3].label = LeftLittle;
    let eval = evaluate_segmentation(&[gt], &[pred], &GeometricTolerance::default()).map_err(|e| e.to_string())?;
    let report = EvalReport::segmentation(&eval);
    let acc = report.cohort(Cohort::Entire).and_then(|c| c.segmentation.as_ref()).and_then(|s| s.label_accuracy);
    if acc != Some(0.8) {
        bad.push(format!("evaluator: {acc:?} != 0.8"));
    }
    check(bad.is_empty(), if bad.is_empty() { format!("{} cases exact", cases.len() + 1) } else { bad.join("; ") })
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let gt_samples = synth_slaps(50)?;
    let spec = AugmentationSpec { samples_per_slap: 3, rng_seed: 5, ..AugmentationSpec::default() };
    let augmented = augment_dataset(&gt_samples, &spec).map_err(|e| e.to_string())?;

    // annotations travel through their text form as they would on disk
    let gt_records: Vec<AnnotatedSlap> = gt_samples.iter().map(|s| s.record.clone()).collect();
    let gt_text = to_jsonl(&gt_records).map_err(|e| e.to_string())?;
    let aug_records: Vec<AnnotatedSlap> = augmented.iter().map(|s| s.record.clone()).collect();
    let aug_text = to_jsonl(&aug_records).map_err(|e| e.to_string())?;
    let gt = parse_records(&gt_text, RecordKind::Annotation).map_err(|e| e.to_string())?;
    let aug = parse_records(&aug_text, RecordKind::Annotation).map_err(|e| e.to_string())?;
    let inverse: Vec<AnnotatedSlap> =
        aug.iter().map(unrotate_record).collect::<Result<_, _>>().map_err(|e| e.to_string())?;

    let eval = evaluate_segmentation(&gt, &inverse, &GeometricTolerance::default()).map_err(|e| e.to_string())?;
    let report = EvalReport::segmentation(&eval);
    let t = start.elapsed();

    let mut worst = 0.0_f64;
    let mut complete = true;
    for c in &report.cohorts {
        let Some(s) = &c.segmentation else {
            complete = false;
            continue;
        };
        match (&s.mae, &s.eap) {
            (Some(mae), Some(e)) => {
                for m in [mae.left, mae.right, mae.top, mae.bottom] {
                    worst = worst.max(m.mean.abs()).max(m.std.abs());
                }
                worst = worst.max(e.mean.abs()).max(e.std.abs());
            }
            _ => complete = false,
        }
        complete &= s.n_missed == 0 && s.n_spurious == 0 && s.label_accuracy == Some(1.0);
    }
    check(
        complete && worst <= 1e-9 && within(t, Duration::from_secs(300)),
        format!(
            "{} slaps, {} rotated copies: max MAE/EAP entry {worst:.2e}, {:.2}s",
            gt.len(),
            inverse.len(),
            t.as_secs_f64()
        ),
    )
}

/// Greedy NMS written as "keep the best, suppress its overlaps".
fn brute_nms(dets: &[Detection], cfg: &NmsConfig) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].score >= cfg.score_threshold).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
    let mut suppressed = vec![false; dets.len()];
    let mut out = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        out.push(dets[i]);
        for &j in &order[pos + 1..] {
            if dets[j].label == dets[i].label && rotated_iou(&dets[i].bbox, &dets[j].bbox) > cfg.iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    out.truncate(cfg.max_keep);
    out
}

fn nms_oracle() -> Outcome {
    let labels = [FingerLabel::RightIndex, FingerLabel::RightMiddle, FingerLabel::RightRing];
    let mut mismatches = 0;
    let mut not_idempotent = 0;
    let mut suppressed = 0;
    for s in 0..500 {
        let mut r = rng("nms", s);
        let n = r.random_range(1..40);
        let centers: Vec<(f64, f64)> = (0..4).map(|_| (r.random_range(50.0..450.0), r.random_range(50.0..450.0))).collect();
        let dets: Vec<Detection> = (0..n)
            .map(|_| {
                let c = centers[r.random_range(0..centers.len())];
                Detection {
                    bbox: RotatedBox {
                        x_c: c.0 + r.random_range(-20.0..20.0),
                        y_c: c.1 + r.random_range(-20.0..20.0),
                        w: r.random_range(30.0..90.0),
                        h: r.random_range(50.0..140.0),
                        theta: r.random_range(-90.0..90.0),
                    },
                    label: labels[r.random_range(0..labels.len())],
                    // coarse scores so ties happen
                    score: f64::from(r.random_range(0..=20)) / 20.0,
                }
            })
            .collect();
        let cfg = NmsConfig {
            score_threshold: [0.0, 0.3, 0.7][s as usize % 3],
            iou_threshold: [0.3, 0.5, 0.7][(s as usize / 3) % 3],
            max_keep: if s % 7 == 0 { 3 } else { 1000 },
        };
        let got = rotated_nms(&dets, &cfg);
        if got != brute_nms(&dets, &cfg) {
            mismatches += 1;
        }
        if rotated_nms(&got, &cfg) != got {
            not_idempotent += 1;
        }
        suppressed += dets.iter().filter(|d| d.score >= cfg.score_threshold).count() - got.len();
    }
    check(
        mismatches == 0 && not_idempotent == 0,
        format!("500 scenes ({suppressed} suppressed): {mismatches} mismatches, {not_idempotent} not idempotent"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("rotated IoU vs rasterization", iou_oracle),
        ("encode/decode round trip", encode_decode),
        ("loss gradient checks", gradients),
        ("anchor count and assignment", anchors_and_assignment),
        ("augmentation consistency", augmentation_consistency),
        ("metric invariance under rigid motion", metric_invariance),
        ("geometric tolerance boundary grid", tolerance_grid),
        ("ROC harness calibration", roc_calibration),
        ("label accuracy hand cases", label_cases),
        ("end-to-end identity", end_to_end),
        ("rotated NMS vs brute force", nms_oracle),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
