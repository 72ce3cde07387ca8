use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use image::GrayImage;
use orientseg_core::anchors::{assign_anchors, generate_anchors, AnchorCategory, AnchorConfig, AssignThresholds};
use orientseg_core::augmentation::{augment_dataset, unrotate_record, AugmentError, AugmentationSpec, CanvasPolicy, Sample};
use orientseg_core::dataset_io::{
    load_annotations, load_predictions, load_records, save_annotations, write_atomic, AgeGroup, BoxRecord, RecordKind,
};
use orientseg_core::geometry::to_quad;
use orientseg_core::losses::gradient_sweep;
use orientseg_core::metrics::{
    build_trials, error_histogram_csv, evaluate_segmentation, fingerprint_entries, label_accuracy, load_trials,
    save_trials, summarize_matching, Cohort, CohortReport, EvalReport, FingerprintEntry, GeometricTolerance,
    LabelSet, TrialPolicy,
};
use orientseg_core::postprocess::{extract_crop, rotated_nms, Detection, NmsConfig};
use orientseg_core::synth::{generate, synth_scorer, SynthSpec};
use serde::Serialize;
use serde_json::json;

use crate::dataset_dir::{read_samples, write_samples};
use crate::{AugmentArgs, Command, EvalMatchArgs, EvalSegArgs, UsageError};

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { spec, out } => synth(spec.as_deref(), &out),
        Command::Augment(args) => augment(&args),
        Command::Unrotate { input, out } => unrotate(&input, &out),
        Command::Validate { file, predictions } => {
            let kind = if predictions { RecordKind::Prediction } else { RecordKind::Annotation };
            load_records(&file, kind)?;
            Ok(())
        }
        Command::Anchors { config, out } => anchors(config.as_deref(), out.as_deref()),
        Command::Assign { config, gt, positive, negative, out } => {
            assign(config.as_deref(), &gt, AssignThresholds { positive, negative }, out.as_deref())
        }
        Command::Nms { pred, score_threshold, iou_threshold, max_keep, out } => {
            nms(&pred, &NmsConfig { score_threshold, iou_threshold, max_keep }, out.as_deref())
        }
        Command::Crop { image, boxes, outdir, slap_id } => crop(&image, &boxes, &outdir, slap_id.as_deref()),
        Command::EvalSeg(args) => eval_seg(&args),
        Command::EvalLabels { gt, pred, report } => eval_labels(&gt, &pred, report.as_deref()),
        Command::EvalMatch(args) => eval_match(&args),
        Command::Gradcheck { points, seed, tolerance } => gradcheck(points, seed, tolerance),
        Command::ReviewServe { dir, port, host } => crate::review::serve_blocking(&dir, &host, port),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes to `path` atomically, or to standard output when absent.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(path, &text)
}

fn jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(&r)?);
        s.push('\n');
    }
    Ok(s)
}

fn synth(spec: Option<&Path>, out: &Path) -> Result<()> {
    let spec: SynthSpec = match spec {
        Some(p) => read_json(p)?,
        None => SynthSpec::default(),
    };
    let slaps = generate(&spec)?;
    let samples: Vec<Sample> = slaps.into_iter().map(|s| Sample { record: s.record, image: s.image }).collect();
    write_samples(out, &samples)?;
    eprintln!("wrote {} slaps to {}", samples.len(), out.display());
    Ok(())
}

fn augment(args: &AugmentArgs) -> Result<()> {
    let canvas_policy = match args.canvas.as_str() {
        "expand" => CanvasPolicy::Expand,
        "crop" => CanvasPolicy::Crop,
        other => return Err(UsageError(format!("unknown canvas policy `{other}` (expected expand or crop)")).into()),
    };
    let spec = AugmentationSpec {
        angle_min: args.min,
        angle_max: args.max,
        samples_per_slap: args.per_slap,
        rng_seed: args.seed,
        canvas_policy,
    };
    if let Err(e @ (AugmentError::BadRange { .. } | AugmentError::NoSamples)) = spec.validate() {
        return Err(UsageError(e.to_string()).into());
    }
    let samples = read_samples(&args.input)?;
    let out = augment_dataset(&samples, &spec)?;
    write_samples(&args.out, &out)?;
    eprintln!("wrote {} rotated slaps to {}", out.len(), args.out.display());
    Ok(())
}

fn unrotate(input: &Path, out: &Path) -> Result<()> {
    let records = load_records(input, RecordKind::Geometry)?;
    let back = records.iter().map(unrotate_record).collect::<Result<Vec<_>, _>>()?;
    save_annotations(out, &back)?;
    Ok(())
}

fn anchors(config: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let cfg: AnchorConfig = match config {
        Some(p) => read_json(p)?,
        None => AnchorConfig::default(),
    };
    let anchors = generate_anchors(&cfg)?;
    emit(out, &jsonl(&anchors)?)
}

/// Anchor grid covering every box of `records` when no config is given.
fn covering_config(records: &[orientseg_core::AnnotatedSlap]) -> AnchorConfig {
    let base = AnchorConfig::default();
    let (mut max_x, mut max_y) = (base.stride, base.stride);
    for p in records.iter().flat_map(|r| r.boxes.iter().flat_map(|b| to_quad(&b.bbox).vertices)) {
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    AnchorConfig {
        grid_w: (max_x / base.stride).ceil() as usize,
        grid_h: (max_y / base.stride).ceil() as usize,
        ..base
    }
}

fn assign(config: Option<&Path>, gt: &Path, thresholds: AssignThresholds, out: Option<&Path>) -> Result<()> {
    let records = load_annotations(gt)?;
    let cfg: AnchorConfig = match config {
        Some(p) => read_json(p)?,
        None => covering_config(&records),
    };
    let anchors = generate_anchors(&cfg)?;
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let gt_boxes: Vec<_> = r.boxes.iter().map(|b| b.bbox).collect();
        let labels = assign_anchors(&anchors, &gt_boxes, thresholds)?;
        let count = |c: AnchorCategory| labels.iter().filter(|a| a.category == c).count();
        let positives: Vec<_> = labels.iter().filter(|a| a.category == AnchorCategory::Positive).collect();
        rows.push(json!({
            "slap_id": r.slap_id,
            "anchors": anchors.len(),
            "positive": count(AnchorCategory::Positive),
            "negative": count(AnchorCategory::Negative),
            "neutral": count(AnchorCategory::Neutral),
            "positives": positives,
        }));
    }
    emit(out, &jsonl(rows)?)
}

fn nms(pred: &Path, cfg: &NmsConfig, out: Option<&Path>) -> Result<()> {
    let mut records = load_predictions(pred)?;
    for r in &mut records {
        let dets: Vec<Detection> = r
            .boxes
            .iter()
            .map(|b| Detection { bbox: b.bbox, label: b.label, score: b.score.unwrap_or(1.0) })
            .collect();
        let kept = rotated_nms(&dets, cfg);
        let mut used = vec![false; dets.len()];
        let mut boxes: Vec<BoxRecord> = Vec::with_capacity(kept.len());
        for k in &kept {
            let i = (0..dets.len()).find(|&i| !used[i] && dets[i] == *k).expect("kept detection comes from input");
            used[i] = true;
            boxes.push(r.boxes[i].clone());
        }
        r.boxes = boxes;
    }
    let text = orientseg_core::dataset_io::to_jsonl(&records)?;
    emit(out, &text)
}

fn crop(image: &Path, boxes: &Path, outdir: &Path, slap_id: Option<&str>) -> Result<()> {
    let img = image::open(image).with_context(|| format!("reading image {}", image.display()))?.to_luma8();
    let records = load_records(boxes, RecordKind::Geometry)?;
    let rec = match (slap_id, records.len()) {
        (Some(id), _) => records
            .iter()
            .find(|r| r.slap_id == id)
            .with_context(|| format!("no record `{id}` in {}", boxes.display()))?,
        (None, 1) => &records[0],
        (None, n) => return Err(UsageError(format!("{n} records in box file; pass --slap-id")).into()),
    };
    std::fs::create_dir_all(outdir).with_context(|| format!("creating {}", outdir.display()))?;
    for b in &rec.boxes {
        let c = extract_crop(&img, &b.bbox)?;
        let path = outdir.join(format!("{}_{}.png", rec.slap_id, b.label));
        c.save(&path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn eval_seg(args: &EvalSegArgs) -> Result<()> {
    let gt = load_annotations(&args.gt)?;
    let pred = load_records(&args.pred, RecordKind::Geometry)?;
    let gtl = GeometricTolerance { left_right: args.gtl_left_right, top_bottom: args.gtl_top_bottom };
    let eval = evaluate_segmentation(&gt, &pred, &gtl)?;
    if !eval.unpaired_predictions.is_empty() {
        eprintln!("warning: {} prediction records have no ground truth", eval.unpaired_predictions.len());
    }
    if let Some(h) = &args.histogram {
        if !(args.bin_width > 0.0) {
            return Err(UsageError("--bin-width must be positive".into()).into());
        }
        write_atomic(h, error_histogram_csv(&eval.fingers, args.bin_width).as_bytes())?;
    }
    emit_json(args.report.as_deref(), &EvalReport::segmentation(&eval))
}

#[derive(Serialize)]
struct LabelRow {
    cohort: Cohort,
    n_slaps: usize,
    hamming_loss: Option<f64>,
    accuracy: Option<f64>,
}

fn eval_labels(gt: &Path, pred: &Path, report: Option<&Path>) -> Result<()> {
    let gt = load_annotations(gt)?;
    let pred = load_records(pred, RecordKind::Geometry)?;
    let eval = evaluate_segmentation(&gt, &pred, &GeometricTolerance::default())?;
    let rows: Vec<LabelRow> = Cohort::ALL
        .iter()
        .map(|&c| {
            let slaps: Vec<_> = eval.slaps.iter().filter(|s| c.includes(s.age_group)).collect();
            let y: Vec<LabelSet> = slaps.iter().map(|s| s.gt_labels).collect();
            let z: Vec<LabelSet> = slaps.iter().map(|s| s.pred_labels).collect();
            let acc = label_accuracy(&y, &z, 10).ok();
            LabelRow {
                cohort: c,
                n_slaps: slaps.len(),
                hamming_loss: acc.map(|a| a.hamming_loss),
                accuracy: acc.map(|a| a.accuracy),
            }
        })
        .collect();
    emit_json(report, &json!({ "cohorts": rows }))
}

fn eval_match(args: &EvalMatchArgs) -> Result<()> {
    if !(args.far > 0.0 && args.far < 1.0) {
        return Err(UsageError("--far must lie in (0, 1)".into()).into());
    }
    let report = match (&args.scores, &args.dataset) {
        (Some(scores), None) => {
            let trials = load_trials(scores)?;
            match &args.annotations {
                Some(a) => {
                    let ages: HashMap<String, AgeGroup> =
                        load_annotations(a)?.into_iter().map(|r| (r.slap_id, r.age_group)).collect();
                    let cohorts = trials
                        .iter()
                        .map(|t| {
                            let slap = t.probe.rsplit_once('/').map_or(t.probe.as_str(), |(s, _)| s);
                            ages.get(slap).copied().with_context(|| format!("probe `{}` not in annotations", t.probe))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    EvalReport::matching(&trials, &cohorts, args.far)?
                }
                None => {
                    let cohorts = vec![AgeGroup::Adult; trials.len()];
                    let m = summarize_matching(&trials, &cohorts, Cohort::Entire, args.far)?;
                    EvalReport { cohorts: vec![CohortReport { cohort: Cohort::Entire, segmentation: None, matching: Some(m) }] }
                }
            }
        }
        (None, Some(dir)) => {
            let policy = TrialPolicy { impostors_per_probe: args.impostors, seed: args.seed };
            let set = synthetic_trials(dir, &policy)?;
            if let Some(p) = &args.write_scores {
                save_trials(p, &set.trials)?;
            }
            if !set.shortfalls.is_empty() {
                eprintln!("warning: {} probes had fewer than {} impostor candidates", set.shortfalls.len(), args.impostors);
            }
            EvalReport::matching(&set.trials, &set.cohorts, args.far)?
        }
        _ => return Err(UsageError("pass exactly one of --scores or --dataset".into()).into()),
    };
    emit_json(args.report.as_deref(), &report)
}

/// Trials over a dataset directory. Session 0 slaps are probes and later
/// sessions the gallery; without session numbers every slap is both.
fn synthetic_trials(dir: &Path, policy: &TrialPolicy) -> Result<orientseg_core::metrics::TrialSet> {
    let samples = read_samples(dir)?;
    let records: Vec<_> = samples.iter().map(|s| s.record.clone()).collect();
    let entries = fingerprint_entries(&records);
    let crops: HashMap<String, Option<GrayImage>> = entries
        .iter()
        .map(|(e, ri, bi)| (e.id.clone(), extract_crop(&samples[*ri].image, &records[*ri].boxes[*bi].bbox).ok()))
        .collect();
    let session = |ri: usize| records[ri].extra.get("session").and_then(|v| v.as_u64());
    let has_sessions = (0..records.len()).all(|ri| session(ri).is_some());
    let pick = |want_probe: bool| -> Vec<FingerprintEntry> {
        entries
            .iter()
            .filter(|(_, ri, _)| !has_sessions || (session(*ri) == Some(0)) == want_probe)
            .map(|(e, _, _)| e.clone())
            .collect()
    };
    let (probes, gallery) = (pick(true), pick(false));
    if probes.is_empty() || gallery.is_empty() {
        bail!("dataset needs both probe and gallery impressions");
    }
    let scorer = |p: &FingerprintEntry, g: &FingerprintEntry| match (&crops[&p.id], &crops[&g.id]) {
        (Some(a), Some(b)) => Some(synth_scorer(a, b)),
        _ => None,
    };
    Ok(build_trials(&probes, &gallery, policy, &scorer))
}

fn gradcheck(points: usize, seed: u64, tolerance: f64) -> Result<()> {
    let s = gradient_sweep(points, seed);
    println!("{}", serde_json::to_string(&s)?);
    if s.worst_cls > tolerance || s.worst_reg > tolerance {
        bail!("gradient check failed: worst relative error {:e} exceeds {tolerance:e}", s.worst_cls.max(s.worst_reg));
    }
    Ok(())
}
