//! Per-cohort evaluation reports.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::labels::{label_accuracy, pair_boxes, LabelSet, PAIRING_IOU_FLOOR};
use super::roc::{roc, MatchTrial, RocPoint};
use super::sides::{angle_error, eap, mae, side_errors, tolerance_check, GeometricTolerance, MeanStd, SideErrors, SideStats};
use super::MetricsError;
use crate::augmentation::unrotate_record;
use crate::dataset_io::{AgeGroup, AnnotatedSlap, FingerLabel, ProvenanceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    Child,
    Adult,
    Entire,
}

impl Cohort {
    pub const ALL: [Cohort; 3] = [Cohort::Child, Cohort::Adult, Cohort::Entire];

    pub fn includes(self, age: AgeGroup) -> bool {
        match self {
            Cohort::Entire => true,
            Cohort::Child => age == AgeGroup::Child,
            Cohort::Adult => age == AgeGroup::Adult,
        }
    }
}

/// Outcome for one paired ground-truth fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerDetail {
    pub slap_id: String,
    pub label: FingerLabel,
    pub age_group: AgeGroup,
    pub errors: SideErrors,
    pub theta_gt: f64,
    pub theta_pred: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlapDetail {
    pub slap_id: String,
    pub age_group: AgeGroup,
    pub n_gt: usize,
    pub n_missed: usize,
    pub n_spurious: usize,
    #[serde(skip)]
    pub gt_labels: LabelSet,
    #[serde(skip)]
    pub pred_labels: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentationEval {
    pub fingers: Vec<FingerDetail>,
    pub slaps: Vec<SlapDetail>,
    /// Prediction records with no ground truth to compare against.
    pub unpaired_predictions: Vec<String>,
}

/// Compares prediction records with ground truth.
///
/// A prediction is paired with the ground-truth record of the same
/// `slap_id`. Failing that, a prediction on an augmented image is mapped
/// back into its source frame and paired with the source record. Ground
/// truth without any prediction counts as fully missed. Boxes are paired
/// greedily by IoU with a floor of 0.1.
pub fn evaluate_segmentation(
    gt: &[AnnotatedSlap],
    pred: &[AnnotatedSlap],
    gtl: &GeometricTolerance,
) -> Result<SegmentationEval, MetricsError> {
    let by_id: HashMap<&str, usize> = gt.iter().enumerate().map(|(i, r)| (r.slap_id.as_str(), i)).collect();
    let mut per_gt: Vec<Vec<AnnotatedSlap>> = vec![Vec::new(); gt.len()];
    let mut out = SegmentationEval::default();
    for p in pred {
        if let Some(&gi) = by_id.get(p.slap_id.as_str()) {
            per_gt[gi].push(p.clone());
            continue;
        }
        let source = p.provenance.source_id.as_deref().and_then(|s| by_id.get(s).copied());
        match source {
            Some(gi) if p.provenance.kind == ProvenanceKind::Augmented => per_gt[gi].push(unrotate_record(p)?),
            Some(gi) => per_gt[gi].push(p.clone()),
            None => out.unpaired_predictions.push(p.slap_id.clone()),
        }
    }

    for (g, preds) in gt.iter().zip(&per_gt) {
        let gt_boxes: Vec<_> = g.boxes.iter().map(|b| b.bbox).collect();
        let gt_labels: LabelSet = g.boxes.iter().map(|b| b.label).collect();
        if preds.is_empty() {
            out.slaps.push(SlapDetail {
                slap_id: g.slap_id.clone(),
                age_group: g.age_group,
                n_gt: gt_boxes.len(),
                n_missed: gt_boxes.len(),
                n_spurious: 0,
                gt_labels,
                pred_labels: LabelSet::default(),
            });
            continue;
        }
        for p in preds {
            let pred_boxes: Vec<_> = p.boxes.iter().map(|b| b.bbox).collect();
            let pairing = pair_boxes(&gt_boxes, &pred_boxes, PAIRING_IOU_FLOOR);
            for &(gi, pi, _) in &pairing.matches {
                let (gb, pb) = (&gt_boxes[gi], &pred_boxes[pi]);
                let errors = side_errors(pb, gb);
                out.fingers.push(FingerDetail {
                    slap_id: g.slap_id.clone(),
                    label: g.boxes[gi].label,
                    age_group: g.age_group,
                    errors,
                    theta_gt: gb.theta,
                    theta_pred: pb.theta,
                    within_tolerance: tolerance_check(&errors, gtl),
                });
            }
            out.slaps.push(SlapDetail {
                slap_id: g.slap_id.clone(),
                age_group: g.age_group,
                n_gt: gt_boxes.len(),
                n_missed: pairing.missed_gt.len(),
                n_spurious: pairing.spurious_pred.len(),
                gt_labels,
                pred_labels: p.boxes.iter().map(|b| b.label).collect(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSummary {
    pub n_slaps: usize,
    pub n_gt_boxes: usize,
    pub n_matched: usize,
    pub n_missed: usize,
    pub n_spurious: usize,
    pub mae: Option<SideStats>,
    pub eap: Option<MeanStd>,
    pub label_accuracy: Option<f64>,
    /// Share of ground-truth fingerprints that were found and are within
    /// the geometric tolerance. Missed fingerprints count as failures.
    pub tolerance_pass_rate: Option<f64>,
}

pub fn summarize_segmentation(eval: &SegmentationEval, cohort: Cohort) -> SegmentationSummary {
    let slaps: Vec<&SlapDetail> = eval.slaps.iter().filter(|s| cohort.includes(s.age_group)).collect();
    let fingers: Vec<&FingerDetail> = eval.fingers.iter().filter(|f| cohort.includes(f.age_group)).collect();
    let errors: Vec<SideErrors> = fingers.iter().map(|f| f.errors).collect();
    let angles: Vec<(f64, f64)> = fingers.iter().map(|f| (f.theta_gt, f.theta_pred)).collect();
    let gt_sets: Vec<LabelSet> = slaps.iter().map(|s| s.gt_labels).collect();
    let pred_sets: Vec<LabelSet> = slaps.iter().map(|s| s.pred_labels).collect();
    let n_gt_boxes: usize = slaps.iter().map(|s| s.n_gt).sum();
    let n_pass = fingers.iter().filter(|f| f.within_tolerance).count();
    SegmentationSummary {
        n_slaps: slaps.len(),
        n_gt_boxes,
        n_matched: fingers.len(),
        n_missed: slaps.iter().map(|s| s.n_missed).sum(),
        n_spurious: slaps.iter().map(|s| s.n_spurious).sum(),
        mae: mae(&errors).ok(),
        eap: eap(&angles).ok(),
        label_accuracy: label_accuracy(&gt_sets, &pred_sets, FingerLabel::ALL.len()).ok().map(|a| a.accuracy),
        tolerance_pass_rate: (n_gt_boxes > 0).then(|| n_pass as f64 / n_gt_boxes as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSummary {
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub n_failed: usize,
    pub far_target: f64,
    pub tar_at_far: f64,
    /// Score threshold of the operating point; absent when even the
    /// strictest threshold exceeds the FAR target.
    pub threshold: Option<f64>,
    pub roc: Vec<RocPoint>,
}

/// ROC summary for trials whose probe belongs to `cohort`. `cohorts` is
/// parallel to `trials`.
pub fn summarize_matching(
    trials: &[MatchTrial],
    cohorts: &[AgeGroup],
    cohort: Cohort,
    far_target: f64,
) -> Result<MatchingSummary, MetricsError> {
    if trials.len() != cohorts.len() {
        return Err(MetricsError::LengthMismatch { left: trials.len(), right: cohorts.len() });
    }
    let subset: Vec<MatchTrial> = trials
        .iter()
        .zip(cohorts)
        .filter(|(_, &a)| cohort.includes(a))
        .map(|(t, _)| t.clone())
        .collect();
    let curve = roc(&subset)?;
    let op = curve.operating_point(far_target);
    Ok(MatchingSummary {
        n_genuine: curve.n_genuine,
        n_impostor: curve.n_impostor,
        n_failed: curve.n_failed,
        far_target,
        tar_at_far: op.tar,
        threshold: op.threshold.is_finite().then_some(op.threshold),
        roc: curve.points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub cohort: Cohort,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<SegmentationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchingSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cohorts: Vec<CohortReport>,
}

impl EvalReport {
    pub fn segmentation(eval: &SegmentationEval) -> Self {
        Self {
            cohorts: Cohort::ALL
                .iter()
                .map(|&c| CohortReport { cohort: c, segmentation: Some(summarize_segmentation(eval, c)), matching: None })
                .collect(),
        }
    }

    /// Matching report. Cohorts without both genuine and impostor trials
    /// are left out.
    pub fn matching(trials: &[MatchTrial], cohorts: &[AgeGroup], far_target: f64) -> Result<Self, MetricsError> {
        let mut out = Vec::new();
        for c in Cohort::ALL {
            match summarize_matching(trials, cohorts, c, far_target) {
                Ok(m) => out.push(CohortReport { cohort: c, segmentation: None, matching: Some(m) }),
                Err(MetricsError::Empty(_)) if c != Cohort::Entire => {}
                Err(e) => return Err(e),
            }
        }
        Ok(Self { cohorts: out })
    }

    pub fn cohort(&self, c: Cohort) -> Option<&CohortReport> {
        self.cohorts.iter().find(|r| r.cohort == c)
    }
}

/// Histogram of signed side errors and absolute angle errors as CSV with
/// columns `quantity,bin_lo,bin_hi,count`. Bins are `[lo, hi)`.
pub fn error_histogram_csv(fingers: &[FingerDetail], bin_width: f64) -> String {
    let mut out = String::from("quantity,bin_lo,bin_hi,count\n");
    let mut emit = |name: &str, values: Vec<f64>| {
        let mut bins: Vec<(i64, usize)> = Vec::new();
        for v in values {
            let k = (v / bin_width).floor() as i64;
            match bins.binary_search_by_key(&k, |b| b.0) {
                Ok(i) => bins[i].1 += 1,
                Err(i) => bins.insert(i, (k, 1)),
            }
        }
        for (k, n) in bins {
            let _ = writeln!(out, "{name},{},{},{n}", k as f64 * bin_width, (k + 1) as f64 * bin_width);
        }
    };
    for (i, side) in SideErrors::SIDE_NAMES.iter().enumerate() {
        emit(side, fingers.iter().map(|f| f.errors.as_array()[i]).collect());
    }
    emit("angle", fingers.iter().map(|f| angle_error(f.theta_gt, f.theta_pred)).collect());
    out
}
