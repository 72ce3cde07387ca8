//! Segmentation, labelling and verification metrics.

mod calibration;
mod labels;
mod report;
mod roc;
mod sides;
mod trials;

use thiserror::Error;

pub use calibration::gaussian_calibration_trials;
pub use labels::{label_accuracy, pair_boxes, LabelAccuracy, LabelSet, Pairing, PAIRING_IOU_FLOOR};
pub use report::{
    error_histogram_csv, evaluate_segmentation, summarize_matching, summarize_segmentation, Cohort, CohortReport,
    EvalReport, FingerDetail, MatchingSummary, SegmentationEval, SegmentationSummary, SlapDetail,
};
pub use roc::{
    load_trials, parse_trials, roc, save_trials, tar_at_far, trials_to_jsonl, MatchTrial, RocCurve, RocPoint,
    FAR_TARGET,
};
pub use sides::{
    angle_error, eap, mae, side_errors, tolerance_check, GeometricTolerance, MeanStd, SideErrors, SideStats,
};
pub use trials::{
    build_trials, fingerprint_entries, plan_trials, FingerprintEntry, PlannedPair, Scorer, Shortfall, TrialPlan,
    TrialPolicy, TrialSet,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no {0} to evaluate")]
    Empty(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite score for {probe} vs {gallery}")]
    NonFiniteScore { probe: String, gallery: String },
    #[error(transparent)]
    Augment(#[from] crate::augmentation::AugmentError),
}
