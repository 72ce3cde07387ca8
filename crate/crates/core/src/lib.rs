//! Oriented-box slap fingerprint segmentation toolkit.
//!
//! Rotated-box geometry and IoU, oriented anchors and their assignment, the
//! region-proposal loss, rotation augmentation, annotation files, rotated NMS
//! and crop extraction, evaluation metrics, and a synthetic slap generator.

pub mod anchors;
pub mod augmentation;
pub mod dataset_io;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod numeric;
pub mod postprocess;
pub mod raster;
pub mod synth;

pub use anchors::{assign_anchors, generate_anchors, AnchorAssignment, AnchorCategory, AnchorConfig, AssignThresholds};
pub use augmentation::{AugmentationSpec, CanvasPolicy};
pub use dataset_io::{AgeGroup, AnnotatedSlap, BoxRecord, FingerLabel, Hand, Provenance, ProvenanceKind, RecordKind};
pub use geometry::{rotated_iou, to_quad, Point, Quad, RotatedBox};
pub use losses::{decode, encode, orpn_loss, RegressionOffsets};
pub use metrics::{EvalReport, MatchTrial, SideErrors};
pub use postprocess::{extract_crop, rotated_nms, Detection, NmsConfig};
pub use synth::{SynthSpec, SynthSlap};
