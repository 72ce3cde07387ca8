//! Annotation and prediction files.
//!
//! Both are JSON Lines (UTF-8, `\n`-terminated, one record per line):
//!
//! ```text
//! {"schema_version":1,"slap_id":"s0001_right_0","image_path":"images/s0001_right_0.png",
//!  "hand":"right","age_group":"adult","ppi":500,"provenance":{"kind":"plain"},
//!  "boxes":[{"xc":120.5,"yc":200.0,"w":80.0,"h":120.0,"theta_deg":-3.5,"label":"Right-Index"}]}
//! ```
//!
//! Prediction files use the same record with a `"score"` on every box.
//! Fields this crate does not know about are kept and written back after the
//! known ones, so records survive a load/save cycle unchanged.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::augmentation::CanvasPolicy;
use crate::geometry::RotatedBox;
use crate::postprocess::Detection;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_BOXES_PER_SLAP: usize = 5;
pub const NOMINAL_PPI: u32 = 500;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: slap `{slap_id}` violates {violation}")]
    Invalid { line: usize, slap_id: String, violation: Violation },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}

/// The ten finger positions, serialized with their exact display names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FingerLabel {
    #[serde(rename = "Left-Index")]
    LeftIndex,
    #[serde(rename = "Left-Middle")]
    LeftMiddle,
    #[serde(rename = "Left-Ring")]
    LeftRing,
    #[serde(rename = "Left-Little")]
    LeftLittle,
    #[serde(rename = "Left-Thumb")]
    LeftThumb,
    #[serde(rename = "Right-Index")]
    RightIndex,
    #[serde(rename = "Right-Middle")]
    RightMiddle,
    #[serde(rename = "Right-Ring")]
    RightRing,
    #[serde(rename = "Right-Little")]
    RightLittle,
    #[serde(rename = "Right-Thumb")]
    RightThumb,
}

impl FingerLabel {
    pub const ALL: [FingerLabel; 10] = [
        FingerLabel::LeftIndex,
        FingerLabel::LeftMiddle,
        FingerLabel::LeftRing,
        FingerLabel::LeftLittle,
        FingerLabel::LeftThumb,
        FingerLabel::RightIndex,
        FingerLabel::RightMiddle,
        FingerLabel::RightRing,
        FingerLabel::RightLittle,
        FingerLabel::RightThumb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FingerLabel::LeftIndex => "Left-Index",
            FingerLabel::LeftMiddle => "Left-Middle",
            FingerLabel::LeftRing => "Left-Ring",
            FingerLabel::LeftLittle => "Left-Little",
            FingerLabel::LeftThumb => "Left-Thumb",
            FingerLabel::RightIndex => "Right-Index",
            FingerLabel::RightMiddle => "Right-Middle",
            FingerLabel::RightRing => "Right-Ring",
            FingerLabel::RightLittle => "Right-Little",
            FingerLabel::RightThumb => "Right-Thumb",
        }
    }

    /// Position in [`FingerLabel::ALL`]; used as a bit index for label sets.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_left(self) -> bool {
        self.index() < 5
    }

    pub fn is_thumb(self) -> bool {
        matches!(self, FingerLabel::LeftThumb | FingerLabel::RightThumb)
    }
}

impl fmt::Display for FingerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FingerLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FingerLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown finger label `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
    Thumbs,
    /// Hand not known to the producer; label-side hand checks are skipped.
    Unknown,
}

impl Hand {
    pub fn as_str(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
            Hand::Thumbs => "thumbs",
            Hand::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeGroup {
    Child,
    Adult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProvenanceKind {
    Plain,
    Augmented,
    Difficult,
}

/// Where a slap came from. Augmented slaps record their source and the
/// applied rotation so the transform can be undone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_deg: Option<f64>,
    /// Source image `[width, height]` in pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_size: Option<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canvas: Option<CanvasPolicy>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Provenance {
    pub fn plain() -> Self {
        Self::of_kind(ProvenanceKind::Plain)
    }

    pub fn of_kind(kind: ProvenanceKind) -> Self {
        Self {
            kind,
            source_id: None,
            alpha_deg: None,
            source_size: None,
            canvas: None,
            extra: Map::new(),
        }
    }

    pub fn augmented(source_id: &str, alpha_deg: f64, source_size: [u32; 2], canvas: CanvasPolicy) -> Self {
        Self {
            kind: ProvenanceKind::Augmented,
            source_id: Some(source_id.to_string()),
            alpha_deg: Some(alpha_deg),
            source_size: Some(source_size),
            canvas: Some(canvas),
            extra: Map::new(),
        }
    }
}

/// One labelled box; `score` is present in prediction files only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    #[serde(flatten)]
    pub bbox: RotatedBox,
    pub label: FingerLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl BoxRecord {
    pub fn new(bbox: RotatedBox, label: FingerLabel) -> Self {
        Self { bbox, label, score: None, extra: Map::new() }
    }
}

/// One slap image with its metadata and labelled boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSlap {
    pub schema_version: u32,
    pub slap_id: String,
    pub image_path: String,
    pub hand: Hand,
    pub age_group: AgeGroup,
    pub ppi: u32,
    pub provenance: Provenance,
    pub boxes: Vec<BoxRecord>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl AnnotatedSlap {
    pub fn new(slap_id: &str, image_path: &str, hand: Hand, age_group: AgeGroup) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            slap_id: slap_id.to_string(),
            image_path: image_path.to_string(),
            hand,
            age_group,
            ppi: NOMINAL_PPI,
            provenance: Provenance::plain(),
            boxes: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn labels(&self) -> Vec<FingerLabel> {
        self.boxes.iter().map(|b| b.label).collect()
    }
}

/// Model output for one slap, detections sorted by descending score.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedSlap {
    pub slap_id: String,
    pub detections: Vec<Detection>,
}

impl PredictedSlap {
    /// Builds from a prediction record; boxes without a score count as 1.0.
    pub fn from_record(rec: &AnnotatedSlap) -> Self {
        let mut detections: Vec<Detection> = rec
            .boxes
            .iter()
            .map(|b| Detection { bbox: b.bbox, label: b.label, score: b.score.unwrap_or(1.0) })
            .collect();
        detections.sort_by(|a, b| b.score.total_cmp(&a.score));
        Self { slap_id: rec.slap_id.clone(), detections }
    }
}

/// The rule a record breaks.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    SchemaVersion(u32),
    TooManyBoxes(usize),
    DuplicateLabel(FingerLabel),
    InvalidBox { index: usize, reason: String },
    AngleOutOfRange { index: usize, theta: f64 },
    ScoreOutOfRange { index: usize, score: f64 },
    MissingScore { index: usize },
    HandMismatch { hand: Hand, label: FingerLabel },
    Provenance(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SchemaVersion(v) => write!(f, "schema version: expected {SCHEMA_VERSION}, got {v}"),
            Violation::TooManyBoxes(n) => write!(f, "box limit: {n} boxes (max {MAX_BOXES_PER_SLAP})"),
            Violation::DuplicateLabel(l) => write!(f, "duplicate label: {l}"),
            Violation::InvalidBox { index, reason } => write!(f, "box geometry: box {index}: {reason}"),
            Violation::AngleOutOfRange { index, theta } => {
                write!(f, "angle range: box {index} has theta_deg {theta} outside [-90, 90)")
            }
            Violation::ScoreOutOfRange { index, score } => {
                write!(f, "score range: box {index} has score {score} outside [0, 1]")
            }
            Violation::MissingScore { index } => write!(f, "missing score: box {index}"),
            Violation::HandMismatch { hand, label } => {
                write!(f, "hand consistency: {label} on a {} slap", hand.as_str())
            }
            Violation::Provenance(msg) => write!(f, "provenance: {msg}"),
        }
    }
}

/// Hand/label consistency: left slaps carry only `Left-*` labels, right
/// slaps only `Right-*`, thumb slaps only thumbs. `unknown` skips the check.
pub fn validate_against_hand(slap: &AnnotatedSlap) -> Vec<Violation> {
    slap.boxes
        .iter()
        .filter(|b| match slap.hand {
            Hand::Left => !b.label.is_left(),
            Hand::Right => b.label.is_left(),
            Hand::Thumbs => !b.label.is_thumb(),
            Hand::Unknown => false,
        })
        .map(|b| Violation::HandMismatch { hand: slap.hand, label: b.label })
        .collect()
}

/// Which invariants to enforce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    /// Ground truth: at most five boxes, unique labels, hand-consistent.
    Annotation,
    /// Model output: every box needs a score in `[0, 1]`; label and count
    /// limits do not apply because duplicates are expected before NMS.
    Prediction,
    /// Schema, box geometry and provenance only. Used for evaluation
    /// inputs, which may be ground truth or predictions.
    Geometry,
}

/// Every violation in `slap`, in a fixed order.
pub fn validate_record(slap: &AnnotatedSlap, kind: RecordKind) -> Vec<Violation> {
    let mut out = Vec::new();
    if slap.schema_version != SCHEMA_VERSION {
        out.push(Violation::SchemaVersion(slap.schema_version));
    }
    let p = &slap.provenance;
    if p.kind == ProvenanceKind::Augmented && (p.source_id.is_none() || p.alpha_deg.is_none()) {
        out.push(Violation::Provenance("augmented records need source_id and alpha_deg".into()));
    }
    for (index, b) in slap.boxes.iter().enumerate() {
        if let Err(e) = b.bbox.validate() {
            out.push(Violation::InvalidBox { index, reason: e.to_string() });
        } else if !b.bbox.is_canonical() {
            out.push(Violation::AngleOutOfRange { index, theta: b.bbox.theta });
        }
        match (kind, b.score) {
            (_, Some(s)) if !(0.0..=1.0).contains(&s) => {
                out.push(Violation::ScoreOutOfRange { index, score: s })
            }
            (RecordKind::Prediction, None) => out.push(Violation::MissingScore { index }),
            _ => {}
        }
    }
    if kind == RecordKind::Annotation {
        if slap.boxes.len() > MAX_BOXES_PER_SLAP {
            out.push(Violation::TooManyBoxes(slap.boxes.len()));
        }
        let mut seen = [false; 10];
        for b in &slap.boxes {
            if std::mem::replace(&mut seen[b.label.index()], true) {
                out.push(Violation::DuplicateLabel(b.label));
            }
        }
        out.extend(validate_against_hand(slap));
    }
    out
}

/// Parses JSONL text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_records(text: &str, kind: RecordKind) -> Result<Vec<AnnotatedSlap>, DatasetError> {
    read_records(BufReader::new(text.as_bytes()), kind, Path::new("<memory>"))
}

fn read_records<R: BufRead>(reader: R, kind: RecordKind, path: &Path) -> Result<Vec<AnnotatedSlap>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotatedSlap =
            serde_json::from_str(&line).map_err(|source| DatasetError::Parse { line: i + 1, source })?;
        if let Some(violation) = validate_record(&rec, kind).into_iter().next() {
            return Err(DatasetError::Invalid { line: i + 1, slap_id: rec.slap_id, violation });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Loads and validates a ground-truth annotation file.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSlap>, DatasetError> {
    load_records(path, RecordKind::Annotation)
}

/// Loads and validates a prediction file.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSlap>, DatasetError> {
    load_records(path, RecordKind::Prediction)
}

pub fn load_records(path: impl AsRef<Path>, kind: RecordKind) -> Result<Vec<AnnotatedSlap>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_records(BufReader::new(file), kind, path)
}

/// Canonical JSONL text for `records`.
pub fn to_jsonl(records: &[AnnotatedSlap]) -> Result<String, DatasetError> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

/// Writes `records` by writing a sibling temporary file and renaming it over
/// `path`, so readers never observe a partial file.
pub fn save_annotations(path: impl AsRef<Path>, records: &[AnnotatedSlap]) -> Result<(), DatasetError> {
    write_atomic(path.as_ref(), to_jsonl(records)?.as_bytes())
}

/// Atomic write-temp-then-rename in the target's directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DatasetError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| DatasetError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| DatasetError::io(path, e))?;
    tmp.persist(path).map_err(|e| DatasetError::io(path, e.error))?;
    Ok(())
}
