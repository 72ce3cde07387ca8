//! Verification trials, ROC curves and score files.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::dataset_io::{write_atomic, DatasetError};

/// One probe/gallery comparison. Score files hold one of these per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTrial {
    pub probe: String,
    pub gallery: String,
    pub genuine: bool,
    /// Similarity, higher is more alike. Ignored when `failed`.
    pub score: f64,
    /// Enrollment or comparison failure. A failed genuine trial is never
    /// accepted; a failed impostor trial is never falsely accepted.
    #[serde(default)]
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tar: f64,
    pub far: f64,
}

/// Empirical ROC. Points run from the highest threshold to the lowest, so
/// both rates are non-decreasing along `points`. A trial is accepted at
/// threshold `t` when it did not fail and `score >= t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub n_failed: usize,
    pub points: Vec<RocPoint>,
}

pub fn roc(trials: &[MatchTrial]) -> Result<RocCurve, MetricsError> {
    let n_genuine = trials.iter().filter(|t| t.genuine).count();
    let n_impostor = trials.len() - n_genuine;
    if n_genuine == 0 || n_impostor == 0 {
        return Err(MetricsError::Empty("genuine and impostor trials"));
    }
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(trials.len());
    for t in trials.iter().filter(|t| !t.failed) {
        if !t.score.is_finite() {
            return Err(MetricsError::NonFiniteScore { probe: t.probe.clone(), gallery: t.gallery.clone() });
        }
        scored.push((t.score, t.genuine));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut ga, mut ia) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let s = scored[i].0;
        while i < scored.len() && scored[i].0 == s {
            if scored[i].1 {
                ga += 1;
            } else {
                ia += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: s,
            tar: ga as f64 / n_genuine as f64,
            far: ia as f64 / n_impostor as f64,
        });
    }
    Ok(RocCurve { n_genuine, n_impostor, n_failed: trials.len() - scored.len(), points })
}

impl RocCurve {
    /// Operating point with the highest TAR among thresholds whose FAR does
    /// not exceed `far`. Falls back to rejecting everything (TAR 0, FAR 0)
    /// when no threshold qualifies.
    pub fn operating_point(&self, far: f64) -> RocPoint {
        self.points
            .iter()
            .rev()
            .find(|p| p.far <= far)
            .copied()
            .unwrap_or(RocPoint { threshold: f64::INFINITY, tar: 0.0, far: 0.0 })
    }

    pub fn tar_at_far(&self, far: f64) -> f64 {
        self.operating_point(far).tar
    }
}

pub fn tar_at_far(curve: &RocCurve, far: f64) -> f64 {
    curve.tar_at_far(far)
}

/// The operating point used throughout the evaluation.
pub const FAR_TARGET: f64 = 0.001;

pub fn parse_trials(text: &str) -> Result<Vec<MatchTrial>, DatasetError> {
    parse_trial_lines(BufReader::new(text.as_bytes()), Path::new("<memory>"))
}

pub fn load_trials(path: &Path) -> Result<Vec<MatchTrial>, DatasetError> {
    let f = std::fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    parse_trial_lines(BufReader::new(f), path)
}

fn parse_trial_lines(r: impl BufRead, path: &Path) -> Result<Vec<MatchTrial>, DatasetError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|source| DatasetError::Parse { line: n + 1, source })?;
        out.push(t);
    }
    Ok(out)
}

pub fn trials_to_jsonl(trials: &[MatchTrial]) -> Result<String, DatasetError> {
    let mut s = String::new();
    for t in trials {
        s.push_str(&serde_json::to_string(t).map_err(DatasetError::Serialize)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn save_trials(path: &Path, trials: &[MatchTrial]) -> Result<(), DatasetError> {
    write_atomic(path, trials_to_jsonl(trials)?.as_bytes())
}
