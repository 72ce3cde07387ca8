//! Building genuine and impostor comparison lists.

use std::collections::HashSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::roc::MatchTrial;
use crate::augmentation::keyed_rng;
use crate::dataset_io::{AgeGroup, AnnotatedSlap, FingerLabel};

/// One enrolled fingerprint: a crop of a single finger from one slap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintEntry {
    pub id: String,
    pub subject: String,
    pub finger: FingerLabel,
    pub age_group: AgeGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialPolicy {
    /// Non-mated comparisons per probe, sampled without replacement from the
    /// same finger position of other subjects.
    pub impostors_per_probe: usize,
    pub seed: u64,
}

impl Default for TrialPolicy {
    fn default() -> Self {
        Self { impostors_per_probe: 20, seed: 0 }
    }
}

impl FingerprintEntry {
    /// Entry id for box `label` of slap `slap_id`.
    pub fn make_id(slap_id: &str, label: FingerLabel) -> String {
        format!("{slap_id}/{label}")
    }
}

/// One entry per box of `records`, with the record and box index it came
/// from. The subject is taken from a `"subject"` field on the record when
/// present, otherwise each slap is its own subject.
pub fn fingerprint_entries(records: &[AnnotatedSlap]) -> Vec<(FingerprintEntry, usize, usize)> {
    let mut out = Vec::new();
    for (ri, r) in records.iter().enumerate() {
        let subject = r
            .extra
            .get("subject")
            .and_then(|v| v.as_str())
            .unwrap_or(&r.slap_id)
            .to_string();
        for (bi, b) in r.boxes.iter().enumerate() {
            let entry = FingerprintEntry {
                id: FingerprintEntry::make_id(&r.slap_id, b.label),
                subject: subject.clone(),
                finger: b.label,
                age_group: r.age_group,
            };
            out.push((entry, ri, bi));
        }
    }
    out
}

/// A planned comparison, as indices into the probe and gallery lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedPair {
    pub probe: usize,
    pub gallery: usize,
    pub genuine: bool,
}

/// A probe that had fewer impostor candidates than requested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub probe: String,
    pub requested: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialPlan {
    pub pairs: Vec<PlannedPair>,
    pub shortfalls: Vec<Shortfall>,
}

/// Comparison list for `probes` against `gallery`.
///
/// Genuine pairs share subject and finger position. An entry is never
/// compared with itself (same id), and when both orders of a pair are
/// available only the first one met is kept. Impostors for each probe are
/// drawn from gallery entries of the same finger position and a different
/// subject, using a generator keyed by the probe id.
pub fn plan_trials(probes: &[FingerprintEntry], gallery: &[FingerprintEntry], policy: &TrialPolicy) -> TrialPlan {
    let mut plan = TrialPlan::default();
    let mut seen_genuine: HashSet<(&str, &str)> = HashSet::new();
    for (pi, p) in probes.iter().enumerate() {
        for (gi, g) in gallery.iter().enumerate() {
            if g.id == p.id || g.subject != p.subject || g.finger != p.finger {
                continue;
            }
            let key = if p.id <= g.id { (p.id.as_str(), g.id.as_str()) } else { (g.id.as_str(), p.id.as_str()) };
            if seen_genuine.insert(key) {
                plan.pairs.push(PlannedPair { probe: pi, gallery: gi, genuine: true });
            }
        }

        let cands: Vec<usize> = gallery
            .iter()
            .enumerate()
            .filter(|(_, g)| g.finger == p.finger && g.subject != p.subject)
            .map(|(i, _)| i)
            .collect();
        let k = policy.impostors_per_probe.min(cands.len());
        if k < policy.impostors_per_probe {
            plan.shortfalls.push(Shortfall {
                probe: p.id.clone(),
                requested: policy.impostors_per_probe,
                available: cands.len(),
            });
        }
        let mut rng = keyed_rng(policy.seed, &p.id, 0);
        let mut picked: Vec<usize> = sample(&mut rng, cands.len(), k).into_iter().map(|i| cands[i]).collect();
        picked.sort_unstable();
        plan.pairs.extend(picked.into_iter().map(|gi| PlannedPair { probe: pi, gallery: gi, genuine: false }));
    }
    plan
}

/// Something that can compare two enrolled fingerprints. `None` marks a
/// failure to enroll or compare.
pub trait Scorer {
    fn score(&self, probe: &FingerprintEntry, gallery: &FingerprintEntry) -> Option<f64>;
}

impl<F> Scorer for F
where
    F: Fn(&FingerprintEntry, &FingerprintEntry) -> Option<f64>,
{
    fn score(&self, probe: &FingerprintEntry, gallery: &FingerprintEntry) -> Option<f64> {
        self(probe, gallery)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialSet {
    pub trials: Vec<MatchTrial>,
    /// Age group of each trial's probe, parallel to `trials`.
    pub cohorts: Vec<AgeGroup>,
    pub shortfalls: Vec<Shortfall>,
}

/// Plans the comparisons and scores them.
pub fn build_trials(
    probes: &[FingerprintEntry],
    gallery: &[FingerprintEntry],
    policy: &TrialPolicy,
    scorer: &(impl Scorer + Sync),
) -> TrialSet {
    use rayon::prelude::*;
    let plan = plan_trials(probes, gallery, policy);
    let trials: Vec<MatchTrial> = plan
        .pairs
        .par_iter()
        .map(|pp| {
            let (p, g) = (&probes[pp.probe], &gallery[pp.gallery]);
            let score = scorer.score(p, g);
            MatchTrial {
                probe: p.id.clone(),
                gallery: g.id.clone(),
                genuine: pp.genuine,
                score: score.unwrap_or(0.0),
                failed: score.is_none(),
            }
        })
        .collect();
    let cohorts = plan.pairs.iter().map(|pp| probes[pp.probe].age_group).collect();
    TrialSet { trials, cohorts, shortfalls: plan.shortfalls }
}
