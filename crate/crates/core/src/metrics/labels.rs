//! Finger-label accuracy and greedy box pairing.

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::dataset_io::FingerLabel;
use crate::geometry::{rotated_iou, RotatedBox};

/// A set of finger labels as a bitmask over [`FingerLabel::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelSet(u16);

impl LabelSet {
    pub fn insert(&mut self, l: FingerLabel) {
        self.0 |= 1 << l.index();
    }

    pub fn contains(&self, l: FingerLabel) -> bool {
        self.0 & (1 << l.index()) != 0
    }

    pub fn len(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn symmetric_difference_len(&self, other: &LabelSet) -> u32 {
        (self.0 ^ other.0).count_ones()
    }
}

impl FromIterator<FingerLabel> for LabelSet {
    fn from_iter<I: IntoIterator<Item = FingerLabel>>(iter: I) -> Self {
        let mut s = LabelSet::default();
        for l in iter {
            s.insert(l);
        }
        s
    }
}

impl<'a> FromIterator<&'a FingerLabel> for LabelSet {
    fn from_iter<I: IntoIterator<Item = &'a FingerLabel>>(iter: I) -> Self {
        iter.into_iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelAccuracy {
    pub hamming_loss: f64,
    /// `1 - hamming_loss`.
    pub accuracy: f64,
}

/// Multi-label Hamming accuracy over slaps:
/// `1 - (1/N) * sum_i |Y_i xor Z_i| / L`.
pub fn label_accuracy(
    gt: &[LabelSet],
    pred: &[LabelSet],
    num_labels: usize,
) -> Result<LabelAccuracy, MetricsError> {
    if gt.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { left: gt.len(), right: pred.len() });
    }
    if gt.is_empty() {
        return Err(MetricsError::Empty("label sets"));
    }
    if num_labels == 0 {
        return Err(MetricsError::Empty("label vocabulary"));
    }
    let total: u64 = gt.iter().zip(pred).map(|(y, z)| y.symmetric_difference_len(z) as u64).sum();
    let hamming_loss = total as f64 / (gt.len() as f64 * num_labels as f64);
    Ok(LabelAccuracy { hamming_loss, accuracy: 1.0 - hamming_loss })
}

/// IoU below which a prediction cannot be paired with a ground-truth box.
pub const PAIRING_IOU_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pairing {
    /// `(gt index, pred index, IoU)` in the order the pairs were formed.
    pub matches: Vec<(usize, usize, f64)>,
    pub missed_gt: Vec<usize>,
    pub spurious_pred: Vec<usize>,
}

/// Greedy one-to-one pairing by descending IoU. Ties go to the lower ground
/// truth index, then the lower prediction index. Pairs with IoU under
/// `floor` are never formed.
pub fn pair_boxes(gt: &[RotatedBox], pred: &[RotatedBox], floor: f64) -> Pairing {
    let mut cands: Vec<(usize, usize, f64)> = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let iou = rotated_iou(g, p);
            if iou >= floor && iou > 0.0 {
                cands.push((gi, pi, iou));
            }
        }
    }
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut out = Pairing::default();
    for (gi, pi, iou) in cands {
        if !gt_used[gi] && !pred_used[pi] {
            gt_used[gi] = true;
            pred_used[pi] = true;
            out.matches.push((gi, pi, iou));
        }
    }
    out.missed_gt = (0..gt.len()).filter(|&i| !gt_used[i]).collect();
    out.spurious_pred = (0..pred.len()).filter(|&i| !pred_used[i]).collect();
    out
}
