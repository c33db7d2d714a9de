use std::fmt::Write;
use std::ops::{Add, AddAssign};

use crate::raster::BoundingBox;

/// Default overlap for a match.
pub const MATCH_IOU: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub fmeasure: f64,
}

impl Metrics {
    pub fn new(precision: f64, recall: f64) -> Self {
        let fmeasure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            fmeasure,
        }
    }
}

/// Match tallies, summed over images before turning into [`Metrics`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub matched: usize,
    pub predicted: usize,
    pub truth: usize,
}

impl MatchCounts {
    /// Both sides empty counts as perfect; otherwise an empty side scores 0.
    pub fn metrics(&self) -> Metrics {
        if self.predicted == 0 && self.truth == 0 {
            return Metrics::new(1.0, 1.0);
        }
        let ratio = |n: usize| if n == 0 { 0.0 } else { self.matched as f64 / n as f64 };
        Metrics::new(ratio(self.predicted), ratio(self.truth))
    }
}

impl Add for MatchCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            matched: self.matched + o.matched,
            predicted: self.predicted + o.predicted,
            truth: self.truth + o.truth,
        }
    }
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for MatchCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// One-to-one matching: candidate pairs with IoU ≥ `iou_min` are taken in
/// descending IoU order (ties by prediction, then truth index), skipping
/// any whose prediction or truth is already used. Returns the matched
/// `(pred, truth)` index pairs.
pub fn greedy_match(pred: &[BoundingBox], truth: &[BoundingBox], iou_min: f64) -> Vec<(usize, usize)> {
    let mut cands = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let iou = p.iou(t);
            if iou >= iou_min && iou > 0.0 {
                cands.push((iou, i, j));
            }
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; pred.len()];
    let mut used_t = vec![false; truth.len()];
    let mut out = Vec::new();
    for (_, i, j) in cands {
        if !used_p[i] && !used_t[j] {
            used_p[i] = true;
            used_t[j] = true;
            out.push((i, j));
        }
    }
    out
}

pub fn match_counts(pred: &[BoundingBox], truth: &[BoundingBox], iou_min: f64) -> MatchCounts {
    MatchCounts {
        matched: greedy_match(pred, truth, iou_min).len(),
        predicted: pred.len(),
        truth: truth.len(),
    }
}

/// Precision, recall and F-measure of one image under [`greedy_match`].
pub fn match_boxes(pred: &[BoundingBox], truth: &[BoundingBox], iou_min: f64) -> Metrics {
    match_counts(pred, truth, iou_min).metrics()
}

/// `(hit, total)`: truth boxes overlapped at IoU ≥ 0.5 by some component.
pub fn recall_counts(components: &[BoundingBox], char_truth: &[BoundingBox]) -> (usize, usize) {
    let hit = char_truth
        .iter()
        .filter(|t| components.iter().any(|c| c.iou(t) >= MATCH_IOU))
        .count();
    (hit, char_truth.len())
}

/// Fraction of truth characters overlapped at IoU ≥ 0.5 by at least one
/// component; 1 when there is no truth.
pub fn component_recall(components: &[BoundingBox], char_truth: &[BoundingBox]) -> f64 {
    match recall_counts(components, char_truth) {
        (_, 0) => 1.0,
        (hit, total) => hit as f64 / total as f64,
    }
}

/// Aligned table of named runs, best F-measure first (ties keep input
/// order).
pub fn report(runs: &[(String, Metrics)]) -> String {
    let mut rows: Vec<&(String, Metrics)> = runs.iter().collect();
    rows.sort_by(|a, b| b.1.fmeasure.total_cmp(&a.1.fmeasure));
    let width = rows
        .iter()
        .map(|(n, _)| n.chars().count())
        .chain(["Method".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    writeln!(
        out,
        "{:<width$}  {:>9}  {:>6}  {:>8}",
        "Method", "Precision", "Recall", "Fmeasure"
    )
    .unwrap();
    for (name, m) in rows {
        writeln!(
            out,
            "{:<width$}  {:>9.2}  {:>6.2}  {:>8.2}",
            name, m.precision, m.recall, m.fmeasure
        )
        .unwrap();
    }
    out
}
