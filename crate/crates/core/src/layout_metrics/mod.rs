//! Layout detection metrics.
//!
//! Boxes are matched across all classes jointly (optimal assignment on IoU)
//! before classes are compared, which yields a confusion matrix with an
//! extra background row/column for unmatched targets and predictions.
//! Per-class precision/recall follow from that matrix and can be averaged
//! over several IoU thresholds. A per-class COCO-style AP is provided as a
//! baseline for scored detectors.

mod ap;
mod derived;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{min_cost_assignment, CostMatrix};
use crate::format::{BBox, SemanticClass};

pub use ap::{averaged_pr_curve, coco_ap, ApAccumulator, ApConfig, ApResult, ApWarning, ClassAp, PrCurve};
pub use derived::{derive, mean_metrics_over_thresholds, ClassMeans, ClassMetrics, DerivedMetrics, ThresholdMeans};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("prediction {index} has no score")]
    MissingScore { index: usize },
    #[error("PR curves use different recall bins")]
    BinMismatch,
    #[error("no PR curves to average")]
    NoCurves,
    #[error("at least one IoU threshold is required")]
    EmptyThresholds,
    #[error("IoU threshold {0} is outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("at least two recall bins are required, got {0}")]
    InvalidRecallBins(usize),
}

/// `0.50, 0.55, ..., 0.95`
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<(), MetricsError> {
    if thresholds.is_empty() {
        return Err(MetricsError::EmptyThresholds);
    }
    match thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        Some(&t) => Err(MetricsError::InvalidThreshold(t)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub bbox: BBox,
    pub class: SemanticClass,
    /// Detector confidence in [0, 1]; absent for inline autoregressive predictions.
    pub score: Option<f64>,
}

impl LabeledBox {
    pub fn new(bbox: BBox, class: SemanticClass) -> Self {
        Self {
            bbox,
            class,
            score: None,
        }
    }

    pub fn scored(bbox: BBox, class: SemanticClass, score: f64) -> Self {
        Self {
            bbox,
            class,
            score: Some(score),
        }
    }
}

/// Intersection over union. Zero-area boxes and anything non-finite give 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = f64::from(a.x2.min(b.x2)) - f64::from(a.x1.max(b.x1));
    let ih = f64::from(a.y2.min(b.y2)) - f64::from(a.y1.max(b.y1));
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    let v = inter / union;
    if v.is_finite() && v > 0.0 {
        v
    } else {
        0.0
    }
}

fn iou_matrix(targets: &[BBox], preds: &[BBox]) -> Vec<Vec<f64>> {
    targets.iter().map(|t| preds.iter().map(|p| iou(t, p)).collect()).collect()
}

fn assign_from_iou(iou: &[Vec<f64>], n_targets: usize, n_preds: usize) -> Vec<(usize, usize)> {
    min_cost_assignment(&CostMatrix::from_fn(n_targets, n_preds, |i, j| -iou[i][j]))
}

/// Maximum-total-IoU one-to-one matching of targets to predictions, ignoring
/// classes. Returns `min(|targets|, |preds|)` `(target, pred)` pairs sorted by
/// target; ties resolve to the lexicographically smallest pair list.
pub fn assign(targets: &[BBox], preds: &[BBox]) -> Vec<(usize, usize)> {
    assign_from_iou(&iou_matrix(targets, preds), targets.len(), preds.len())
}

/// `(C+1) x (C+1)` counts, rows = target class, columns = predicted class,
/// last index = background (unmatched).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

impl ConfusionMatrix {
    pub const SIZE: usize = SemanticClass::COUNT + 1;
    pub const BACKGROUND: usize = SemanticClass::COUNT;

    pub fn new() -> Self {
        Self {
            counts: vec![vec![0; Self::SIZE]; Self::SIZE],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Option<Self> {
        let ok = counts.len() == Self::SIZE && counts.iter().all(|r| r.len() == Self::SIZE);
        ok.then_some(Self { counts })
    }

    pub fn get(&self, target: usize, pred: usize) -> u64 {
        self.counts[target][pred]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    fn bump(&mut self, target: usize, pred: usize) {
        self.counts[target][pred] += 1;
    }

    pub fn row_sum(&self, target: usize) -> u64 {
        self.counts[target].iter().sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        self.counts.iter().map(|r| r[pred]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Elementwise sum; associative and commutative.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    /// Comma-separated, LF line endings. The header has an empty corner cell
    /// followed by the class names and `background`; each row starts with its
    /// target class name.
    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = SemanticClass::ALL
            .iter()
            .map(|c| c.name())
            .chain(std::iter::once("background"))
            .collect();
        let mut out = String::new();
        out.push(',');
        out.push_str(&names.join(","));
        out.push('\n');
        for (name, row) in names.iter().zip(&self.counts) {
            out.push_str(name);
            for c in row {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn accumulate(
    targets: &[LabeledBox],
    preds: &[LabeledBox],
    iou: &[Vec<f64>],
    pairs: &[(usize, usize)],
    iou_threshold: f64,
    cm: &mut ConfusionMatrix,
) {
    const BG: usize = ConfusionMatrix::BACKGROUND;
    let mut target_used = vec![false; targets.len()];
    let mut pred_used = vec![false; preds.len()];
    for &(t, p) in pairs {
        target_used[t] = true;
        pred_used[p] = true;
    }
    for (t, _) in targets.iter().enumerate().filter(|(i, _)| !target_used[*i]) {
        cm.bump(targets[t].class.index(), BG);
    }
    for (p, _) in preds.iter().enumerate().filter(|(i, _)| !pred_used[*i]) {
        cm.bump(BG, preds[p].class.index());
    }
    for &(t, p) in pairs {
        let (tc, pc) = (targets[t].class.index(), preds[p].class.index());
        if iou[t][p] > iou_threshold {
            cm.bump(tc, pc);
        } else {
            cm.bump(tc, BG);
            cm.bump(BG, pc);
        }
    }
}

/// Adds one page to `acc` at a single IoU threshold.
///
/// Matched pairs at or below the threshold count as both a missed target and
/// a spurious prediction.
pub fn confusion_at(
    targets: &[LabeledBox],
    preds: &[LabeledBox],
    iou_threshold: f64,
    mut acc: ConfusionMatrix,
) -> ConfusionMatrix {
    let tb: Vec<BBox> = targets.iter().map(|t| t.bbox).collect();
    let pb: Vec<BBox> = preds.iter().map(|p| p.bbox).collect();
    let iou = iou_matrix(&tb, &pb);
    let pairs = assign_from_iou(&iou, tb.len(), pb.len());
    accumulate(targets, preds, &iou, &pairs, iou_threshold, &mut acc);
    acc
}

/// Confusion matrices for a list of IoU thresholds plus their elementwise sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    pub thresholds: Vec<f64>,
    pub per_threshold: Vec<ConfusionMatrix>,
}

impl ThresholdSweep {
    pub fn new(thresholds: Vec<f64>) -> Result<Self, MetricsError> {
        validate_thresholds(&thresholds)?;
        let per_threshold = vec![ConfusionMatrix::new(); thresholds.len()];
        Ok(Self {
            thresholds,
            per_threshold,
        })
    }

    /// Adds one page. The assignment is computed once and shared by every threshold.
    pub fn add_page(&mut self, targets: &[LabeledBox], preds: &[LabeledBox]) {
        let tb: Vec<BBox> = targets.iter().map(|t| t.bbox).collect();
        let pb: Vec<BBox> = preds.iter().map(|p| p.bbox).collect();
        let iou = iou_matrix(&tb, &pb);
        let pairs = assign_from_iou(&iou, tb.len(), pb.len());
        for (thr, cm) in self.thresholds.iter().zip(self.per_threshold.iter_mut()) {
            accumulate(targets, preds, &iou, &pairs, *thr, cm);
        }
    }

    /// Panics if the threshold lists differ.
    pub fn merge(&mut self, other: &ThresholdSweep) {
        assert_eq!(self.thresholds, other.thresholds, "merging sweeps over different thresholds");
        for (a, b) in self.per_threshold.iter_mut().zip(&other.per_threshold) {
            a.merge(b);
        }
    }

    pub fn pooled(&self) -> ConfusionMatrix {
        let mut pooled = ConfusionMatrix::new();
        for cm in &self.per_threshold {
            pooled.merge(cm);
        }
        pooled
    }
}

/// Per-threshold matrices for one page and their pooled sum.
pub fn confusion_averaged(
    targets: &[LabeledBox],
    preds: &[LabeledBox],
    thresholds: &[f64],
) -> Result<(Vec<ConfusionMatrix>, ConfusionMatrix), MetricsError> {
    let mut sweep = ThresholdSweep::new(thresholds.to_vec())?;
    sweep.add_page(targets, preds);
    let pooled = sweep.pooled();
    Ok((sweep.per_threshold, pooled))
}
