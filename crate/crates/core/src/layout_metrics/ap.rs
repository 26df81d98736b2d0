//! Per-class COCO-style average precision for scored detections.
//!
//! Differences from the usual COCO evaluator, all aimed at determinism:
//! predictions with identical scores are ordered by box geometry before
//! greedy matching, and a run of identical scores contributes a single PR
//! point (its cumulative counts) instead of one point per detection. The AP
//! therefore does not depend on input order.

use serde::{Deserialize, Serialize};

use super::{iou, LabeledBox, MetricsError};
use crate::format::{BBox, SemanticClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApConfig {
    pub iou_threshold: f64,
    pub recall_bins: usize,
    /// Per page and class, highest scores kept.
    pub max_dets: usize,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            recall_bins: 101,
            max_dets: 100,
        }
    }
}

/// Max-interpolated precision sampled at uniform recall bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub recall_bins: Vec<f64>,
    pub precision_at: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class: SemanticClass,
    /// `None` when the class has no targets.
    pub ap: Option<f64>,
    pub num_targets: u64,
    pub num_detections: u64,
    pub curve: PrCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ApWarning {
    /// Every detection of the class has the same score, so the PR curve
    /// collapses to a single point.
    DegenerateScores { class: SemanticClass },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub config: ApConfig,
    pub per_class: Vec<ClassAp>,
    /// Mean over classes that have targets.
    pub mean_ap: f64,
    pub warnings: Vec<ApWarning>,
}

fn box_key(b: &BBox) -> (u32, u32, u32, u32) {
    (b.x1, b.y1, b.x2, b.y2)
}

/// Collects matched/unmatched detections page by page; mergeable.
#[derive(Debug, Clone, PartialEq)]
pub struct ApAccumulator {
    config: ApConfig,
    detections: Vec<Vec<(f64, bool)>>,
    num_targets: Vec<u64>,
}

impl ApAccumulator {
    pub fn new(config: ApConfig) -> Result<Self, MetricsError> {
        if config.recall_bins < 2 {
            return Err(MetricsError::InvalidRecallBins(config.recall_bins));
        }
        super::validate_thresholds(&[config.iou_threshold])?;
        Ok(Self {
            config,
            detections: vec![Vec::new(); SemanticClass::COUNT],
            num_targets: vec![0; SemanticClass::COUNT],
        })
    }

    pub fn config(&self) -> &ApConfig {
        &self.config
    }

    pub fn add_page(&mut self, targets: &[LabeledBox], preds: &[LabeledBox]) -> Result<(), MetricsError> {
        if let Some(index) = preds.iter().position(|p| !p.score.is_some_and(f64::is_finite)) {
            return Err(MetricsError::MissingScore { index });
        }
        for class in SemanticClass::ALL {
            let mut tgts: Vec<&LabeledBox> = targets.iter().filter(|t| t.class == class).collect();
            tgts.sort_by_key(|t| box_key(&t.bbox));
            let mut prds: Vec<(usize, &LabeledBox)> = preds.iter().enumerate().filter(|(_, p)| p.class == class).collect();
            prds.sort_by(|(ia, a), (ib, b)| {
                let (sa, sb) = (a.score.unwrap_or(0.0), b.score.unwrap_or(0.0));
                sb.total_cmp(&sa)
                    .then_with(|| box_key(&a.bbox).cmp(&box_key(&b.bbox)))
                    .then_with(|| ia.cmp(ib))
            });
            prds.truncate(self.config.max_dets);

            let mut matched = vec![false; tgts.len()];
            let dets = &mut self.detections[class.index()];
            for (_, p) in prds {
                let mut best: Option<(usize, f64)> = None;
                for (k, t) in tgts.iter().enumerate() {
                    if matched[k] {
                        continue;
                    }
                    let v = iou(&t.bbox, &p.bbox);
                    if v > self.config.iou_threshold && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((k, v));
                    }
                }
                if let Some((k, _)) = best {
                    matched[k] = true;
                }
                dets.push((p.score.unwrap_or(0.0), best.is_some()));
            }
            self.num_targets[class.index()] += tgts.len() as u64;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ApAccumulator) {
        for (a, b) in self.detections.iter_mut().zip(&other.detections) {
            a.extend_from_slice(b);
        }
        for (a, b) in self.num_targets.iter_mut().zip(&other.num_targets) {
            *a += b;
        }
    }

    pub fn finish(&self) -> ApResult {
        let bins = self.config.recall_bins;
        let recall_bins: Vec<f64> = (0..bins).map(|k| k as f64 / (bins - 1) as f64).collect();
        let mut per_class = Vec::with_capacity(SemanticClass::COUNT);
        let mut warnings = Vec::new();

        for class in SemanticClass::ALL {
            let c = class.index();
            let n_targets = self.num_targets[c];
            let mut dets = self.detections[c].clone();
            dets.sort_by(|a, b| b.0.total_cmp(&a.0));

            if dets.len() >= 2 && dets.iter().all(|d| d.0 == dets[0].0) {
                warnings.push(ApWarning::DegenerateScores { class });
            }

            // One PR point per distinct score: cumulative (tp, fp) at the end of each run.
            let mut points: Vec<(u64, u64)> = Vec::new();
            let (mut tp, mut fp) = (0u64, 0u64);
            for (i, &(score, hit)) in dets.iter().enumerate() {
                if hit {
                    tp += 1;
                } else {
                    fp += 1;
                }
                if dets.get(i + 1).is_none_or(|next| next.0 != score) {
                    points.push((tp, fp));
                }
            }
            let mut precision: Vec<f64> = points.iter().map(|&(tp, fp)| tp as f64 / (tp + fp) as f64).collect();
            for i in (0..precision.len().saturating_sub(1)).rev() {
                precision[i] = precision[i].max(precision[i + 1]);
            }

            let precision_at: Vec<f64> = (0..bins)
                .map(|k| {
                    if n_targets == 0 {
                        return 0.0;
                    }
                    // First point whose recall tp / n_targets reaches k / (bins - 1), in integers.
                    let need = k as u128 * n_targets as u128;
                    let idx = points.partition_point(|&(tp, _)| (tp as u128) * ((bins - 1) as u128) < need);
                    precision.get(idx).copied().unwrap_or(0.0)
                })
                .collect();
            let ap = (n_targets > 0).then(|| precision_at.iter().sum::<f64>() / bins as f64);

            per_class.push(ClassAp {
                class,
                ap,
                num_targets: n_targets,
                num_detections: dets.len() as u64,
                curve: PrCurve {
                    recall_bins: recall_bins.clone(),
                    precision_at,
                },
            });
        }

        let with_targets: Vec<f64> = per_class.iter().filter_map(|c| c.ap).collect();
        let mean_ap = if with_targets.is_empty() {
            0.0
        } else {
            with_targets.iter().sum::<f64>() / with_targets.len() as f64
        };
        ApResult {
            config: self.config,
            per_class,
            mean_ap,
            warnings,
        }
    }
}

/// AP for a single page of targets and scored predictions.
pub fn coco_ap(targets: &[LabeledBox], preds: &[LabeledBox], config: ApConfig) -> Result<ApResult, MetricsError> {
    let mut acc = ApAccumulator::new(config)?;
    acc.add_page(targets, preds)?;
    Ok(acc.finish())
}

/// Pointwise mean of per-class curves sharing the same recall bins.
pub fn averaged_pr_curve(curves: &[PrCurve]) -> Result<PrCurve, MetricsError> {
    let first = curves.first().ok_or(MetricsError::NoCurves)?;
    if curves
        .iter()
        .any(|c| c.recall_bins != first.recall_bins || c.precision_at.len() != first.recall_bins.len())
    {
        return Err(MetricsError::BinMismatch);
    }
    let n = curves.len() as f64;
    let precision_at = (0..first.recall_bins.len())
        .map(|k| curves.iter().map(|c| c.precision_at[k]).sum::<f64>() / n)
        .collect();
    Ok(PrCurve {
        recall_bins: first.recall_bins.clone(),
        precision_at,
    })
}
