use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;
use crate::format::SemanticClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: SemanticClass,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// False when the class has neither targets nor predictions; such
    /// classes are left out of the macro averages.
    pub support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    /// Macro recall.
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
    pub overall_accuracy: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    ratio(sum, n as f64)
}

pub fn derive(cm: &ConfusionMatrix) -> DerivedMetrics {
    let total = cm.total();
    let per_class: Vec<ClassMetrics> = SemanticClass::ALL
        .iter()
        .map(|&class| {
            let c = class.index();
            let tp = cm.get(c, c);
            let col = cm.col_sum(c);
            let row = cm.row_sum(c);
            let fp = col - tp;
            let fn_ = row - tp;
            let tn = total + tp - col - row;
            // Denominators floored at 1, so 0/0 reads as 0.
            let precision = tp as f64 / (tp + fp).max(1) as f64;
            let recall = tp as f64 / (tp + fn_).max(1) as f64;
            ClassMetrics {
                class,
                tp,
                fp,
                fn_,
                tn,
                precision,
                recall,
                f1: harmonic(precision, recall),
                accuracy: ratio((tp + tn) as f64, (tp + tn + fp + fn_) as f64),
                support: row + col > 0,
            }
        })
        .collect();

    let supported = || per_class.iter().filter(|m| m.support);
    let macro_precision = mean(supported().map(|m| m.precision));
    let balanced_accuracy = mean(supported().map(|m| m.recall));
    let correct: u64 = per_class.iter().map(|m| m.tp).sum();
    DerivedMetrics {
        macro_f1: harmonic(macro_precision, balanced_accuracy),
        macro_precision,
        balanced_accuracy,
        overall_accuracy: ratio(correct as f64, total as f64),
        per_class,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMeans {
    pub class: SemanticClass,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: bool,
}

/// Metrics averaged over IoU thresholds (mP / mR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMeans {
    pub mean_precision: f64,
    pub mean_recall: f64,
    /// Harmonic mean of `mean_precision` and `mean_recall`.
    pub mean_f1: f64,
    pub per_class: Vec<ClassMeans>,
}

/// Derives each matrix, then takes the arithmetic mean of precision and
/// recall across thresholds, per class and for the macro values.
pub fn mean_metrics_over_thresholds(per_threshold: &[ConfusionMatrix]) -> ThresholdMeans {
    let derived: Vec<DerivedMetrics> = per_threshold.iter().map(derive).collect();
    let per_class = SemanticClass::ALL
        .iter()
        .map(|&class| {
            let c = class.index();
            let precision = mean(derived.iter().map(|d| d.per_class[c].precision));
            let recall = mean(derived.iter().map(|d| d.per_class[c].recall));
            ClassMeans {
                class,
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: derived.iter().any(|d| d.per_class[c].support),
            }
        })
        .collect();
    let mean_precision = mean(derived.iter().map(|d| d.macro_precision));
    let mean_recall = mean(derived.iter().map(|d| d.balanced_accuracy));
    ThresholdMeans {
        mean_precision,
        mean_recall,
        mean_f1: harmonic(mean_precision, mean_recall),
        per_class,
    }
}
