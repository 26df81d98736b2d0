use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::layout_metrics::{ApResult, ConfusionMatrix, DerivedMetrics, PrCurve, ThresholdMeans};
use crate::sanitize::RejectionReason;
use crate::text_metrics::TextScores;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

/// Rejection counts per reason, every reason always present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub predictions: BTreeMap<RejectionReason, u64>,
    pub ground_truth: BTreeMap<RejectionReason, u64>,
}

impl Default for AuditSummary {
    fn default() -> Self {
        let zero: BTreeMap<_, _> = RejectionReason::ALL.iter().map(|&r| (r, 0)).collect();
        Self { predictions: zero.clone(), ground_truth: zero }
    }
}

impl AuditSummary {
    pub fn merge(&mut self, other: &AuditSummary) {
        for (k, v) in &other.predictions {
            *self.predictions.entry(*k).or_default() += v;
        }
        for (k, v) in &other.ground_truth {
            *self.ground_truth.entry(*k).or_default() += v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Matched,
    MissingPrediction,
    MissingGroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageTextScore {
    pub doc_id: String,
    pub page_index: u64,
    pub status: PairStatus,
    pub scores: TextScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextAggregation {
    /// Mean of per-page scores.
    Macro,
    /// One score over the concatenated corpus.
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextReport {
    pub aggregation: TextAggregation,
    pub pages: Vec<PageTextScore>,
    pub flagged_pages: u64,
    pub corpus: TextScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: DerivedMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    /// One result per IoU threshold, in threshold order.
    pub per_threshold: Vec<ApResult>,
    /// Mean of `mean_ap` over thresholds.
    pub mean_ap: f64,
    /// Pointwise mean of the per-class curves (classes with targets) at the
    /// first threshold.
    pub averaged_curve: Option<PrCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutReport {
    pub pages: u64,
    pub thresholds: Vec<ThresholdReport>,
    /// Counts summed over thresholds, not divided.
    pub pooled_confusion: ConfusionMatrix,
    pub pooled: DerivedMetrics,
    pub averaged: ThresholdMeans,
    pub ap: Option<ApReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool: ToolInfo,
    pub config: serde_json::Value,
    pub audit: AuditSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<TextReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutReport>,
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory writer")
}

fn scores_csv(text: &TextReport) -> Vec<u8> {
    let mut w = csv_writer();
    let header = [
        "doc_id", "page_index", "status", "wer", "edit_distance", "f1", "precision", "recall", "counting_f1", "bleu",
        "meteor",
    ];
    w.write_record(header).expect("in-memory writer");
    for p in &text.pages {
        let s = &p.scores;
        let status = serde_json::to_value(p.status).expect("unit enum");
        let row = [
            p.doc_id.clone(),
            p.page_index.to_string(),
            status.as_str().unwrap_or_default().to_string(),
            s.wer.to_string(),
            s.edit_distance.to_string(),
            s.f1.to_string(),
            s.precision.to_string(),
            s.recall.to_string(),
            s.counting_f1.to_string(),
            s.bleu.to_string(),
            s.meteor.to_string(),
        ];
        w.write_record(&row).expect("in-memory writer");
    }
    finish(w)
}

/// `recall` followed by one precision column per class with targets, then
/// the class-averaged curve.
fn pr_curves_csv(ap: &ApReport) -> Option<Vec<u8>> {
    let first = ap.per_threshold.first()?;
    let classes: Vec<_> = first.per_class.iter().filter(|c| c.ap.is_some()).collect();
    let recall = &first.per_class.first()?.curve.recall_bins;
    let mut w = csv_writer();
    let mut header = vec!["recall".to_string()];
    header.extend(classes.iter().map(|c| c.class.name().to_string()));
    header.push("mean".into());
    w.write_record(&header).expect("in-memory writer");
    for (k, r) in recall.iter().enumerate() {
        let mut row = vec![r.to_string()];
        row.extend(classes.iter().map(|c| c.curve.precision_at[k].to_string()));
        row.push(ap.averaged_curve.as_ref().map_or_else(String::new, |c| c.precision_at[k].to_string()));
        w.write_record(&row).expect("in-memory writer");
    }
    Some(finish(w))
}

pub fn threshold_file_name(threshold: f64) -> String {
    format!("confusion_matrix_iou_{threshold}.csv")
}

/// Writes `report.json` plus the CSV side files that apply to the report.
/// Returns the written paths in the order written.
pub fn write_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, CorpusError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();

    let mut json = serde_json::to_vec_pretty(report).expect("report is always serializable");
    json.push(b'\n');
    files.push(("report.json".into(), json));

    if let Some(layout) = &report.layout {
        files.push(("confusion_matrix_pooled.csv".into(), layout.pooled_confusion.to_csv().into_bytes()));
        for t in &layout.thresholds {
            files.push((threshold_file_name(t.threshold), t.confusion.to_csv().into_bytes()));
        }
        if let Some(csv) = layout.ap.as_ref().and_then(pr_curves_csv) {
            files.push(("pr_curves.csv".into(), csv));
        }
    }
    if let Some(text) = &report.text {
        files.push(("scores_per_doc.csv".into(), scores_csv(text)));
    }

    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CorpusError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
