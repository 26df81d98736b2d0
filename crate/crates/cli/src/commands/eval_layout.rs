use std::collections::{BTreeMap, BTreeSet};

use anyhow::{anyhow, Context};
use doclair_core::corpus_io::{write_report, ApReport, AuditSummary, EvalReport, LayoutReport, PageRecord, ThresholdReport};
use doclair_core::format::{FormatError, ParseReport};
use doclair_core::layout_metrics::{
    averaged_pr_curve, derive, mean_metrics_over_thresholds, ApAccumulator, ApConfig, LabeledBox, MetricsError,
    ThresholdSweep,
};
use doclair_core::sanitize::{check_block, RejectionReason};
use rayon::prelude::*;
use serde_json::json;

use super::{path_value, tool_info};
use crate::records::{load_keyed, Key};
use crate::{CliError, CliResult, EvalLayoutArgs};

type Counts = BTreeMap<RejectionReason, u64>;

/// Valid boxes of one record plus rejection counts. Blocks that pass the
/// checks but lack a box or class make the record unusable for layout.
fn boxes(rec: Option<&PageRecord>, counts: &mut Counts) -> anyhow::Result<Vec<LabeledBox>> {
    let Some(rec) = rec else { return Ok(Vec::new()) };
    let ctx = || format!("({}, {})", rec.doc_id, rec.page_index);
    let report = match rec.parse() {
        Ok(r) => r,
        Err(FormatError::EmptyInput) => ParseReport { blocks: Vec::new(), rejected_tail: None },
        Err(e) => return Err(e).with_context(ctx),
    };
    if report.rejected_tail.is_some() {
        *counts.entry(RejectionReason::SyntaxNonCompliant).or_default() += 1;
    }
    let scores = rec.scores(report.blocks.len());
    let mut out = Vec::with_capacity(report.blocks.len());
    for (i, parsed) in report.blocks.iter().enumerate() {
        match check_block(parsed, rec.dims) {
            Ok(block) => {
                let (Some(bbox), Some(class)) = (block.bbox, block.class) else {
                    return Err(anyhow!("block {i} has no box or no class")).with_context(ctx);
                };
                out.push(LabeledBox { bbox, class, score: scores.get(i).copied().flatten() });
            }
            Err(reason) => *counts.entry(reason).or_default() += 1,
        }
    }
    Ok(out)
}

struct PagePartial {
    sweep: ThresholdSweep,
    ap: Vec<ApAccumulator>,
    audit: AuditSummary,
}

pub fn run(args: &EvalLayoutArgs) -> CliResult<()> {
    let pred = load_keyed(&args.pred)?;
    let gt = load_keyed(&args.gt)?;
    let keys: Vec<&Key> = pred.keys().chain(gt.keys()).collect::<BTreeSet<_>>().into_iter().collect();
    let empty_sweep = ThresholdSweep::new(args.thresholds.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let ap_configs: Vec<ApConfig> = if args.ap {
        args.thresholds
            .iter()
            .map(|&t| ApConfig { iou_threshold: t, recall_bins: args.recall_bins as usize, max_dets: args.max_dets as usize })
            .collect()
    } else {
        Vec::new()
    };
    let empty_ap = ap_configs
        .iter()
        .map(|&c| ApAccumulator::new(c))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let partials = keys
        .par_iter()
        .map(|key| {
            let mut audit = AuditSummary::default();
            let preds = boxes(pred.get(*key), &mut audit.predictions)?;
            let targets = boxes(gt.get(*key), &mut audit.ground_truth)?;
            let mut sweep = empty_sweep.clone();
            sweep.add_page(&targets, &preds);
            let mut ap = empty_ap.clone();
            for acc in &mut ap {
                acc.add_page(&targets, &preds).map_err(|e| match e {
                    MetricsError::MissingScore { index } => {
                        anyhow!("MissingScore: ({}, {}) prediction {index} has no score; --ap needs scored predictions", key.0, key.1)
                    }
                    other => anyhow!(other),
                })?;
            }
            Ok(PagePartial { sweep, ap, audit })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    // Single reducer in key order.
    let mut sweep = empty_sweep;
    let mut ap = empty_ap;
    let mut audit = AuditSummary::default();
    for p in &partials {
        sweep.merge(&p.sweep);
        for (a, b) in ap.iter_mut().zip(&p.ap) {
            a.merge(b);
        }
        audit.merge(&p.audit);
    }

    let thresholds = sweep
        .thresholds
        .iter()
        .zip(&sweep.per_threshold)
        .map(|(&threshold, cm)| ThresholdReport { threshold, confusion: cm.clone(), metrics: derive(cm) })
        .collect();
    let pooled_confusion = sweep.pooled();
    let ap = args.ap.then(|| {
        let per_threshold: Vec<_> = ap.iter().map(ApAccumulator::finish).collect();
        let mean_ap = per_threshold.iter().map(|r| r.mean_ap).sum::<f64>() / per_threshold.len() as f64;
        let curves: Vec<_> = per_threshold[0]
            .per_class
            .iter()
            .filter(|c| c.ap.is_some())
            .map(|c| c.curve.clone())
            .collect();
        ApReport { averaged_curve: averaged_pr_curve(&curves).ok(), per_threshold, mean_ap }
    });
    let layout = LayoutReport {
        pages: keys.len() as u64,
        thresholds,
        pooled: derive(&pooled_confusion),
        pooled_confusion,
        averaged: mean_metrics_over_thresholds(&sweep.per_threshold),
        ap,
    };

    let report = EvalReport {
        tool: tool_info(),
        config: json!({
            "command": "eval-layout",
            "pred": path_value(&args.pred),
            "gt": path_value(&args.gt),
            "thresholds": args.thresholds,
            "ap": args.ap,
            "recall_bins": args.recall_bins,
            "max_dets": args.max_dets,
        }),
        audit,
        text: None,
        layout: Some(layout),
    };
    write_report(&report, &args.out).map_err(anyhow::Error::from)?;
    Ok(())
}
