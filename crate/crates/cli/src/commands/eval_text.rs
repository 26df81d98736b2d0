use std::collections::BTreeSet;

use anyhow::{anyhow, Context};
use doclair_core::corpus_io::{
    write_report, AuditSummary, EvalReport, PageRecord, PageTextScore, PairStatus, TextAggregation, TextReport,
};
use doclair_core::sanitize::RejectionReason;
use doclair_core::text_metrics::{normalize_with, score_normalized, NormalizeOptions, ScoreMean, TextScores};
use rayon::prelude::*;
use serde_json::json;

use super::{path_value, tool_info};
use crate::records::{load_keyed, Key};
use crate::{CliResult, EvalTextArgs};

fn page_text(rec: Option<&PageRecord>) -> anyhow::Result<(String, bool)> {
    let Some(rec) = rec else { return Ok((String::new(), false)) };
    let text = rec.text().with_context(|| format!("({}, {})", rec.doc_id, rec.page_index))?;
    let tail = match rec.parse() {
        Ok(r) => r.rejected_tail.is_some(),
        Err(_) => false,
    };
    Ok((text, tail))
}

struct PageResult {
    key: Key,
    status: PairStatus,
    pred: String,
    gt: String,
    pred_tail: bool,
    gt_tail: bool,
}

pub fn run(args: &EvalTextArgs) -> CliResult<()> {
    let pred = load_keyed(&args.pred)?;
    let gt = load_keyed(&args.gt)?;
    let keys: BTreeSet<&Key> = pred.keys().chain(gt.keys()).collect();
    if !pred.keys().any(|k| gt.contains_key(k)) {
        return Err(anyhow!("no (doc_id, page_index) pair occurs in both files").into());
    }
    let opts = NormalizeOptions { keep_case: args.keep_case };

    let pages = keys
        .into_par_iter()
        .map(|key| {
            let (p, g) = (pred.get(key), gt.get(key));
            let status = match (p, g) {
                (Some(_), Some(_)) => PairStatus::Matched,
                (None, _) => PairStatus::MissingPrediction,
                (_, None) => PairStatus::MissingGroundTruth,
            };
            let (pred, pred_tail) = page_text(p)?;
            let (gt, gt_tail) = page_text(g)?;
            Ok(PageResult { key: key.clone(), status, pred, gt, pred_tail, gt_tail })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let scored: Vec<TextScores> = pages
        .par_iter()
        .map(|p| score_normalized(&normalize_with(&p.gt, opts), &normalize_with(&p.pred, opts)))
        .collect();

    let mut audit = AuditSummary::default();
    let mut mean = ScoreMean::default();
    for (p, s) in pages.iter().zip(&scored) {
        *audit.predictions.entry(RejectionReason::SyntaxNonCompliant).or_default() += u64::from(p.pred_tail);
        *audit.ground_truth.entry(RejectionReason::SyntaxNonCompliant).or_default() += u64::from(p.gt_tail);
        mean.add(*s);
    }
    let corpus = if args.micro {
        let join = |f: fn(&PageResult) -> &str| pages.iter().map(f).collect::<Vec<_>>().join("\n");
        let gt = join(|p| &p.gt);
        let pred = join(|p| &p.pred);
        score_normalized(&normalize_with(&gt, opts), &normalize_with(&pred, opts))
    } else {
        mean.mean()
    };

    let page_scores: Vec<PageTextScore> = pages
        .iter()
        .zip(scored)
        .map(|(p, scores)| PageTextScore {
            doc_id: p.key.0.clone(),
            page_index: p.key.1,
            status: p.status,
            scores,
        })
        .collect();
    let flagged_pages = page_scores.iter().filter(|p| p.status != PairStatus::Matched).count() as u64;
    for p in page_scores.iter().filter(|p| p.status != PairStatus::Matched) {
        eprintln!("warning: ({}, {}) {:?}", p.doc_id, p.page_index, p.status);
    }

    let report = EvalReport {
        tool: tool_info(),
        config: json!({
            "command": "eval-text",
            "pred": path_value(&args.pred),
            "gt": path_value(&args.gt),
            "aggregation": if args.micro { "micro" } else { "macro" },
            "keep_case": args.keep_case,
        }),
        audit,
        text: Some(TextReport {
            aggregation: if args.micro { TextAggregation::Micro } else { TextAggregation::Macro },
            pages: page_scores,
            flagged_pages,
            corpus,
        }),
        layout: None,
    };
    write_report(&report, &args.out).map_err(anyhow::Error::from)?;
    Ok(())
}
