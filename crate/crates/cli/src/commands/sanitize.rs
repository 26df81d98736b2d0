use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Context;
use doclair_core::corpus_io::PageRecord;
use doclair_core::format::{FormatError, ParseReport};
use doclair_core::sanitize::{sanitize_page, RejectionReason, SanitizeConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::records::{block_record, load_keyed, write_jsonl};
use crate::{CliResult, SanitizeArgs};

#[derive(Debug, Serialize)]
struct AuditLine {
    doc_id: String,
    page_index: u64,
    reason: RejectionReason,
    detail: String,
}

pub(crate) fn config(args: &SanitizeArgs) -> SanitizeConfig {
    SanitizeConfig {
        repetition_min_unit_chars: args.min_unit as usize,
        repetition_min_repeats: args.min_repeats as usize,
        enable_repetition_filter: !args.no_repetition_filter,
    }
    .normalized()
}

/// Parses (if raw) and sanitizes one record. Scores follow their blocks.
/// An empty raw stream is an empty page.
pub(crate) fn clean(rec: &PageRecord, cfg: &SanitizeConfig) -> anyhow::Result<(PageRecord, Vec<(RejectionReason, String)>)> {
    let report = match rec.parse() {
        Ok(r) => r,
        Err(FormatError::EmptyInput) => ParseReport { blocks: Vec::new(), rejected_tail: None },
        Err(e) => return Err(e).with_context(|| format!("({}, {})", rec.doc_id, rec.page_index)),
    };
    let scores = rec.scores(report.blocks.len());
    let s = sanitize_page(&report, rec.dims, cfg);
    let blocks = s
        .page
        .blocks
        .iter()
        .zip(&s.source_indices)
        .map(|(b, &i)| block_record(b, scores.get(i).copied().flatten()))
        .collect();
    let audit = s.audit.into_iter().map(|a| (a.reason, a.detail)).collect();
    Ok((PageRecord::blocks(rec.doc_id.clone(), rec.page_index, rec.dims, blocks), audit))
}

fn audit_path(args: &SanitizeArgs) -> PathBuf {
    args.audit.clone().unwrap_or_else(|| {
        let mut s = args.output.clone().into_os_string();
        s.push(".audit.jsonl");
        s.into()
    })
}

pub fn run(args: &SanitizeArgs) -> CliResult<()> {
    let cfg = config(args);
    let records: Vec<PageRecord> = load_keyed(&args.input)?.into_values().collect();
    let cleaned = records
        .par_iter()
        .map(|r| clean(r, &cfg))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut counts: BTreeMap<RejectionReason, u64> = RejectionReason::ALL.iter().map(|&r| (r, 0)).collect();
    let mut audit = Vec::new();
    for (rec, entries) in &cleaned {
        for (reason, detail) in entries {
            *counts.entry(*reason).or_default() += 1;
            audit.push(AuditLine {
                doc_id: rec.doc_id.clone(),
                page_index: rec.page_index,
                reason: *reason,
                detail: detail.clone(),
            });
        }
    }
    write_jsonl(&args.output, cleaned.iter().map(|(r, _)| r))?;
    write_jsonl(&audit_path(args), &audit)?;
    let summary = serde_json::json!({ "records": cleaned.len(), "rejections": counts });
    println!("{}", serde_json::to_string_pretty(&summary).expect("plain data"));
    Ok(())
}
