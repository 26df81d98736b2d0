use std::io::Write;

use anyhow::Context;
use doclair_core::corpus_io::{read_records, BlockRecord, CorpusError, PageRecord, Payload};
use doclair_core::format::PageDims;
use rayon::prelude::*;
use serde::Serialize;

use crate::records::create;
use crate::{CliError, CliResult, ParseArgs};

const CHUNK: usize = 4096;

#[derive(Debug, Serialize)]
struct Failure {
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    doc_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    page_index: Option<u64>,
    error: String,
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    records_read: u64,
    parsed: u64,
    passed_through: u64,
    rejected_tails: u64,
    failures: Vec<Failure>,
}

enum Outcome {
    Parsed(PageRecord, bool),
    PassedThrough(PageRecord),
    Failed(Failure),
}

fn parse_one(mut rec: PageRecord, args: &ParseArgs, dims: Option<PageDims>) -> Outcome {
    if let Some(d) = dims {
        rec.dims = d;
    }
    if let (Some(p), Payload::Raw { prompt, .. }) = (args.prompt, &mut rec.payload) {
        *prompt = p;
    }
    if matches!(rec.payload, Payload::Blocks(_)) {
        return Outcome::PassedThrough(rec);
    }
    match rec.parse() {
        Ok(report) => {
            let blocks = report.blocks.iter().map(|b| BlockRecord::from_parsed(b, None)).collect();
            let mut out = PageRecord::blocks(rec.doc_id, rec.page_index, rec.dims, blocks);
            let had_tail = report.rejected_tail.is_some();
            out.rejected_tail = report.rejected_tail;
            Outcome::Parsed(out, had_tail)
        }
        Err(e) => Outcome::Failed(Failure {
            line: None,
            doc_id: Some(rec.doc_id),
            page_index: Some(rec.page_index),
            error: e.to_string(),
        }),
    }
}

pub fn run(args: &ParseArgs) -> CliResult<()> {
    let dims = match (args.width, args.height) {
        (Some(w), Some(h)) => Some(PageDims::new(w, h).map_err(|e| CliError::Usage(e.to_string()))?),
        _ => None,
    };
    let reader = read_records(&args.input).map_err(anyhow::Error::from)?;
    let mut out = create(&args.output)?;
    let mut summary = Summary::default();

    // Bounded batches keep memory flat while workers parse in parallel.
    let mut reader = reader.peekable();
    while reader.peek().is_some() {
        let batch: Vec<_> = reader.by_ref().take(CHUNK).collect();
        summary.records_read += batch.len() as u64;
        let outcomes: Vec<Outcome> = batch
            .into_par_iter()
            .map(|r| match r {
                Ok(rec) => parse_one(rec, args, dims),
                Err(e) => Outcome::Failed(Failure {
                    line: match &e {
                        CorpusError::LineParse { line, .. } | CorpusError::DuplicateKey { line, .. } => Some(*line),
                        _ => None,
                    },
                    doc_id: None,
                    page_index: None,
                    error: e.to_string(),
                }),
            })
            .collect();
        for o in outcomes {
            let rec = match o {
                Outcome::Parsed(rec, tail) => {
                    summary.parsed += 1;
                    summary.rejected_tails += u64::from(tail);
                    rec
                }
                Outcome::PassedThrough(rec) => {
                    summary.passed_through += 1;
                    rec
                }
                Outcome::Failed(f) => {
                    summary.failures.push(f);
                    continue;
                }
            };
            serde_json::to_writer(&mut out, &rec).context("writing output")?;
            out.write_all(b"\n").context("writing output")?;
        }
    }
    out.flush().context("writing output")?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("plain data"));
    if args.strict && !summary.failures.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("{} record(s) failed to parse", summary.failures.len())));
    }
    Ok(())
}
