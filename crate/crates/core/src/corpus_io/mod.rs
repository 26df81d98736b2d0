//! On-disk formats: newline-delimited page records, COCO-style detection
//! import, and evaluation report output.

mod coco;
mod report;

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{parse_page, FormatError, PageDims, ParseReport, ParsedBlock, PromptSpec, RawBox, RejectedTail};

pub use coco::{export_coco_detections, import_coco_detections, import_coco_str, ClassNameMap};
pub use report::{
    write_report, ApReport, AuditSummary, EvalReport, LayoutReport, PageTextScore, PairStatus, TextAggregation,
    TextReport, ThresholdReport, ToolInfo,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {detail}")]
    LineParse { line: usize, detail: String },
    #[error("line {line}: duplicate record for ({doc_id}, {page_index})")]
    DuplicateKey { line: usize, doc_id: String, page_index: u64 },
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("image {image_id} has no width/height")]
    MissingImageDims { image_id: String },
    #[error("malformed detection file: {0}")]
    Detection(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }
}

/// One block in record form. Class names are kept as strings so that
/// schema violations survive until sanitization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[u64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl BlockRecord {
    pub fn to_parsed(&self) -> ParsedBlock {
        ParsedBlock {
            bbox: self.bbox.map(|[x1, y1, x2, y2]| RawBox { x1, y1, x2, y2 }),
            text: self.text.clone(),
            class: self.class.clone(),
        }
    }

    pub fn from_parsed(block: &ParsedBlock, score: Option<f64>) -> Self {
        Self {
            bbox: block.bbox.map(|b| [b.x1, b.y1, b.x2, b.y2]),
            class: block.class.clone(),
            text: block.text.clone(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Raw { raw: String, prompt: PromptSpec },
    Blocks(Vec<BlockRecord>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordWire", into = "RecordWire")]
pub struct PageRecord {
    pub doc_id: String,
    pub page_index: u64,
    pub dims: PageDims,
    pub payload: Payload,
    pub rejected_tail: Option<RejectedTail>,
}

#[derive(Serialize, Deserialize)]
struct RecordWire {
    doc_id: String,
    page_index: u64,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt: Option<PromptSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blocks: Option<Vec<BlockRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rejected_tail: Option<RejectedTail>,
}

impl TryFrom<RecordWire> for PageRecord {
    type Error = String;

    fn try_from(w: RecordWire) -> Result<Self, String> {
        let dims = PageDims::new(w.width, w.height).map_err(|e| e.to_string())?;
        let payload = match (w.raw, w.prompt, w.blocks) {
            (Some(raw), Some(prompt), None) => Payload::Raw { raw, prompt },
            (Some(_), None, None) => return Err("raw record without prompt".into()),
            (None, _, Some(blocks)) => {
                if let Some(s) = blocks.iter().filter_map(|b| b.score).find(|s| !(0.0..=1.0).contains(s)) {
                    return Err(format!("score {s} outside [0, 1]"));
                }
                Payload::Blocks(blocks)
            }
            (Some(_), _, Some(_)) => return Err("record has both raw and blocks".into()),
            (None, _, None) => return Err("record has neither raw nor blocks".into()),
        };
        Ok(PageRecord {
            doc_id: w.doc_id,
            page_index: w.page_index,
            dims,
            payload,
            rejected_tail: w.rejected_tail,
        })
    }
}

impl From<PageRecord> for RecordWire {
    fn from(r: PageRecord) -> Self {
        let (raw, prompt, blocks) = match r.payload {
            Payload::Raw { raw, prompt } => (Some(raw), Some(prompt), None),
            Payload::Blocks(b) => (None, None, Some(b)),
        };
        RecordWire {
            doc_id: r.doc_id,
            page_index: r.page_index,
            width: r.dims.width(),
            height: r.dims.height(),
            prompt,
            raw,
            blocks,
            rejected_tail: r.rejected_tail,
        }
    }
}

impl PageRecord {
    pub fn raw(doc_id: impl Into<String>, page_index: u64, dims: PageDims, raw: impl Into<String>, prompt: PromptSpec) -> Self {
        Self {
            doc_id: doc_id.into(),
            page_index,
            dims,
            payload: Payload::Raw { raw: raw.into(), prompt },
            rejected_tail: None,
        }
    }

    pub fn blocks(doc_id: impl Into<String>, page_index: u64, dims: PageDims, blocks: Vec<BlockRecord>) -> Self {
        Self {
            doc_id: doc_id.into(),
            page_index,
            dims,
            payload: Payload::Blocks(blocks),
            rejected_tail: None,
        }
    }

    pub fn key(&self) -> (&str, u64) {
        (&self.doc_id, self.page_index)
    }

    /// Parses a raw payload; a block payload is wrapped as-is.
    pub fn parse(&self) -> Result<ParseReport, FormatError> {
        match &self.payload {
            Payload::Raw { raw, prompt } => parse_page(raw, *prompt, self.dims),
            Payload::Blocks(blocks) => Ok(ParseReport {
                blocks: blocks.iter().map(BlockRecord::to_parsed).collect(),
                rejected_tail: self.rejected_tail.clone(),
            }),
        }
    }

    /// Per-block scores aligned with [`PageRecord::parse`] output.
    pub fn scores(&self, n_blocks: usize) -> Vec<Option<f64>> {
        match &self.payload {
            Payload::Raw { .. } => vec![None; n_blocks],
            Payload::Blocks(blocks) => blocks.iter().map(|b| b.score).collect(),
        }
    }

    /// Page text: accepted block texts in order, one per line. An empty raw
    /// stream counts as empty text.
    pub fn text(&self) -> Result<String, FormatError> {
        let report = match self.parse() {
            Ok(r) => r,
            Err(FormatError::EmptyInput) => return Ok(String::new()),
            Err(e) => return Err(e),
        };
        let texts: Vec<&str> = report.blocks.iter().filter_map(|b| b.text.as_deref()).collect();
        Ok(texts.join("\n"))
    }
}

/// Streaming record reader. Errors are per line; iteration continues after
/// one.
pub struct RecordReader<R> {
    lines: io::Lines<R>,
    path: PathBuf,
    line: usize,
    seen: HashSet<(String, u64)>,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R, path: impl Into<PathBuf>) -> Self {
        Self {
            lines: reader.lines(),
            path: path.into(),
            line: 0,
            seen: HashSet::new(),
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<PageRecord, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(CorpusError::io(&self.path, e))),
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let line = self.line;
            let record: PageRecord = match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(e) => return Some(Err(CorpusError::LineParse { line, detail: e.to_string() })),
            };
            if !self.seen.insert((record.doc_id.clone(), record.page_index)) {
                return Some(Err(CorpusError::DuplicateKey {
                    line,
                    doc_id: record.doc_id,
                    page_index: record.page_index,
                }));
            }
            return Some(Ok(record));
        }
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<RecordReader<BufReader<File>>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    Ok(RecordReader::new(BufReader::new(file), path))
}

pub fn write_records_to<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a PageRecord>,
) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_records<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a PageRecord>,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_records_to(BufWriter::new(file), records).map_err(|e| CorpusError::io(path, e))
}
