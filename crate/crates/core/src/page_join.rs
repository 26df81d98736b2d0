//! Joins sanitized, canonically ordered pages into one document flow.
//!
//! Per page: drop unwanted classes, pair captions with pictures and tables,
//! merge running text across block and page boundaries, skip boilerplate
//! sections, strip markdown, and flush floats after the page's text.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{min_cost_assignment, CostMatrix};
use crate::format::{BBox, Block, Page, SemanticClass};
use crate::reading_order::is_canonical;
use crate::text_metrics::normalize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JoinError {
    #[error("block {index} has no bounding box")]
    MissingBBox { index: usize },
    #[error("page {page_index} is not in canonical reading order")]
    UncanonicalInput { page_index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionDistance {
    /// L1 distance between box centers.
    #[default]
    Center,
    /// Smallest L1 distance between any corner of one box and any corner of the other.
    NearestCorner,
}

impl CaptionDistance {
    pub fn between(self, a: &BBox, b: &BBox) -> f64 {
        let l1 = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).abs() + (p.1 - q.1).abs();
        match self {
            CaptionDistance::Center => l1(a.center(), b.center()),
            CaptionDistance::NearestCorner => a
                .corners()
                .iter()
                .flat_map(|&p| b.corners().map(|q| l1(p, q)))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

pub const DEFAULT_SKIP_HEADINGS: [&str; 8] = [
    "table of contents",
    "contents",
    "bibliography",
    "references",
    "index",
    "indexes",
    "list of figures",
    "list of tables",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinConfig {
    skip_headings: BTreeSet<String>,
    pub terminal_punctuation: BTreeSet<char>,
    pub drop_classes: BTreeSet<SemanticClass>,
    pub caption_distance: CaptionDistance,
}

impl Default for JoinConfig {
    fn default() -> Self {
        Self {
            skip_headings: BTreeSet::new(),
            terminal_punctuation: ['.', '!', '?'].into_iter().collect(),
            drop_classes: [SemanticClass::PageHeader, SemanticClass::PageFooter].into_iter().collect(),
            caption_distance: CaptionDistance::Center,
        }
        .with_skip_headings(DEFAULT_SKIP_HEADINGS)
    }
}

impl JoinConfig {
    /// Replaces the skip list. Entries are normalized on the way in.
    pub fn with_skip_headings<S: AsRef<str>>(mut self, headings: impl IntoIterator<Item = S>) -> Self {
        self.skip_headings = headings
            .into_iter()
            .map(|h| normalize(h.as_ref()).raw_normalized)
            .filter(|h| !h.is_empty())
            .collect();
        self
    }

    pub fn skip_headings(&self) -> &BTreeSet<String> {
        &self.skip_headings
    }

    fn is_terminal(&self, text: &str) -> bool {
        text.trim_end()
            .chars()
            .next_back()
            .is_some_and(|c| self.terminal_punctuation.contains(&c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CaptionAssignment {
    /// `(caption_index, object_index)`, sorted by caption.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_captions: Vec<usize>,
    pub unmatched_objects: Vec<usize>,
}

fn boxes(blocks: &[Block], offset: usize) -> Result<Vec<BBox>, JoinError> {
    blocks
        .iter()
        .enumerate()
        .map(|(i, b)| b.bbox.ok_or(JoinError::MissingBBox { index: offset + i }))
        .collect()
}

/// Minimum total distance one-to-one pairing of captions to objects.
///
/// `MissingBBox` indices count captions first, then objects.
pub fn assign_captions(
    captions: &[Block],
    objects: &[Block],
    distance: CaptionDistance,
) -> Result<CaptionAssignment, JoinError> {
    let cb = boxes(captions, 0)?;
    let ob = boxes(objects, captions.len())?;
    let costs = CostMatrix::from_fn(cb.len(), ob.len(), |i, j| distance.between(&cb[i], &ob[j]));
    let pairs = min_cost_assignment(&costs);
    let unmatched = |n: usize, taken: Vec<usize>| (0..n).filter(|i| !taken.contains(i)).collect();
    Ok(CaptionAssignment {
        unmatched_captions: unmatched(cb.len(), pairs.iter().map(|p| p.0).collect()),
        unmatched_objects: unmatched(ob.len(), pairs.iter().map(|p| p.1).collect()),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlowState {
    /// Trailing text block that did not end a sentence.
    pub open_paragraph: Option<String>,
    /// Floats of the current page, held until its text has been emitted.
    pub pending_floats: Vec<DocItem>,
    pub in_skipped_section: bool,
}

fn is_heading(class: Option<SemanticClass>) -> bool {
    matches!(class, Some(SemanticClass::SectionHeader | SemanticClass::Title))
}

fn is_running_text(class: Option<SemanticClass>) -> bool {
    matches!(class, None | Some(SemanticClass::Text | SemanticClass::ListItem))
}

pub fn detect_skip_section(block: &Block, config: &JoinConfig) -> bool {
    is_heading(block.class) && config.skip_headings.contains(&normalize(block.text_or_empty()).raw_normalized)
}

/// Merges one page's body blocks into paragraphs, carrying an unfinished
/// trailing paragraph in the returned state.
pub fn merge_flow(state: FlowState, page_body: &[Block], config: &JoinConfig) -> (Vec<String>, FlowState) {
    let mut out = Vec::new();
    let mut state = state;
    for block in page_body {
        let text = strip_markdown(block.text_or_empty());
        let text = text.trim();
        if is_heading(block.class) {
            out.extend(state.open_paragraph.take());
            state.in_skipped_section = detect_skip_section(block, config);
            if !state.in_skipped_section && !text.is_empty() {
                out.push(text.to_string());
            }
            continue;
        }
        if state.in_skipped_section || text.is_empty() {
            continue;
        }
        if !is_running_text(block.class) {
            out.extend(state.open_paragraph.take());
            out.push(text.to_string());
            continue;
        }
        let merged = match state.open_paragraph.take() {
            Some(open) => format!("{open} {text}"),
            None => text.to_string(),
        };
        if config.is_terminal(&merged) {
            out.push(merged);
        } else {
            state.open_paragraph = Some(merged);
        }
    }
    (out, state)
}

struct Rules {
    heading: Regex,
    list: Regex,
    image: Regex,
    link: Regex,
    code: Regex,
    strike: Regex,
    strong: Regex,
    em: Regex,
    strong_under: Regex,
    em_under: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| {
        let re = |p: &str| Regex::new(p).expect("static pattern");
        Rules {
            heading: re(r"(?m)^[ \t]*#{1,6}(?:[ \t]+|$)"),
            list: re(r"(?m)^[ \t]*(?:[-*+]|[0-9]+[.)])[ \t]+"),
            image: re(r"!\[([^\]\n]*)\]\([^)\n]*\)"),
            link: re(r"\[([^\]\n]*)\]\([^)\n]*\)"),
            code: re(r"`([^`\n]*)`"),
            strike: re(r"~~([^\n]*?)~~"),
            strong: re(r"\*\*(\S(?:[^\n]*?\S)?)\*\*"),
            em: re(r"\*(\S(?:[^\n]*?\S)?)\*"),
            strong_under: re(r"(^|[^A-Za-z0-9_])__(\S(?:[^\n]*?\S)?)__($|[^A-Za-z0-9_])"),
            em_under: re(r"(^|[^A-Za-z0-9_])_(\S(?:[^\n]*?\S)?)_($|[^A-Za-z0-9_])"),
        }
    })
}

fn strip_once(text: &str) -> String {
    let r = rules();
    let s = r.heading.replace_all(text, "");
    let s = r.list.replace_all(&s, "");
    let s = r.image.replace_all(&s, "$1");
    let s = r.link.replace_all(&s, "$1");
    let s = r.code.replace_all(&s, "$1");
    let s = r.strike.replace_all(&s, "$1");
    let s = r.strong.replace_all(&s, "$1");
    let s = r.em.replace_all(&s, "$1");
    let s = r.strong_under.replace_all(&s, "$1$2$3");
    let s = r.em_under.replace_all(&s, "$1$2$3");
    s.into_owned()
}

/// Removes headings, list markers, emphasis, strikethrough, inline code and
/// link/image syntax. Every rule only deletes characters, so iterating to
/// a fixed point terminates and makes the function idempotent.
pub fn strip_markdown(text: &str) -> String {
    let mut cur = text.to_string();
    loop {
        let next = strip_once(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DocItem {
    Paragraph { text: String },
    Float { object: Block, caption: Option<Block> },
    /// A caption left over after pairing.
    Caption { caption: Block },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JoinedDocument {
    pub items: Vec<DocItem>,
}

impl JoinedDocument {
    pub fn flow(&self) -> Vec<&str> {
        self.items
            .iter()
            .filter_map(|i| match i {
                DocItem::Paragraph { text } => Some(text.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn floats(&self) -> Vec<(&Block, Option<&Block>)> {
        self.items
            .iter()
            .filter_map(|i| match i {
                DocItem::Float { object, caption } => Some((object, caption.as_ref())),
                _ => None,
            })
            .collect()
    }

    /// Plain text with one blank line between items. Floats render as a
    /// `[TABLE]` or `[FIGURE]` line followed by the caption text.
    pub fn render_text(&self) -> String {
        let caption_text = |b: &Block| strip_markdown(b.text_or_empty()).trim().to_string();
        let parts: Vec<String> = self
            .items
            .iter()
            .map(|item| match item {
                DocItem::Paragraph { text } => text.clone(),
                DocItem::Float { object, caption } => {
                    let tag = if object.class == Some(SemanticClass::Table) { "[TABLE]" } else { "[FIGURE]" };
                    match caption.as_ref().map(caption_text).filter(|c| !c.is_empty()) {
                        Some(c) => format!("{tag}\n{c}"),
                        None => tag.to_string(),
                    }
                }
                DocItem::Caption { caption } => caption_text(caption),
            })
            .filter(|p| !p.is_empty())
            .collect();
        let mut s = parts.join("\n\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }

    pub fn token_count(&self) -> usize {
        self.render_text().split_whitespace().count()
    }
}

fn paragraph(text: &str) -> Option<DocItem> {
    let t = strip_markdown(text).trim().to_string();
    (!t.is_empty()).then_some(DocItem::Paragraph { text: t })
}

fn page_floats(captions: &[Block], objects: &[Block], config: &JoinConfig) -> Result<Vec<DocItem>, JoinError> {
    let a = assign_captions(captions, objects, config.caption_distance)?;
    let mut caption_of = vec![None; objects.len()];
    for &(c, o) in &a.pairs {
        caption_of[o] = Some(captions[c].clone());
    }
    let mut items: Vec<DocItem> = objects
        .iter()
        .zip(caption_of)
        .map(|(object, caption)| DocItem::Float { object: object.clone(), caption })
        .collect();
    items.extend(a.unmatched_captions.iter().map(|&c| DocItem::Caption { caption: captions[c].clone() }));
    Ok(items)
}

/// Runs the full join over pages in document order.
///
/// Kept page headers and footers are emitted as standalone paragraphs and
/// do not interrupt a paragraph carried across the page break.
pub fn join_document(pages: &[Page], config: &JoinConfig) -> Result<JoinedDocument, JoinError> {
    use SemanticClass::*;
    let mut items = Vec::new();
    let mut state = FlowState::default();
    for (page_index, page) in pages.iter().enumerate() {
        if !is_canonical(page) {
            return Err(JoinError::UncanonicalInput { page_index });
        }
        let kept = page.blocks.iter().filter(|b| b.class.is_none_or(|c| !config.drop_classes.contains(&c)));
        let (mut headers, mut body, mut captions, mut objects, mut trailing) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for b in kept {
            let bucket = match b.class {
                Some(PageHeader) => &mut headers,
                Some(Caption) => &mut captions,
                Some(Picture | Table) => &mut objects,
                Some(Footnote | PageFooter) => &mut trailing,
                Some(Text | SectionHeader | ListItem | Title | Formula) | None => &mut body,
            };
            bucket.push(b.clone());
        }
        items.extend(headers.iter().filter_map(|b| paragraph(b.text_or_empty())));
        state.pending_floats = page_floats(&captions, &objects, config)?;
        let (paragraphs, next) = merge_flow(state, &body, config);
        state = next;
        items.extend(paragraphs.into_iter().map(|text| DocItem::Paragraph { text }));
        items.append(&mut state.pending_floats);
        items.extend(trailing.iter().filter_map(|b| paragraph(b.text_or_empty())));
    }
    items.extend(state.open_paragraph.take().map(|text| DocItem::Paragraph { text }));
    Ok(JoinedDocument { items })
}
