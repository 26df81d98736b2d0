//! Prefix-maximal parser and serializer for the per-block token grammar.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{BBox, Block, FormatError, Page, PageDims, PromptSpec, SemanticClass};

/// Box coordinates exactly as they appeared in the stream, before any range check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawBox {
    pub x1: u64,
    pub y1: u64,
    pub x2: u64,
    pub y2: u64,
}

impl RawBox {
    /// `None` if any coordinate does not fit the pixel type.
    pub fn to_bbox(self) -> Option<BBox> {
        let c = |v: u64| u32::try_from(v).ok();
        Some(BBox::new(c(self.x1)?, c(self.y1)?, c(self.x2)?, c(self.y2)?))
    }
}

impl From<BBox> for RawBox {
    fn from(b: BBox) -> Self {
        Self {
            x1: b.x1.into(),
            y1: b.y1.into(),
            x2: b.x2.into(),
            y2: b.y2.into(),
        }
    }
}

/// A syntactically well-formed block whose class name has not been checked
/// against the schema yet.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedBlock {
    pub bbox: Option<RawBox>,
    pub text: Option<String>,
    pub class: Option<String>,
}

impl ParsedBlock {
    pub fn to_block(&self) -> Result<Block, FormatError> {
        let bbox = match self.bbox {
            Some(raw) => Some(raw.to_bbox().ok_or(FormatError::CoordinateOverflow)?),
            None => None,
        };
        let class = self.class.as_deref().map(str::parse::<SemanticClass>).transpose()?;
        Ok(Block {
            bbox,
            text: self.text.clone(),
            class,
        })
    }
}

impl From<&Block> for ParsedBlock {
    fn from(b: &Block) -> Self {
        Self {
            bbox: b.bbox.map(RawBox::from),
            text: b.text.clone(),
            class: b.class.map(|c| c.name().to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TailReason {
    /// A `<x_`, `<y_` or `<class_` opener that never closes properly.
    MalformedToken,
    /// Something other than the expected token at a block boundary.
    UnexpectedContent,
    /// The stream ends in the middle of a block.
    Truncated,
}

/// The non-conforming suffix of a stream, as a byte range into the raw input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedTail {
    pub start: usize,
    pub end: usize,
    pub reason: TailReason,
}

impl RejectedTail {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub blocks: Vec<ParsedBlock>,
    pub rejected_tail: Option<RejectedTail>,
}

impl ParseReport {
    /// Converts every accepted block, failing on the first unknown class.
    pub fn into_blocks(self) -> Result<Vec<Block>, FormatError> {
        self.blocks.iter().map(ParsedBlock::to_block).collect()
    }
}

enum TokenError {
    Absent,
    Malformed,
    Truncated,
}

impl TokenError {
    fn reason(self) -> TailReason {
        match self {
            TokenError::Absent => TailReason::UnexpectedContent,
            TokenError::Malformed => TailReason::MalformedToken,
            TokenError::Truncated => TailReason::Truncated,
        }
    }
}

fn opener(axis: u8) -> &'static [u8] {
    if axis == b'x' {
        b"<x_"
    } else {
        b"<y_"
    }
}

/// Reads `<x_123>` / `<y_123>` at `pos`, returning the value and the end offset.
fn coord_token(s: &[u8], pos: usize, axis: u8) -> Result<(u64, usize), TokenError> {
    let open = opener(axis);
    let rest = &s[pos..];
    if !rest.starts_with(open) {
        return Err(if rest.len() < open.len() && open.starts_with(rest) {
            TokenError::Truncated
        } else {
            TokenError::Absent
        });
    }
    let digits_start = pos + open.len();
    let digits_end = s[digits_start..]
        .iter()
        .position(|b| !b.is_ascii_digit())
        .map_or(s.len(), |n| digits_start + n);
    if digits_end == digits_start || s.get(digits_end) != Some(&b'>') {
        return Err(TokenError::Malformed);
    }
    let value = s[digits_start..digits_end]
        .iter()
        .fold(0u64, |acc, d| acc.saturating_mul(10).saturating_add(u64::from(d - b'0')));
    Ok((value, digits_end + 1))
}

fn class_token(raw: &str, pos: usize) -> Result<(String, usize), TokenError> {
    const OPEN: &str = "<class_";
    let rest = &raw[pos..];
    if !rest.starts_with(OPEN) {
        return Err(if rest.len() < OPEN.len() && OPEN.starts_with(rest) {
            TokenError::Truncated
        } else {
            TokenError::Absent
        });
    }
    let name_start = pos + OPEN.len();
    match raw[name_start..].find('>') {
        Some(0) | None => Err(TokenError::Malformed),
        Some(n) => Ok((raw[name_start..name_start + n].to_string(), name_start + n + 1)),
    }
}

/// Offset of the first well-formed `<x_N>` token at or after `from`, together
/// with whether a malformed `<x_` opener was skipped on the way.
fn find_coord_x(s: &[u8], from: usize) -> (Option<usize>, bool) {
    let mut malformed = false;
    let mut i = from;
    while i + 3 <= s.len() {
        if &s[i..i + 3] == b"<x_" {
            if coord_token(s, i, b'x').is_ok() {
                return (Some(i), malformed);
            }
            malformed = true;
        }
        i += 1;
    }
    (None, malformed)
}

/// True if `text` contains a well-formed x coordinate token, which would end
/// the text group early on re-parse.
pub(crate) fn contains_coord_token(text: &str) -> bool {
    find_coord_x(text.as_bytes(), 0).0.is_some()
}

fn parse_block(raw: &str, start: usize, prompt: PromptSpec) -> Result<(ParsedBlock, usize), TailReason> {
    let s = raw.as_bytes();
    let (x1, pos) = coord_token(s, start, b'x').map_err(TokenError::reason)?;
    let (y1, mut pos) = coord_token(s, pos, b'y').map_err(TokenError::reason)?;

    let text = if prompt.has_text() {
        match find_coord_x(s, pos) {
            (Some(end), _) => {
                let t = raw[pos..end].to_string();
                pos = end;
                Some(t)
            }
            (None, malformed) => {
                return Err(if malformed {
                    TailReason::MalformedToken
                } else {
                    TailReason::Truncated
                })
            }
        }
    } else {
        None
    };

    let (x2, pos) = coord_token(s, pos, b'x').map_err(TokenError::reason)?;
    let (y2, mut pos) = coord_token(s, pos, b'y').map_err(TokenError::reason)?;

    let class = if prompt.classes() {
        let (name, end) = class_token(raw, pos).map_err(TokenError::reason)?;
        pos = end;
        Some(name)
    } else {
        None
    };

    let block = ParsedBlock {
        bbox: Some(RawBox { x1, y1, x2, y2 }),
        text,
        class,
    };
    Ok((block, pos))
}

/// Parses a raw page stream under `prompt`.
///
/// Accepts the longest prefix made of complete, well-formed blocks; anything
/// after it is reported as the rejected tail. Without boxes there is no block
/// structure and the whole input becomes a single text block. Coordinates are
/// not range checked here.
pub fn parse_page(raw: &str, prompt: PromptSpec, _dims: PageDims) -> Result<ParseReport, FormatError> {
    if !prompt.boxes() {
        if raw.is_empty() {
            return Err(FormatError::EmptyInput);
        }
        return Ok(ParseReport {
            blocks: vec![ParsedBlock {
                bbox: None,
                text: Some(raw.to_string()),
                class: None,
            }],
            rejected_tail: None,
        });
    }

    let mut blocks = Vec::new();
    let mut pos = 0;
    while pos < raw.len() {
        match parse_block(raw, pos, prompt) {
            Ok((block, next)) => {
                blocks.push(block);
                pos = next;
            }
            Err(reason) => {
                return Ok(ParseReport {
                    blocks,
                    rejected_tail: Some(RejectedTail {
                        start: pos,
                        end: raw.len(),
                        reason,
                    }),
                });
            }
        }
    }
    Ok(ParseReport {
        blocks,
        rejected_tail: None,
    })
}

/// Writes `page` in the token grammar for `prompt`.
///
/// Facets the prompt does not ask for are elided; missing required facets are
/// an error. Under a box-free prompt the block texts are joined by a blank
/// line (a single block round-trips exactly).
pub fn serialize_page(page: &Page, prompt: PromptSpec) -> Result<String, FormatError> {
    if !prompt.boxes() {
        let texts = page
            .blocks
            .iter()
            .enumerate()
            .map(|(index, b)| {
                b.text
                    .as_deref()
                    .ok_or(FormatError::PresenceMismatch { index, facet: "text" })
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(texts.join("\n\n"));
    }

    let mut out = String::new();
    for (index, block) in page.blocks.iter().enumerate() {
        let bbox = block.bbox.ok_or(FormatError::PresenceMismatch { index, facet: "bbox" })?;
        out.push_str(&format!("<x_{}><y_{}>", bbox.x1, bbox.y1));
        if prompt.has_text() {
            let text = block
                .text
                .as_deref()
                .ok_or(FormatError::PresenceMismatch { index, facet: "text" })?;
            if contains_coord_token(text) {
                return Err(FormatError::ReservedTokenInText { index });
            }
            out.push_str(text);
        }
        out.push_str(&format!("<x_{}><y_{}>", bbox.x2, bbox.y2));
        if prompt.classes() {
            let class = block.class.ok_or(FormatError::PresenceMismatch { index, facet: "class" })?;
            out.push_str(&format!("<class_{}>", class.name()));
        }
    }
    Ok(out)
}
