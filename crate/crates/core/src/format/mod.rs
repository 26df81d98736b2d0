//! Domain types for the structured page output and the grammar that encodes them.
//!
//! A page is emitted as a flat token stream. Under the maximal-information
//! prompt every block looks like
//!
//! ```text
//! <x_10><y_20>Hello world<x_200><y_40><class_Text>
//! ```
//!
//! and each of the three facets (text, box, class) may be elided depending on
//! the [`PromptSpec`].

mod grammar;
mod prompt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grammar::{parse_page, serialize_page, ParseReport, ParsedBlock, RawBox, RejectedTail, TailReason};
pub use prompt::{enumerate_valid_prompts, PromptSpec, TextMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("page dimensions must be positive, got {width}x{height}")]
    InvalidDims { width: u32, height: u32 },
    #[error("invalid prompt combination: {0}")]
    InvalidPrompt(String),
    #[error("unknown semantic class `{0}`")]
    UnknownClass(String),
    #[error("coordinate does not fit in 32 bits")]
    CoordinateOverflow,
    #[error("empty input under a text-only prompt")]
    EmptyInput,
    #[error("block {index} is missing the {facet} facet required by the prompt")]
    PresenceMismatch { index: usize, facet: &'static str },
    #[error("block {index} text contains a coordinate token and cannot be serialized unambiguously")]
    ReservedTokenInText { index: usize },
}

/// Canvas size in pixels. Coordinates index the grid `[0, width-1] x [0, height-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PageDims {
    width: u32,
    height: u32,
}

impl PageDims {
    pub fn new(width: u32, height: u32) -> Result<Self, FormatError> {
        if width == 0 || height == 0 {
            return Err(FormatError::InvalidDims { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// Axis-aligned box in integer pixel coordinates, top-left then bottom-right.
///
/// Validity (`x2 > x1 && y2 > y1`, in range) is not enforced here; see
/// [`crate::sanitize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl BBox {
    pub const fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn is_valid(&self) -> bool {
        self.x2 > self.x1 && self.y2 > self.y1
    }

    pub fn within(&self, dims: PageDims) -> bool {
        self.x1 < dims.width && self.x2 < dims.width && self.y1 < dims.height && self.y2 < dims.height
    }

    /// Area, zero for degenerate boxes.
    pub fn area(&self) -> f64 {
        let w = self.x2.saturating_sub(self.x1) as f64;
        let h = self.y2.saturating_sub(self.y1) as f64;
        w * h
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 as f64 + self.x2 as f64) / 2.0, (self.y1 as f64 + self.y2 as f64) / 2.0)
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let (x1, y1, x2, y2) = (self.x1 as f64, self.y1 as f64, self.x2 as f64, self.y2 as f64);
        [(x1, y1), (x2, y1), (x1, y2), (x2, y2)]
    }

    pub fn to_array(self) -> [u32; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

/// The closed set of layout classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SemanticClass {
    Caption,
    Footnote,
    Formula,
    #[serde(rename = "List-item")]
    ListItem,
    #[serde(rename = "Page-footer")]
    PageFooter,
    #[serde(rename = "Page-header")]
    PageHeader,
    Picture,
    #[serde(rename = "Section-header")]
    SectionHeader,
    Table,
    Text,
    Title,
}

impl SemanticClass {
    pub const COUNT: usize = 11;

    pub const ALL: [SemanticClass; Self::COUNT] = [
        SemanticClass::Caption,
        SemanticClass::Footnote,
        SemanticClass::Formula,
        SemanticClass::ListItem,
        SemanticClass::PageFooter,
        SemanticClass::PageHeader,
        SemanticClass::Picture,
        SemanticClass::SectionHeader,
        SemanticClass::Table,
        SemanticClass::Text,
        SemanticClass::Title,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Caption => "Caption",
            SemanticClass::Footnote => "Footnote",
            SemanticClass::Formula => "Formula",
            SemanticClass::ListItem => "List-item",
            SemanticClass::PageFooter => "Page-footer",
            SemanticClass::PageHeader => "Page-header",
            SemanticClass::Picture => "Picture",
            SemanticClass::SectionHeader => "Section-header",
            SemanticClass::Table => "Table",
            SemanticClass::Text => "Text",
            SemanticClass::Title => "Title",
        }
    }

    /// Position in [`SemanticClass::ALL`]; used as the confusion-matrix index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SemanticClass {
    type Err = FormatError;

    /// Exact, case-sensitive match on the canonical names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| FormatError::UnknownClass(s.to_string()))
    }
}

/// One laid-out unit. Which facets are present depends on the prompt it was
/// produced under.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Block {
    pub bbox: Option<BBox>,
    pub text: Option<String>,
    pub class: Option<SemanticClass>,
}

impl Block {
    pub fn new(bbox: BBox, text: impl Into<String>, class: SemanticClass) -> Self {
        Self {
            bbox: Some(bbox),
            text: Some(text.into()),
            class: Some(class),
        }
    }

    pub fn text_only(text: impl Into<String>) -> Self {
        Self {
            text: Some(text.into()),
            ..Self::default()
        }
    }

    pub fn text_or_empty(&self) -> &str {
        self.text.as_deref().unwrap_or("")
    }
}

/// Blocks of one page in emission (reading) order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub dims: PageDims,
    pub blocks: Vec<Block>,
}

impl Page {
    pub fn new(dims: PageDims, blocks: Vec<Block>) -> Self {
        Self { dims, blocks }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabSpec {
    pub dims: PageDims,
    pub num_classes: u32,
}

/// Number of special tokens the output format adds to a text tokenizer: one
/// per x coordinate, one per y coordinate, one per class and seven prompt
/// tokens.
pub fn vocab_extra_tokens(spec: VocabSpec) -> u64 {
    spec.dims.height as u64 + spec.dims.width as u64 + spec.num_classes as u64 + prompt::PROMPT_TOKEN_COUNT
}
