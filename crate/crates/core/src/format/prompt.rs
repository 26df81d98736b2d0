use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FormatError;

/// `<structured_text> <plain_text> <no_text> <bbox> <no_bbox> <classes> <no_classes>`
pub(crate) const PROMPT_TOKEN_COUNT: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TextMode {
    Structured,
    Plain,
    NoText,
}

impl TextMode {
    const ALL: [TextMode; 3] = [TextMode::Structured, TextMode::Plain, TextMode::NoText];

    fn token(self) -> &'static str {
        match self {
            TextMode::Structured => "structured_text",
            TextMode::Plain => "plain_text",
            TextMode::NoText => "no_text",
        }
    }
}

/// Which output facets a page stream carries.
///
/// Only 8 of the 12 raw combinations are valid: classes need boxes, and the
/// combination that suppresses everything is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PromptSpec {
    text_mode: TextMode,
    boxes: bool,
    classes: bool,
}

impl PromptSpec {
    /// The maximal-information prompt `<structured_text><bbox><classes>`.
    pub const MIP: PromptSpec = PromptSpec {
        text_mode: TextMode::Structured,
        boxes: true,
        classes: true,
    };

    pub fn new(text_mode: TextMode, boxes: bool, classes: bool) -> Result<Self, FormatError> {
        let spec = Self {
            text_mode,
            boxes,
            classes,
        };
        if classes && !boxes {
            return Err(FormatError::InvalidPrompt(format!("{spec}: classes require boxes")));
        }
        if text_mode == TextMode::NoText && !boxes {
            return Err(FormatError::InvalidPrompt(format!("{spec}: no output requested")));
        }
        Ok(spec)
    }

    pub fn text_mode(&self) -> TextMode {
        self.text_mode
    }

    pub fn boxes(&self) -> bool {
        self.boxes
    }

    pub fn classes(&self) -> bool {
        self.classes
    }

    pub fn has_text(&self) -> bool {
        self.text_mode != TextMode::NoText
    }

    /// The prompt as the model consumes it, e.g. `<structured_text><bbox><classes>`.
    pub fn to_tokens(&self) -> String {
        self.parts().iter().map(|p| format!("<{p}>")).collect()
    }

    fn parts(&self) -> [&'static str; 3] {
        [
            self.text_mode.token(),
            if self.boxes { "bbox" } else { "no_bbox" },
            if self.classes { "classes" } else { "no_classes" },
        ]
    }
}

impl fmt::Display for PromptSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.parts().join(","))
    }
}

impl FromStr for PromptSpec {
    type Err = FormatError;

    /// Accepts the comma-joined form (`structured_text,bbox,classes`) or the
    /// token form (`<structured_text><bbox><classes>`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FormatError::InvalidPrompt(s.to_string());
        let trimmed = s.trim();
        let parts: Vec<&str> = if trimmed.starts_with('<') {
            trimmed
                .strip_prefix('<')
                .and_then(|t| t.strip_suffix('>'))
                .ok_or_else(bad)?
                .split("><")
                .collect()
        } else {
            trimmed.split(',').map(str::trim).collect()
        };
        let [text, boxes, classes] = parts.as_slice() else {
            return Err(bad());
        };
        let text_mode = TextMode::ALL
            .into_iter()
            .find(|m| m.token() == *text)
            .ok_or_else(bad)?;
        let boxes = match *boxes {
            "bbox" => true,
            "no_bbox" => false,
            _ => return Err(bad()),
        };
        let classes = match *classes {
            "classes" => true,
            "no_classes" => false,
            _ => return Err(bad()),
        };
        PromptSpec::new(text_mode, boxes, classes)
    }
}

impl Serialize for PromptSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PromptSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All valid prompt combinations, in a fixed order.
pub fn enumerate_valid_prompts() -> Vec<PromptSpec> {
    let mut out = Vec::with_capacity(8);
    for text_mode in TextMode::ALL {
        for boxes in [true, false] {
            for classes in [true, false] {
                if let Ok(p) = PromptSpec::new(text_mode, boxes, classes) {
                    out.push(p);
                }
            }
        }
    }
    out
}
