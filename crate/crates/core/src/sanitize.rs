//! Layered filtering of parsed predictions: syntax rejection, box validity,
//! class schema, and trailing repetition loops.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::format::{Block, Page, PageDims, ParseReport, ParsedBlock, RejectedTail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectionReason {
    SyntaxNonCompliant,
    DegenerateBox,
    OutOfRangeCoordinate,
    UnknownClass,
    RepetitionLoop,
}

impl RejectionReason {
    pub const ALL: [RejectionReason; 5] = [
        RejectionReason::SyntaxNonCompliant,
        RejectionReason::DegenerateBox,
        RejectionReason::OutOfRangeCoordinate,
        RejectionReason::UnknownClass,
        RejectionReason::RepetitionLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RejectionReason::SyntaxNonCompliant => "SyntaxNonCompliant",
            RejectionReason::DegenerateBox => "DegenerateBox",
            RejectionReason::OutOfRangeCoordinate => "OutOfRangeCoordinate",
            RejectionReason::UnknownClass => "UnknownClass",
            RejectionReason::RepetitionLoop => "RepetitionLoop",
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizeConfig {
    pub repetition_min_unit_chars: usize,
    pub repetition_min_repeats: usize,
    pub enable_repetition_filter: bool,
}

impl Default for SanitizeConfig {
    fn default() -> Self {
        Self {
            repetition_min_unit_chars: 12,
            repetition_min_repeats: 4,
            enable_repetition_filter: true,
        }
    }
}

impl SanitizeConfig {
    /// Clamps thresholds into their legal ranges (unit >= 1, repeats >= 2).
    pub fn normalized(mut self) -> Self {
        self.repetition_min_unit_chars = self.repetition_min_unit_chars.max(1);
        self.repetition_min_repeats = self.repetition_min_repeats.max(2);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectedItem {
    Block { block: ParsedBlock },
    Tail { tail: RejectedTail },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejected {
    pub item: RejectedItem,
    pub reason: RejectionReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilterOutcome {
    pub accepted: Vec<Block>,
    /// Input position of each accepted block.
    pub accepted_indices: Vec<usize>,
    pub rejected: Vec<Rejected>,
}

/// First failing predicate for a parsed block, if any.
///
/// Facets that are absent are not checked, so box-free or class-free reports
/// pass through untouched.
pub fn check_block(block: &ParsedBlock, dims: PageDims) -> Result<Block, RejectionReason> {
    if let Some(raw) = block.bbox {
        if raw.x2 <= raw.x1 || raw.y2 <= raw.y1 {
            return Err(RejectionReason::DegenerateBox);
        }
        let w = u64::from(dims.width());
        let h = u64::from(dims.height());
        if raw.x1 >= w || raw.x2 >= w || raw.y1 >= h || raw.y2 >= h {
            return Err(RejectionReason::OutOfRangeCoordinate);
        }
    }
    block.to_block().map_err(|_| RejectionReason::UnknownClass)
}

/// Splits a report into valid blocks and rejected ones, preserving order.
/// The report's rejected tail is re-emitted as a syntax rejection.
pub fn filter_boxes(report: &ParseReport, dims: PageDims) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for (index, block) in report.blocks.iter().enumerate() {
        match check_block(block, dims) {
            Ok(b) => {
                out.accepted.push(b);
                out.accepted_indices.push(index);
            }
            Err(reason) => out.rejected.push(Rejected {
                item: RejectedItem::Block { block: block.clone() },
                reason,
            }),
        }
    }
    if let Some(tail) = &report.rejected_tail {
        out.rejected.push(Rejected {
            item: RejectedItem::Tail { tail: tail.clone() },
            reason: RejectionReason::SyntaxNonCompliant,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionLoop {
    /// Offset in characters, not bytes.
    pub loop_start: usize,
    pub unit: String,
    pub repeats: usize,
}

/// Finds a loop `unit^k` (k >= min repeats, |unit| >= min unit chars) that
/// runs exactly to the end of `text`. The earliest start wins; among loops
/// with that start the shortest unit wins.
pub fn detect_repetition(text: &str, config: &SanitizeConfig) -> Option<RepetitionLoop> {
    let config = config.normalized();
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let min_unit = config.repetition_min_unit_chars;
    let min_repeats = config.repetition_min_repeats;
    if n < min_unit * min_repeats {
        return None;
    }

    let mut best: Option<(usize, usize)> = None; // (start, unit_len)
    for unit_len in min_unit..=n / min_repeats {
        // Smallest s such that chars[j] == chars[j + unit_len] for all j in [s, n - unit_len).
        let mut periodic_from = n - unit_len;
        while periodic_from > 0 && chars[periodic_from - 1] == chars[periodic_from - 1 + unit_len] {
            periodic_from -= 1;
        }
        // Earliest start at or after periodic_from that tiles whole units to the end.
        let span = n - periodic_from;
        let start = n - (span / unit_len) * unit_len;
        let repeats = (n - start) / unit_len;
        if repeats < min_repeats {
            continue;
        }
        if best.is_none_or(|(s, _)| start < s) {
            best = Some((start, unit_len));
        }
    }

    best.map(|(start, unit_len)| RepetitionLoop {
        loop_start: start,
        unit: chars[start..start + unit_len].iter().collect(),
        repeats: (n - start) / unit_len,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub reason: RejectionReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SanitizedPage {
    pub page: Page,
    /// Input position of each kept block.
    pub source_indices: Vec<usize>,
    pub audit: Vec<AuditEntry>,
}

fn describe_rejected(r: &Rejected) -> String {
    match &r.item {
        RejectedItem::Block { block } => {
            let bbox = block
                .bbox
                .map(|b| format!("[{},{},{},{}]", b.x1, b.y1, b.x2, b.y2))
                .unwrap_or_else(|| "-".to_string());
            format!("block bbox={} class={}", bbox, block.class.as_deref().unwrap_or("-"))
        }
        RejectedItem::Tail { tail } => format!("tail bytes {}..{} ({:?})", tail.start, tail.end, tail.reason),
    }
}

/// Box filtering followed by trailing-loop truncation (one unit is kept).
///
/// Truncation is repeated until no loop remains, so running the function on
/// its own output is a no-op.
pub fn sanitize_page(report: &ParseReport, dims: PageDims, config: &SanitizeConfig) -> SanitizedPage {
    let outcome = filter_boxes(report, dims);
    let mut audit: Vec<AuditEntry> = outcome
        .rejected
        .iter()
        .map(|r| AuditEntry {
            reason: r.reason,
            detail: describe_rejected(r),
        })
        .collect();

    let mut blocks = outcome.accepted;
    if config.enable_repetition_filter {
        for (index, block) in blocks.iter_mut().enumerate() {
            let Some(text) = block.text.as_mut() else { continue };
            let original_chars = text.chars().count();
            let mut first: Option<RepetitionLoop> = None;
            while let Some(found) = detect_repetition(text, config) {
                let keep: String = text.chars().take(found.loop_start + found.unit.chars().count()).collect();
                *text = keep;
                first.get_or_insert(found);
            }
            if let Some(found) = first {
                audit.push(AuditEntry {
                    reason: RejectionReason::RepetitionLoop,
                    detail: format!(
                        "block {index}: unit {:?} x{} at char {}; {} -> {} chars",
                        found.unit,
                        found.repeats,
                        found.loop_start,
                        original_chars,
                        text.chars().count()
                    ),
                });
            }
        }
    }

    SanitizedPage {
        page: Page::new(dims, blocks),
        source_indices: outcome.accepted_indices,
        audit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{parse_page, serialize_page, BBox, PromptSpec, RawBox, SemanticClass};
    use proptest::prelude::*;

    fn dims() -> PageDims {
        PageDims::new(1280, 1024).unwrap()
    }

    fn parsed(x1: u64, y1: u64, x2: u64, y2: u64, class: &str, text: &str) -> ParsedBlock {
        ParsedBlock {
            bbox: Some(RawBox { x1, y1, x2, y2 }),
            text: Some(text.to_string()),
            class: Some(class.to_string()),
        }
    }

    fn report(blocks: Vec<ParsedBlock>) -> ParseReport {
        ParseReport {
            blocks,
            rejected_tail: None,
        }
    }

    /// Exhaustive scan over every (start, unit length) pair.
    fn brute_force(text: &str, cfg: &SanitizeConfig) -> Option<RepetitionLoop> {
        let chars: Vec<char> = text.chars().collect();
        let n = chars.len();
        for start in 0..n {
            for unit_len in cfg.repetition_min_unit_chars.max(1)..=(n - start) {
                if (n - start) % unit_len != 0 {
                    continue;
                }
                let repeats = (n - start) / unit_len;
                if repeats < cfg.repetition_min_repeats {
                    continue;
                }
                let unit = &chars[start..start + unit_len];
                if chars[start..].chunks(unit_len).all(|c| c == unit) {
                    return Some(RepetitionLoop {
                        loop_start: start,
                        unit: unit.iter().collect(),
                        repeats,
                    });
                }
            }
        }
        None
    }

    #[test]
    fn filter_examples() {
        let r = report(vec![
            parsed(10, 20, 200, 40, "Text", "ok"),
            parsed(200, 40, 10, 20, "Text", "flipped"),
            parsed(10, 20, 2000, 40, "Text", "wide"),
            parsed(10, 20, 200, 40, "Paragraph", "schema"),
            parsed(10, 20, 10, 40, "Text", "zero width"),
        ]);
        let out = filter_boxes(&r, dims());
        assert_eq!(out.accepted, vec![Block::new(BBox::new(10, 20, 200, 40), "ok", SemanticClass::Text)]);
        let reasons: Vec<_> = out.rejected.iter().map(|r| r.reason).collect();
        assert_eq!(
            reasons,
            vec![
                RejectionReason::DegenerateBox,
                RejectionReason::OutOfRangeCoordinate,
                RejectionReason::UnknownClass,
                RejectionReason::DegenerateBox,
            ]
        );
    }

    #[test]
    fn coordinate_equal_to_width_is_out_of_range() {
        let r = report(vec![parsed(0, 0, 1280, 10, "Text", ""), parsed(0, 0, 1279, 1023, "Text", "")]);
        let out = filter_boxes(&r, dims());
        assert_eq!(out.accepted.len(), 1);
        assert_eq!(out.rejected[0].reason, RejectionReason::OutOfRangeCoordinate);
    }

    #[test]
    fn tail_becomes_syntax_rejection() {
        let r = parse_page("<x_1><y_1>ok<x_9><y_9><class_Text><x_3><y_", PromptSpec::MIP, dims()).unwrap();
        let out = filter_boxes(&r, dims());
        assert_eq!(out.accepted.len(), 1);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].reason, RejectionReason::SyntaxNonCompliant);
    }

    #[test]
    fn repetition_examples() {
        let cfg = SanitizeConfig::default();
        assert_eq!(detect_repetition("abc", &cfg), None);

        let text = format!("Intro. {}", "the same sentence here. ".repeat(6));
        let found = detect_repetition(&text, &cfg).unwrap();
        assert_eq!(found.loop_start, 7);
        assert_eq!(found.unit, "the same sentence here. ");
        assert_eq!(found.repeats, 6);
        assert_eq!(brute_force(&text, &cfg), Some(found));

        let tiny = SanitizeConfig {
            repetition_min_unit_chars: 1,
            repetition_min_repeats: 2,
            enable_repetition_filter: true,
        };
        let found = detect_repetition("abab", &tiny).unwrap();
        assert_eq!((found.loop_start, found.unit.as_str(), found.repeats), (0, "ab", 2));
    }

    #[test]
    fn repetition_counts_chars_not_bytes() {
        let cfg = SanitizeConfig {
            repetition_min_unit_chars: 2,
            repetition_min_repeats: 3,
            enable_repetition_filter: true,
        };
        let found = detect_repetition("é→ab→ab→ab", &cfg).unwrap();
        assert_eq!(found.loop_start, 1);
        assert_eq!(found.unit, "→ab");
    }

    #[test]
    fn sanitize_examples() {
        let cfg = SanitizeConfig::default();
        let clean = report(vec![
            parsed(1, 1, 5, 5, "Text", "a"),
            parsed(1, 6, 5, 9, "Title", "b"),
            parsed(6, 1, 9, 5, "Caption", "c"),
        ]);
        let s = sanitize_page(&clean, dims(), &cfg);
        assert_eq!(s.page.blocks.len(), 3);
        assert!(s.audit.is_empty());

        let one_bad = report(vec![parsed(1, 1, 5, 5, "Text", "a"), parsed(5, 5, 1, 1, "Text", "b")]);
        let s = sanitize_page(&one_bad, dims(), &cfg);
        assert_eq!(s.page.blocks.len(), 1);
        assert_eq!(s.audit.len(), 1);
        assert_eq!(s.audit[0].reason, RejectionReason::DegenerateBox);

        let loop_cfg = SanitizeConfig {
            repetition_min_unit_chars: 5,
            ..cfg
        };
        let looping = report(vec![parsed(1, 1, 5, 5, "Text", &format!("x. {}", "loop ".repeat(10)))]);
        let s = sanitize_page(&looping, dims(), &loop_cfg);
        assert_eq!(s.page.blocks[0].text.as_deref(), Some("x. loop "));
        assert_eq!(s.audit.len(), 1);
        assert_eq!(s.audit[0].reason, RejectionReason::RepetitionLoop);
    }

    #[test]
    fn disabled_filter_keeps_loops() {
        let cfg = SanitizeConfig {
            repetition_min_unit_chars: 1,
            enable_repetition_filter: false,
            ..SanitizeConfig::default()
        };
        let looping = report(vec![parsed(1, 1, 5, 5, "Text", "aaaaaaaa")]);
        let s = sanitize_page(&looping, dims(), &cfg);
        assert_eq!(s.page.blocks[0].text.as_deref(), Some("aaaaaaaa"));
    }

    fn arb_parsed() -> impl Strategy<Value = ParsedBlock> {
        (
            (0u64..1400, 0u64..1100, 0u64..1400, 0u64..1100),
            prop_oneof![Just("Text".to_string()), Just("Title".to_string()), Just("Bogus".to_string())],
            "(ab|abc|x ){0,12}",
        )
            .prop_map(|((x1, y1, x2, y2), class, text)| parsed(x1, y1, x2, y2, &class, &text))
    }

    proptest! {
        #[test]
        fn repetition_matches_exhaustive_scan(
            text in "[ab ]{0,60}",
            min_unit in 1usize..4,
            min_repeats in 2usize..5,
        ) {
            let cfg = SanitizeConfig { repetition_min_unit_chars: min_unit, repetition_min_repeats: min_repeats, enable_repetition_filter: true };
            prop_assert_eq!(detect_repetition(&text, &cfg), brute_force(&text, &cfg));
        }

        #[test]
        fn repetition_matches_exhaustive_scan_long(text in "(ab|ba|abb){0,70}") {
            let cfg = SanitizeConfig { repetition_min_unit_chars: 2, repetition_min_repeats: 3, enable_repetition_filter: true };
            prop_assert_eq!(detect_repetition(&text, &cfg), brute_force(&text, &cfg));
        }

        #[test]
        fn filter_is_total_and_monotone(blocks in proptest::collection::vec(arb_parsed(), 0..12)) {
            let r = report(blocks.clone());
            let out = filter_boxes(&r, dims());
            prop_assert_eq!(out.accepted.len() + out.rejected.len(), blocks.len());
            for b in &out.accepted {
                let bb = b.bbox.unwrap();
                prop_assert!(bb.is_valid() && bb.within(dims()));
            }
            for rej in &out.rejected {
                let RejectedItem::Block { block } = &rej.item else { unreachable!() };
                prop_assert!(check_block(block, dims()).is_err());
            }
        }

        #[test]
        fn sanitize_is_idempotent(blocks in proptest::collection::vec(arb_parsed(), 0..8), min_unit in 1usize..4) {
            let cfg = SanitizeConfig { repetition_min_unit_chars: min_unit, repetition_min_repeats: 2, enable_repetition_filter: true };
            let first = sanitize_page(&report(blocks), dims(), &cfg);
            let raw = serialize_page(&first.page, PromptSpec::MIP).unwrap();
            let again = sanitize_page(&parse_page(&raw, PromptSpec::MIP, dims()).unwrap(), dims(), &cfg);
            prop_assert_eq!(&again.page, &first.page);
            prop_assert!(again.audit.is_empty());
        }
    }
}
