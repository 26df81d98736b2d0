//! Canonical block placement: page headers first, running text in the
//! middle, floats and footers last.

use serde::{Deserialize, Serialize};

use crate::format::{Page, SemanticClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrderGroup {
    Header,
    Body,
    Trailer,
}

pub fn order_group(class: SemanticClass) -> OrderGroup {
    use SemanticClass::*;
    match class {
        PageHeader => OrderGroup::Header,
        Text | SectionHeader | ListItem | Title | Formula => OrderGroup::Body,
        Footnote | PageFooter | Picture | Table | Caption => OrderGroup::Trailer,
    }
}

/// Non-fatal: a block without a class was placed in the body group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissingClass {
    pub block_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canonicalized {
    pub page: Page,
    pub warnings: Vec<MissingClass>,
}

fn group_of(class: Option<SemanticClass>) -> OrderGroup {
    class.map_or(OrderGroup::Body, order_group)
}

/// Stable three-way partition of the page's blocks by [`OrderGroup`].
pub fn canonicalize(page: &Page) -> Canonicalized {
    let warnings = page
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.class.is_none())
        .map(|(block_index, _)| MissingClass { block_index })
        .collect();
    let mut blocks = page.blocks.clone();
    // sort_by_key is stable, which is exactly the within-group guarantee.
    blocks.sort_by_key(|b| group_of(b.class));
    Canonicalized {
        page: Page::new(page.dims, blocks),
        warnings,
    }
}

pub fn is_canonical(page: &Page) -> bool {
    page.blocks
        .windows(2)
        .all(|w| group_of(w[0].class) <= group_of(w[1].class))
}
