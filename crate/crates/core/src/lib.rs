//! Post-model toolkit for page-level document OCR output.
//!
//! The pipeline runs raw page streams through [`format`] (grammar parsing),
//! [`sanitize`] (hallucination and bad-box filtering) and [`reading_order`]
//! (canonical block placement), then either scores them with
//! [`layout_metrics`] / [`text_metrics`] or stitches pages into documents
//! with [`page_join`]. [`corpus_io`] owns the on-disk record formats.

pub mod assignment;
pub mod format;
pub mod sanitize;
pub mod layout_metrics;
pub mod reading_order;
pub mod text_metrics;
pub mod page_join;
pub mod corpus_io;
