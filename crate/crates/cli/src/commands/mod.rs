pub mod eval_layout;
pub mod eval_text;
pub mod join;
pub mod parse;
pub mod sanitize;

use serde_json::{json, Value};

pub(crate) fn tool_info() -> doclair_core::corpus_io::ToolInfo {
    doclair_core::corpus_io::ToolInfo {
        name: "doclair".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    }
}

pub(crate) fn path_value(p: &std::path::Path) -> Value {
    json!(p.to_string_lossy())
}
