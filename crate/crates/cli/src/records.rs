use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use doclair_core::corpus_io::{read_records, BlockRecord, PageRecord};
use doclair_core::format::Block;
use serde::Serialize;

pub type Key = (String, u64);

/// Reads a whole record file keyed by `(doc_id, page_index)`. The first bad
/// line aborts.
pub fn load_keyed(path: &Path) -> anyhow::Result<BTreeMap<Key, PageRecord>> {
    let mut out = BTreeMap::new();
    for rec in read_records(path)? {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        out.insert((rec.doc_id.clone(), rec.page_index), rec);
    }
    Ok(out)
}

pub fn block_record(block: &Block, score: Option<f64>) -> BlockRecord {
    BlockRecord {
        bbox: block.bbox.map(|b| b.to_array().map(u64::from)),
        class: block.class.map(|c| c.name().to_string()),
        text: block.text.clone(),
        score,
    }
}

pub fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> anyhow::Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}
