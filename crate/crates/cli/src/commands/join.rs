use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use anyhow::Context;
use doclair_core::corpus_io::PageRecord;
use doclair_core::format::{Page, SemanticClass};
use doclair_core::page_join::{join_document, DocItem, JoinConfig};
use doclair_core::reading_order::canonicalize;
use doclair_core::sanitize::SanitizeConfig;
use rayon::prelude::*;
use serde::Serialize;

use super::sanitize::clean;
use crate::records::{load_keyed, write_jsonl};
use crate::{CliResult, JoinArgs};

#[derive(Serialize)]
struct DocBlocks<'a> {
    doc_id: &'a str,
    items: &'a [DocItem],
}

fn config(args: &JoinArgs) -> anyhow::Result<JoinConfig> {
    let mut cfg = JoinConfig::default();
    if let Some(path) = &args.skip_headings_file {
        let list = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg = cfg.with_skip_headings(list.lines().map(str::trim).filter(|l| !l.is_empty()));
    }
    if args.keep_headers {
        cfg.drop_classes.remove(&SemanticClass::PageHeader);
        cfg.drop_classes.remove(&SemanticClass::PageFooter);
    }
    Ok(cfg)
}

/// Filesystem-safe stem for a doc id.
fn file_stem(doc_id: &str) -> String {
    let s: String = doc_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    match s.trim_start_matches('.') {
        "" => "doc".to_string(),
        t => t.to_string(),
    }
}

fn page_of(rec: &PageRecord, cfg: &SanitizeConfig) -> anyhow::Result<Page> {
    let (clean, _) = clean(rec, cfg)?;
    let blocks = clean.parse()?.into_blocks()?;
    Ok(canonicalize(&Page::new(clean.dims, blocks)).page)
}

pub fn run(args: &JoinArgs) -> CliResult<()> {
    let cfg = config(args)?;
    let sanitize_cfg = SanitizeConfig::default();
    let mut docs: BTreeMap<String, Vec<PageRecord>> = BTreeMap::new();
    for ((doc_id, _), rec) in load_keyed(&args.input)? {
        docs.entry(doc_id).or_default().push(rec);
    }
    for (doc_id, pages) in &docs {
        for w in pages.windows(2) {
            if w[1].page_index != w[0].page_index + 1 {
                eprintln!("warning: {doc_id}: page_index jumps from {} to {}", w[0].page_index, w[1].page_index);
            }
        }
    }

    let joined = docs
        .par_iter()
        .map(|(doc_id, recs)| {
            let pages = recs.iter().map(|r| page_of(r, &sanitize_cfg)).collect::<anyhow::Result<Vec<_>>>()?;
            join_document(&pages, &cfg).with_context(|| format!("joining {doc_id}"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    fs::create_dir_all(&args.out_text).with_context(|| format!("creating {}", args.out_text.display()))?;
    let mut used = BTreeSet::new();
    for (doc_id, doc) in docs.keys().zip(&joined) {
        let stem = file_stem(doc_id);
        let name = (1..)
            .map(|n| if n == 1 { format!("{stem}.txt") } else { format!("{stem}-{n}.txt") })
            .find(|n| !used.contains(n))
            .expect("unbounded");
        let path = args.out_text.join(&name);
        used.insert(name);
        fs::write(&path, doc.render_text()).with_context(|| format!("writing {}", path.display()))?;
        println!("{doc_id}\t{}", doc.token_count());
    }
    if let Some(path) = &args.out_blocks {
        let listing: Vec<DocBlocks> = docs
            .keys()
            .zip(&joined)
            .map(|(doc_id, d)| DocBlocks { doc_id, items: &d.items })
            .collect();
        write_jsonl(path, &listing)?;
    }
    Ok(())
}
