//! Acceptance suite. One PASS/FAIL line per criterion; exits non-zero if any
//! criterion fails. Every expected value comes from an oracle written here,
//! independent of the library code under test.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use doclair_core::format::{
    enumerate_valid_prompts, parse_page, serialize_page, vocab_extra_tokens, BBox, Block, Page, PageDims, PromptSpec,
    SemanticClass, TextMode, VocabSpec,
};
use doclair_core::layout_metrics::{
    assign, coco_ap, confusion_at, derive, ApConfig, ApWarning, ConfusionMatrix, LabeledBox,
};
use doclair_core::page_join::{assign_captions, join_document, strip_markdown, CaptionDistance, DocItem, JoinConfig};
use doclair_core::reading_order::{canonicalize, is_canonical, order_group, OrderGroup};
use doclair_core::text_metrics::{bleu, char_edit_distance, counting_f1, meteor, normalize, word_error_rate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const BG: usize = ConfusionMatrix::BACKGROUND;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dims(w: u32, h: u32) -> PageDims {
    PageDims::new(w, h).unwrap()
}

fn class_at(i: usize) -> SemanticClass {
    SemanticClass::ALL[i % SemanticClass::COUNT]
}

const WORDS: &[&str] = &[
    "the", "model", "reads", "a", "page", "of", "text", "and", "tables", "with", "figures", "in", "order", "layout",
    "section", "results", "data", "we", "show", "that", "it", "works", "on", "scanned", "documents",
];

fn words(r: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<&'static str> {
    let n = r.gen_range(lo..=hi);
    (0..n).map(|_| *WORDS.choose(r).unwrap()).collect()
}

fn random_box(r: &mut ChaCha8Rng, w: u32, h: u32) -> BBox {
    let x1 = r.gen_range(0..w - 2);
    let y1 = r.gen_range(0..h - 2);
    BBox::new(x1, y1, r.gen_range(x1 + 1..w), r.gen_range(y1 + 1..h))
}

// ---------------------------------------------------------------- oracles

/// Minimum total cost over every injective map from the smaller side into the
/// larger, summed in row order. Returns the cost of the best map.
fn exhaustive_min(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    if rows <= cols {
        let mut cols_idx: Vec<usize> = (0..cols).collect();
        permute(&mut cols_idx, 0, &mut |perm| {
            let total = (0..rows).fold(0.0, |acc, i| acc + cost[i][perm[i]]);
            best = best.min(total);
        });
    } else {
        let mut rows_idx: Vec<usize> = (0..rows).collect();
        permute(&mut rows_idx, 0, &mut |perm| {
            let mut chosen: Vec<(usize, usize)> = (0..cols).map(|j| (perm[j], j)).collect();
            chosen.sort();
            let total = chosen.iter().fold(0.0, |acc, &(i, j)| acc + cost[i][j]);
            best = best.min(total);
        });
    }
    best
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

fn pair_total(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    let mut p = pairs.to_vec();
    p.sort();
    p.iter().fold(0.0, |acc, &(i, j)| acc + cost[i][j])
}

fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x2.min(b.x2) as i64 - a.x1.max(b.x1) as i64).max(0) as f64;
    let iy = (a.y2.min(b.y2) as i64 - a.y1.max(b.y1) as i64).max(0) as f64;
    let inter = ix * iy;
    let area = |b: &BBox| (b.x2 - b.x1) as f64 * (b.y2 - b.y1) as f64;
    let union = area(a) + area(b) - inter;
    if inter == 0.0 || union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Full-matrix edit distance.
fn oracle_edit<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn multiset_f1(reference: &[&str], hyp: &[&str]) -> f64 {
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for w in reference {
        *counts.entry(w).or_default() += 1;
    }
    let mut overlap = 0;
    for w in hyp {
        let c = counts.entry(w).or_default();
        if *c > 0 {
            *c -= 1;
            overlap += 1;
        }
    }
    2.0 * overlap as f64 / (reference.len() + hyp.len()) as f64
}

// ------------------------------------------------------------- criteria

fn c1_grammar_round_trip() -> Outcome {
    let started = Instant::now();
    let mut r = rng(1);
    let prompts = enumerate_valid_prompts();
    let d = dims(1280, 1024);
    for i in 0..1000 {
        let prompt = prompts[i % prompts.len()];
        let n = if prompt.boxes() { r.gen_range(0..12) } else { 1 };
        let blocks: Vec<Block> = (0..n)
            .map(|_| {
                let text = words(&mut r, 1, 8).join(" ");
                Block {
                    bbox: prompt.boxes().then(|| random_box(&mut r, 1280, 1024)),
                    text: prompt.has_text().then_some(text),
                    class: prompt.classes().then(|| class_at(r.gen_range(0..SemanticClass::COUNT))),
                }
            })
            .collect();
        let page = Page::new(d, blocks);
        let raw = serialize_page(&page, prompt).map_err(|e| format!("serialize: {e}"))?;
        if raw.is_empty() {
            continue;
        }
        let report = parse_page(&raw, prompt, d).map_err(|e| format!("parse: {e}"))?;
        ensure!(report.rejected_tail.is_none(), "page {i} under {prompt}: unexpected tail");
        let back = report.into_blocks().map_err(|e| e.to_string())?;
        ensure!(back == page.blocks, "page {i} under {prompt}: round trip differs");
    }
    let took = started.elapsed();
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    Ok(())
}

fn c2_prompt_combinatorics() -> Outcome {
    let valid = enumerate_valid_prompts();
    ensure!(valid.len() == 8, "{} prompts", valid.len());
    let mut rejected = Vec::new();
    for mode in [TextMode::Structured, TextMode::Plain, TextMode::NoText] {
        for boxes in [true, false] {
            for classes in [true, false] {
                match PromptSpec::new(mode, boxes, classes) {
                    Ok(p) => ensure!(valid.contains(&p), "{p} valid but not enumerated"),
                    Err(_) => rejected.push((mode, boxes, classes)),
                }
            }
        }
    }
    let mut expected: Vec<_> = [TextMode::Structured, TextMode::Plain, TextMode::NoText]
        .into_iter()
        .map(|m| (m, false, true))
        .collect();
    expected.push((TextMode::NoText, false, false));
    rejected.sort();
    expected.sort();
    ensure!(rejected == expected, "rejected {rejected:?}");
    Ok(())
}

fn c3_vocabulary() -> Outcome {
    let n = vocab_extra_tokens(VocabSpec { dims: dims(1280, 1024), num_classes: 11 });
    ensure!(n == 1024 + 1280 + 11 + 7 && n == 2322, "got {n}");
    Ok(())
}

fn c4_assignment_optimality() -> Outcome {
    let mut r = rng(4);
    for i in 0..500 {
        let (n, m) = (r.gen_range(0..=6), r.gen_range(0..=6));
        if i % 2 == 0 {
            let t: Vec<BBox> = (0..n).map(|_| random_box(&mut r, 200, 200)).collect();
            let p: Vec<BBox> = (0..m).map(|_| random_box(&mut r, 200, 200)).collect();
            let cost: Vec<Vec<f64>> = t.iter().map(|a| p.iter().map(|b| -oracle_iou(a, b)).collect()).collect();
            let pairs = assign(&t, &p);
            ensure!(pairs.len() == n.min(m), "instance {i}: {} pairs", pairs.len());
            let got = pair_total(&cost, &pairs);
            let want = exhaustive_min(&cost);
            ensure!(got == want, "instance {i}: IoU total {got} vs {want}");
        } else {
            let mk = |r: &mut ChaCha8Rng, class| Block::new(random_box(r, 500, 500), "", class);
            let caps: Vec<Block> = (0..n).map(|_| mk(&mut r, SemanticClass::Caption)).collect();
            let objs: Vec<Block> = (0..m).map(|_| mk(&mut r, SemanticClass::Picture)).collect();
            let center = |b: &BBox| ((b.x1 + b.x2) as f64 / 2.0, (b.y1 + b.y2) as f64 / 2.0);
            let cost: Vec<Vec<f64>> = caps
                .iter()
                .map(|c| {
                    objs.iter()
                        .map(|o| {
                            let (a, b) = (center(&c.bbox.unwrap()), center(&o.bbox.unwrap()));
                            (a.0 - b.0).abs() + (a.1 - b.1).abs()
                        })
                        .collect()
                })
                .collect();
            let a = assign_captions(&caps, &objs, CaptionDistance::Center).map_err(|e| e.to_string())?;
            ensure!(a.pairs.len() == n.min(m), "instance {i}: {} pairs", a.pairs.len());
            let got = pair_total(&cost, &a.pairs);
            let want = exhaustive_min(&cost);
            ensure!(got == want, "instance {i}: distance total {got} vs {want}");
        }
    }
    Ok(())
}

fn random_labeled(r: &mut ChaCha8Rng, n: usize) -> Vec<LabeledBox> {
    (0..n)
        .map(|_| LabeledBox::new(random_box(r, 100, 100), class_at(r.gen_range(0..SemanticClass::COUNT))))
        .collect()
}

fn c5_confusion_conservation() -> Outcome {
    let mut r = rng(5);
    for i in 0..200 {
        let n = r.gen_range(0..8);
        let targets = random_labeled(&mut r, n);
        let n = r.gen_range(0..8);
        let preds = random_labeled(&mut r, n);
        let thr = [0.3, 0.5, 0.75][i % 3];
        let cm = confusion_at(&targets, &preds, thr, ConfusionMatrix::new());
        for c in SemanticClass::ALL {
            let k = c.index();
            let nt = targets.iter().filter(|t| t.class == c).count() as u64;
            let np = preds.iter().filter(|p| p.class == c).count() as u64;
            ensure!(cm.row_sum(k) == nt, "page {i}: row {c:?} {} vs {nt}", cm.row_sum(k));
            ensure!(cm.col_sum(k) == np, "page {i}: col {c:?} {} vs {np}", cm.col_sum(k));
        }
        // Pairs above the threshold fill one cell; the rest land in background.
        let pairs = assign(
            &targets.iter().map(|t| t.bbox).collect::<Vec<_>>(),
            &preds.iter().map(|p| p.bbox).collect::<Vec<_>>(),
        );
        let strong = pairs.iter().filter(|&&(t, p)| oracle_iou(&targets[t].bbox, &preds[p].bbox) > thr).count();
        let want_bg_row = (preds.len() - strong) as u64;
        let want_bg_col = (targets.len() - strong) as u64;
        let bg_row: u64 = (0..BG).map(|c| cm.get(BG, c)).sum();
        let bg_col: u64 = (0..BG).map(|c| cm.get(c, BG)).sum();
        ensure!(bg_row == want_bg_row && bg_col == want_bg_col, "page {i}: background counts");
        ensure!(cm.get(BG, BG) == 0, "page {i}: background corner");
        ensure!(cm.total() == (targets.len() + preds.len() - strong) as u64, "page {i}: total");
    }
    Ok(())
}

fn c6_strict_threshold() -> Outcome {
    let t = [LabeledBox::new(BBox::new(0, 0, 100, 100), SemanticClass::Text)];
    let p = [LabeledBox::new(BBox::new(0, 0, 100, 55), SemanticClass::Text)];
    ensure!(oracle_iou(&t[0].bbox, &p[0].bbox) == 0.55, "fixture IoU is not 0.55");
    let k = SemanticClass::Text.index();
    let at50 = confusion_at(&t, &p, 0.50, ConfusionMatrix::new());
    ensure!(at50.get(k, k) == 1 && at50.get(k, BG) == 0, "0.50: not matched");
    let at55 = confusion_at(&t, &p, 0.55, ConfusionMatrix::new());
    ensure!(at55.get(k, k) == 0, "0.55: counted as matched");
    ensure!(at55.get(k, BG) == 1 && at55.get(BG, k) == 1, "0.55: not double counted as background");
    Ok(())
}

fn c7_metric_identities() -> Outcome {
    let mut r = rng(7);
    for i in 0..200 {
        let mut cm = ConfusionMatrix::new();
        for _ in 0..4 {
            let n = r.gen_range(0..6);
        let targets = random_labeled(&mut r, n);
            let n = r.gen_range(0..6);
        let preds = random_labeled(&mut r, n);
            cm = confusion_at(&targets, &preds, 0.3, cm);
        }
        let d = derive(&cm);
        for m in &d.per_class {
            let k = m.class.index();
            ensure!(m.tp + m.fp == cm.col_sum(k), "matrix {i}: tp + fp");
            ensure!(m.tp + m.fn_ == cm.row_sum(k), "matrix {i}: tp + fn");
            if m.tp + m.fp == 0 {
                ensure!(m.precision == 0.0, "matrix {i}: 0/0 precision");
            }
            if m.tp + m.fn_ == 0 {
                ensure!(m.recall == 0.0, "matrix {i}: 0/0 recall");
            }
        }
        let (p, rec) = (d.macro_precision, d.balanced_accuracy);
        let h = if p + rec > 0.0 { 2.0 * p * rec / (p + rec) } else { 0.0 };
        ensure!((d.macro_f1 - h).abs() <= 1e-12, "matrix {i}: macro_f1 {} vs {h}", d.macro_f1);
    }
    let empty = derive(&ConfusionMatrix::new());
    ensure!(empty.macro_precision == 0.0 && empty.macro_f1 == 0.0, "empty matrix");

    // Text: 1 hit, 1 spurious. Title: 1 hit, 2 missed.
    let (t, ti) = (SemanticClass::Text.index(), SemanticClass::Title.index());
    let mut counts = vec![vec![0u64; ConfusionMatrix::SIZE]; ConfusionMatrix::SIZE];
    counts[t][t] = 1;
    counts[BG][t] = 1;
    counts[ti][ti] = 1;
    counts[ti][BG] = 2;
    let d = derive(&ConfusionMatrix::from_counts(counts).ok_or("fixture matrix rejected")?);
    let (p, rec) = (0.75, 2.0 / 3.0);
    let harmonic = 2.0 * p * rec / (p + rec);
    let reciprocal_form = 2.0 * p * rec / (1.0 / p + 1.0 / rec);
    ensure!((d.macro_f1 - harmonic).abs() <= 1e-12, "fixture macro_f1 {}", d.macro_f1);
    ensure!((d.macro_f1 - reciprocal_form).abs() > 0.1, "fixture does not separate the formulas");
    Ok(())
}

fn c8_edit_distance_oracles() -> Outcome {
    let mut r = rng(8);
    for i in 0..1000 {
        let a = words(&mut r, 0, 15).join(" ");
        let b = words(&mut r, 0, 15).join(" ");
        let (na, nb) = (normalize(&a), normalize(&b));
        let wd = oracle_edit(&na.tokens, &nb.tokens) as f64;
        let want_wer = if na.tokens.is_empty() { wd } else { wd / na.tokens.len() as f64 };
        ensure!(word_error_rate(&na, &nb) == want_wer, "pair {i}: WER");
        let (ca, cb): (Vec<char>, Vec<char>) = (na.raw_normalized.chars().collect(), nb.raw_normalized.chars().collect());
        let want_ced = oracle_edit(&ca, &cb) as f64 / ca.len().max(cb.len()).max(1) as f64;
        ensure!(char_edit_distance(&na, &nb) == want_ced, "pair {i}: char edit distance");
    }
    Ok(())
}

fn c9_counting_f1() -> Outcome {
    let reference = "he said that she said that they said that he said something";
    let hyp = "he said that she said that they said that he something";
    let want = multiset_f1(
        &reference.split(' ').collect::<Vec<_>>(),
        &hyp.split(' ').collect::<Vec<_>>(),
    );
    ensure!((want - 22.0 / 23.0).abs() < 1e-12, "oracle gives {want}");
    let got = counting_f1(&normalize(reference), &normalize(hyp));
    ensure!((got - 22.0 / 23.0).abs() < 1e-9, "counting_f1 = {got}");
    Ok(())
}

fn c10_bleu_meteor_anchors() -> Outcome {
    let mut r = rng(10);
    for _ in 0..50 {
        let t = normalize(&words(&mut r, 1, 30).join(" "));
        let m = t.tokens.len() as f64;
        ensure!(bleu(&t, &t) == 1.0, "BLEU(identical) = {}", bleu(&t, &t));
        let met = meteor(&t, &t);
        ensure!((met - (1.0 - 0.5 / m.powi(3))).abs() <= 1e-12, "METEOR(identical, {m}) = {met}");
        let empty = normalize("");
        ensure!(bleu(&t, &empty) == 0.0 && meteor(&t, &empty) == 0.0, "empty hypothesis");
    }
    Ok(())
}

fn c11_coco_ap_determinism() -> Outcome {
    use SemanticClass::Text;
    let targets = [
        LabeledBox::new(BBox::new(0, 0, 100, 100), Text),
        LabeledBox::new(BBox::new(200, 200, 300, 300), Text),
    ];
    let preds = [
        LabeledBox::scored(BBox::new(0, 0, 100, 100), Text, 0.7),
        LabeledBox::scored(BBox::new(500, 500, 600, 600), Text, 0.7),
        LabeledBox::scored(BBox::new(200, 200, 300, 290), Text, 0.7),
    ];
    let mut results = Vec::new();
    permute(&mut vec![0, 1, 2], 0, &mut |perm| results.push(perm.to_vec()));
    ensure!(results.len() == 6, "permutation count");
    let mut aps = Vec::new();
    for perm in &results {
        let p: Vec<LabeledBox> = perm.iter().map(|&i| preds[i]).collect();
        let res = coco_ap(&targets, &p, ApConfig::default()).map_err(|e| e.to_string())?;
        ensure!(
            res.warnings.contains(&ApWarning::DegenerateScores { class: Text }),
            "no DegenerateScores warning for {perm:?}"
        );
        aps.push(res.mean_ap.to_bits());
    }
    ensure!(aps.iter().all(|&a| a == aps[0]), "AP differs across permutations: {aps:?}");
    Ok(())
}

fn c12_canonicalization() -> Outcome {
    let mut r = rng(12);
    let d = dims(100, 100);
    for i in 0..1000 {
        let n = r.gen_range(0..20);
        let blocks: Vec<Block> = (0..n)
            .map(|k| Block {
                bbox: None,
                text: Some(format!("b{k}")),
                class: (r.gen_range(0..12) < 11).then(|| class_at(r.gen_range(0..SemanticClass::COUNT))),
            })
            .collect();
        let page = Page::new(d, blocks.clone());
        let once = canonicalize(&page).page;
        ensure!(canonicalize(&once).page == once, "sequence {i}: not idempotent");
        ensure!(is_canonical(&once), "sequence {i}: output not canonical");
        let group = |b: &Block| b.class.map_or(OrderGroup::Body, order_group);
        let want: Vec<Block> = [OrderGroup::Header, OrderGroup::Body, OrderGroup::Trailer]
            .iter()
            .flat_map(|g| blocks.iter().filter(move |b| group(b) == *g).cloned())
            .collect();
        ensure!(once.blocks == want, "sequence {i}: not the stable partition");
    }
    Ok(())
}

fn random_markdown(r: &mut ChaCha8Rng) -> String {
    const PIECES: &[&str] = &[
        "#", "## ", "### ", "*", "**", "_", "__", "`", "```", "~~", "[", "]", "(", ")", "![", "](", "- ", "* ", "1. ",
        "> ", " ", "\n", "word", "text", "x", "a_b", "http://e.x", "|", "!",
    ];
    let n = r.gen_range(0..30);
    (0..n).map(|_| *PIECES.choose(r).unwrap()).collect()
}

fn c13_page_join() -> Outcome {
    use SemanticClass::*;
    let d = dims(1000, 1000);
    let at = |y: u32, class, text: &str| Block::new(BBox::new(10, y, 900, y + 40), text, class);
    let cfg = JoinConfig::default();

    let pages = [Page::new(d, vec![at(100, Text, "to be")]), Page::new(d, vec![at(100, Text, "continued.")])];
    let doc = join_document(&pages, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        doc.items == vec![DocItem::Paragraph { text: "to be continued.".into() }],
        "carry-over gave {:?}",
        doc.items
    );

    let pages = [
        Page::new(d, vec![at(100, SectionHeader, "Results"), at(200, Text, "It works.")]),
        Page::new(
            d,
            vec![
                at(100, SectionHeader, "References"),
                at(200, Text, "[1] A cited work."),
                at(300, Text, "[2] Another one."),
            ],
        ),
    ];
    let doc = join_document(&pages, &cfg).map_err(|e| e.to_string())?;
    let text = doc.render_text();
    ensure!(!text.contains("cited") && !text.contains("Another"), "references body present: {text:?}");
    ensure!(text.contains("It works."), "body before references missing: {text:?}");

    let mut r = rng(13);
    for i in 0..500 {
        let s = random_markdown(&mut r);
        let once = strip_markdown(&s);
        ensure!(strip_markdown(&once) == once, "snippet {i} {s:?}: not idempotent");
    }
    Ok(())
}

// ------------------------------------------------------ CLI corpora

fn block_json(b: &BBox, class: SemanticClass, text: &str, score: Option<f64>) -> Value {
    let mut v = json!({"bbox": [b.x1, b.y1, b.x2, b.y2], "class": class.name(), "text": text});
    if let Some(s) = score {
        v["score"] = json!(s);
    }
    v
}

/// Ground truth and noisy scored predictions for `pages` pages.
fn synthetic_corpus(dir: &Path, pages: usize, seed: u64) {
    let mut r = rng(seed);
    let (mut gt, mut pred) = (String::new(), String::new());
    for i in 0..pages {
        let doc = format!("doc{:03}", i / 10);
        let n = r.gen_range(5..25);
        let (mut gb, mut pb) = (Vec::new(), Vec::new());
        for _ in 0..n {
            let b = random_box(&mut r, 1000, 1300);
            let class = class_at(r.gen_range(0..SemanticClass::COUNT));
            let text = words(&mut r, 3, 40).join(" ");
            gb.push(block_json(&b, class, &text, None));
            if r.gen_bool(0.1) {
                continue;
            }
            let j = |r: &mut ChaCha8Rng, v: u32, hi: u32| (v as i64 + r.gen_range(-6..=6)).clamp(0, hi as i64 - 1) as u32;
            let mut pb_box = BBox::new(j(&mut r, b.x1, 1000), j(&mut r, b.y1, 1300), j(&mut r, b.x2, 1000), j(&mut r, b.y2, 1300));
            if pb_box.x2 <= pb_box.x1 || pb_box.y2 <= pb_box.y1 {
                pb_box = b;
            }
            let pclass = if r.gen_bool(0.1) { class_at(r.gen_range(0..SemanticClass::COUNT)) } else { class };
            let mut ptext: Vec<&str> = text.split(' ').collect();
            if r.gen_bool(0.5) && ptext.len() > 1 {
                ptext.remove(r.gen_range(0..ptext.len()));
            }
            let score = (r.gen_range(0..1000) as f64) / 1000.0;
            pb.push(block_json(&pb_box, pclass, &ptext.join(" "), Some(score)));
        }
        for _ in 0..r.gen_range(0..3) {
            let b = random_box(&mut r, 1000, 1300);
            pb.push(block_json(&b, class_at(r.gen_range(0..11)), "noise", Some(r.gen_range(0..1000) as f64 / 1000.0)));
        }
        let rec = |blocks: Vec<Value>| {
            json!({"doc_id": doc, "page_index": i % 10, "width": 1000, "height": 1300, "blocks": blocks}).to_string()
        };
        gt.push_str(&rec(gb));
        gt.push('\n');
        pred.push_str(&rec(pb));
        pred.push('\n');
    }
    fs::write(dir.join("gt.jsonl"), gt).unwrap();
    fs::write(dir.join("pred.jsonl"), pred).unwrap();
}

fn cli(args: &[&str]) -> i32 {
    doclair_cli::run(std::iter::once("doclair").chain(args.iter().copied()))
}

fn c14_end_to_end_determinism() -> Outcome {
    let started = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    synthetic_corpus(dir, 100, 14);
    let (pred, gt) = (dir.join("pred.jsonl"), dir.join("gt.jsonl"));
    let mut reports = Vec::new();
    for threads in ["1", "4", "8"] {
        let out = dir.join(format!("out{threads}"));
        let code = cli(&[
            "--threads",
            threads,
            "eval-layout",
            "--pred",
            pred.to_str().unwrap(),
            "--gt",
            gt.to_str().unwrap(),
            "--ap",
            "--out",
            out.to_str().unwrap(),
        ]);
        ensure!(code == 0, "threads {threads}: exit {code}");
        reports.push(fs::read(out.join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure!(reports[0] == reports[1], "1 vs 4 threads differ");
    ensure!(reports[0] == reports[2], "1 vs 8 threads differ");
    let took = started.elapsed();
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(())
}

fn c15_throughput() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    synthetic_corpus(dir, 789, 15);
    let (pred, gt) = (dir.join("pred.jsonl"), dir.join("gt.jsonl"));
    let (pred, gt) = (pred.to_str().unwrap(), gt.to_str().unwrap());
    let started = Instant::now();
    let text_out = dir.join("text");
    let code = cli(&["--threads", "1", "eval-text", "--pred", pred, "--gt", gt, "--out", text_out.to_str().unwrap()]);
    ensure!(code == 0, "eval-text exit {code}");
    let layout_out = dir.join("layout");
    let code = cli(&["--threads", "1", "eval-layout", "--pred", pred, "--gt", gt, "--ap", "--out", layout_out.to_str().unwrap()]);
    ensure!(code == 0, "eval-layout exit {code}");
    let took = started.elapsed();
    let report: Value = serde_json::from_str(&fs::read_to_string(layout_out.join("report.json")).unwrap()).unwrap();
    ensure!(report["layout"]["pages"] == json!(789), "page count {}", report["layout"]["pages"]);
    ensure!(took < Duration::from_secs(30), "took {took:?}");
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 15] = [
        ("grammar round-trip", c1_grammar_round_trip),
        ("prompt combinatorics", c2_prompt_combinatorics),
        ("vocabulary arithmetic", c3_vocabulary),
        ("assignment optimality", c4_assignment_optimality),
        ("confusion-matrix conservation", c5_confusion_conservation),
        ("threshold behavior", c6_strict_threshold),
        ("metric identities", c7_metric_identities),
        ("edit-distance oracles", c8_edit_distance_oracles),
        ("counting F1 fixture", c9_counting_f1),
        ("BLEU/METEOR anchors", c10_bleu_meteor_anchors),
        ("COCO-AP determinism", c11_coco_ap_determinism),
        ("reading-order canonicalization", c12_canonicalization),
        ("page-join carry-over", c13_page_join),
        ("end-to-end determinism", c14_end_to_end_determinism),
        ("throughput sanity", c15_throughput),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS {:>2}. {name} ({ms} ms)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2}. {name} ({ms} ms): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
