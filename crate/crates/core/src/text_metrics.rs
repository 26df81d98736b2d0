//! Text accuracy metrics over normalized word sequences: WER, character
//! edit distance, set F1, Counting F1, BLEU-4 and exact-match METEOR.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NormalizeOptions {
    pub keep_case: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedText {
    pub tokens: Vec<String>,
    pub raw_normalized: String,
}

impl NormalizedText {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn normalize(text: &str) -> NormalizedText {
    normalize_with(text, NormalizeOptions::default())
}

/// Anything outside ASCII `[A-Za-z0-9]` becomes a word break.
pub fn normalize_with(text: &str, opts: NormalizeOptions) -> NormalizedText {
    let tokens: Vec<String> = text
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| if opts.keep_case { t.to_string() } else { t.to_ascii_lowercase() })
        .collect();
    let raw_normalized = tokens.join(" ");
    NormalizedText { tokens, raw_normalized }
}

/// Unit-cost Levenshtein distance.
///
/// Bit-parallel over 64-symbol blocks of `a` (Myers, in Hyyrö's block
/// form), so the cost is `O(|b| * |a| / 64)`.
pub fn levenshtein<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let words = a.len().div_ceil(64);
    let mut ids: HashMap<&T, usize> = HashMap::new();
    let mut peq: Vec<u64> = Vec::new();
    for (i, sym) in a.iter().enumerate() {
        let next = ids.len();
        let id = *ids.entry(sym).or_insert(next);
        if id == next {
            peq.resize(peq.len() + words, 0);
        }
        peq[id * words + i / 64] |= 1 << (i % 64);
    }
    let zero = vec![0u64; words];
    let last = 1u64 << ((a.len() - 1) % 64);
    let mut vp = vec![!0u64; words];
    let mut vn = vec![0u64; words];
    let mut dist = a.len();
    for sym in b {
        let pm_row = ids.get(sym).map_or(&zero[..], |&id| &peq[id * words..(id + 1) * words]);
        // Top row grows by one per column.
        let (mut hp_carry, mut hn_carry) = (1u64, 0u64);
        for w in 0..words {
            let (pv, mv) = (vp[w], vn[w]);
            let x = pm_row[w] | hn_carry;
            let d0 = ((x & pv).wrapping_add(pv) ^ pv) | x | mv;
            let hp = mv | !(d0 | pv);
            let hn = d0 & pv;
            let (hp_out, hn_out) = if w + 1 < words {
                (hp >> 63, hn >> 63)
            } else {
                (u64::from(hp & last != 0), u64::from(hn & last != 0))
            };
            let hp = (hp << 1) | hp_carry;
            let hn = (hn << 1) | hn_carry;
            vp[w] = hn | !(d0 | hp);
            vn[w] = d0 & hp;
            hp_carry = hp_out;
            hn_carry = hn_out;
        }
        dist = dist + hp_carry as usize - hn_carry as usize;
    }
    dist
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

/// Word edit distance over reference length. An empty reference yields
/// `|hyp|` (0 when both are empty).
pub fn word_error_rate(reference: &NormalizedText, hyp: &NormalizedText) -> f64 {
    let d = levenshtein(&reference.tokens, &hyp.tokens) as f64;
    if reference.tokens.is_empty() {
        return d;
    }
    d / reference.tokens.len() as f64
}

pub fn char_edit_distance(reference: &NormalizedText, hyp: &NormalizedText) -> f64 {
    let a: Vec<char> = reference.raw_normalized.chars().collect();
    let b: Vec<char> = hyp.raw_normalized.chars().collect();
    levenshtein(&a, &b) as f64 / a.len().max(b.len()).max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(common: usize, hyp: usize, reference: usize) -> Self {
        let precision = ratio(common as f64, hyp as f64);
        let recall = ratio(common as f64, reference as f64);
        Prf { precision, recall, f1: harmonic(precision, recall) }
    }
}

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

/// Precision, recall and F1 over unique token sets.
pub fn word_prf(reference: &NormalizedText, hyp: &NormalizedText) -> Prf {
    let r = counts(&reference.tokens);
    let h = counts(&hyp.tokens);
    let common = h.keys().filter(|k| r.contains_key(*k)).count();
    Prf::from_counts(common, h.len(), r.len())
}

/// F1 over occurrence-indexed tokens: a word seen three times in the
/// reference and twice in the hypothesis contributes two true positives.
pub fn counting_prf(reference: &NormalizedText, hyp: &NormalizedText) -> Prf {
    let r = counts(&reference.tokens);
    let tp: usize = counts(&hyp.tokens)
        .iter()
        .map(|(k, &n)| n.min(r.get(k).copied().unwrap_or(0)))
        .sum();
    Prf::from_counts(tp, hyp.tokens.len(), reference.tokens.len())
}

pub fn counting_f1(reference: &NormalizedText, hyp: &NormalizedText) -> f64 {
    counting_prf(reference, hyp).f1
}

pub const BLEU_MAX_ORDER: usize = 4;
pub const BLEU_FLOOR: f64 = 1e-9;

/// Maps tokens to small ids shared across calls with the same table.
fn intern<'a>(ids: &mut HashMap<&'a str, u32>, tokens: &'a [String]) -> Vec<u32> {
    tokens
        .iter()
        .map(|t| {
            let next = ids.len() as u32;
            *ids.entry(t.as_str()).or_insert(next)
        })
        .collect()
}

fn ngram_counts(tokens: &[u32], n: usize) -> HashMap<&[u32], usize> {
    let mut m = HashMap::new();
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

/// Corpus-style BLEU-4 on a single pair with uniform weights. Orders above
/// the hypothesis length are dropped; zero precisions are floored.
pub fn bleu(reference: &NormalizedText, hyp: &NormalizedText) -> f64 {
    if hyp.tokens.is_empty() {
        return 0.0;
    }
    let mut ids = HashMap::new();
    let r = intern(&mut ids, &reference.tokens);
    let h = intern(&mut ids, &hyp.tokens);
    let orders = BLEU_MAX_ORDER.min(h.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let ref_counts = ngram_counts(&r, n);
        let clipped: usize = ngram_counts(&h, n)
            .iter()
            .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        let p = clipped as f64 / (h.len() + 1 - n) as f64;
        log_sum += p.max(BLEU_FLOOR).ln();
    }
    let bp = if h.len() < r.len() {
        (1.0 - r.len() as f64 / h.len() as f64).exp()
    } else {
        1.0
    };
    bp * (log_sum / orders as f64).exp()
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Run {
    len: usize,
    i_end: Reverse<usize>,
    j_end: Reverse<usize>,
}

fn push_run(heap: &mut BinaryHeap<Run>, i: usize, j: usize, len: usize) {
    if len >= 2 {
        heap.push(Run { len, i_end: Reverse(i + len - 1), j_end: Reverse(j + len - 1) });
    }
}

/// One-to-one alignment between hypothesis and reference token positions,
/// as `(hyp_index, ref_index)` pairs sorted by hypothesis index.
pub fn meteor_alignment(reference: &[String], hyp: &[String]) -> Vec<(usize, usize)> {
    let mut ids = HashMap::new();
    let h = intern(&mut ids, hyp);
    let r = intern(&mut ids, reference);
    let mut h_used = vec![false; h.len()];
    let mut r_used = vec![false; r.len()];
    let mut pairs = Vec::new();

    // Repeatedly take the longest common run of free tokens; ties go to the
    // earliest hypothesis end, then the earliest reference end. Runs live on
    // diagonals and only ever shrink, so a stale heap entry is split into its
    // still-free pieces and pushed back.
    let mut positions: HashMap<u32, Vec<usize>> = HashMap::new();
    for (j, &t) in r.iter().enumerate() {
        positions.entry(t).or_default().push(j);
    }
    let mut heap = BinaryHeap::new();
    for (i, t) in h.iter().enumerate() {
        for &j in positions.get(t).map_or(&[][..], Vec::as_slice) {
            if i > 0 && j > 0 && h[i - 1] == r[j - 1] {
                continue;
            }
            let len = (0..).take_while(|&k| i + k < h.len() && j + k < r.len() && h[i + k] == r[j + k]).count();
            push_run(&mut heap, i, j, len);
        }
    }
    while let Some(Run { len, i_end: Reverse(i_end), j_end: Reverse(j_end) }) = heap.pop() {
        let (i0, j0) = (i_end + 1 - len, j_end + 1 - len);
        if (0..len).all(|k| !h_used[i0 + k] && !r_used[j0 + k]) {
            for k in 0..len {
                h_used[i0 + k] = true;
                r_used[j0 + k] = true;
                pairs.push((i0 + k, j0 + k));
            }
            continue;
        }
        let mut start = 0;
        for k in 0..=len {
            if k == len || h_used[i0 + k] || r_used[j0 + k] {
                push_run(&mut heap, i0 + start, j0 + start, k - start);
                start = k + 1;
            }
        }
    }
    // Only singletons remain; the same tie-break reduces to a single pass.
    let mut free: HashMap<u32, std::collections::VecDeque<usize>> = HashMap::new();
    for (j, &t) in r.iter().enumerate() {
        if !r_used[j] {
            free.entry(t).or_default().push_back(j);
        }
    }
    for (i, &t) in h.iter().enumerate() {
        if h_used[i] {
            continue;
        }
        if let Some(j) = free.get_mut(&t).and_then(|q| q.pop_front()) {
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Number of maximal runs that are contiguous in both sequences.
pub fn count_chunks(alignment: &[(usize, usize)]) -> usize {
    if alignment.is_empty() {
        return 0;
    }
    1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

pub fn meteor_from_counts(matches: usize, chunks: usize, hyp_len: usize, ref_len: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let m = matches as f64;
    let p = m / hyp_len as f64;
    let r = m / ref_len as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    fmean * (1.0 - penalty)
}

/// Exact-match unigram METEOR.
pub fn meteor(reference: &NormalizedText, hyp: &NormalizedText) -> f64 {
    let alignment = meteor_alignment(&reference.tokens, &hyp.tokens);
    meteor_from_counts(
        alignment.len(),
        count_chunks(&alignment),
        hyp.tokens.len(),
        reference.tokens.len(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TextScores {
    pub wer: f64,
    pub edit_distance: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub counting_f1: f64,
    pub bleu: f64,
    pub meteor: f64,
}

impl TextScores {
    fn zip(self, o: TextScores, f: impl Fn(f64, f64) -> f64) -> TextScores {
        TextScores {
            wer: f(self.wer, o.wer),
            edit_distance: f(self.edit_distance, o.edit_distance),
            f1: f(self.f1, o.f1),
            precision: f(self.precision, o.precision),
            recall: f(self.recall, o.recall),
            counting_f1: f(self.counting_f1, o.counting_f1),
            bleu: f(self.bleu, o.bleu),
            meteor: f(self.meteor, o.meteor),
        }
    }
}

pub fn score_normalized(reference: &NormalizedText, hyp: &NormalizedText) -> TextScores {
    let prf = word_prf(reference, hyp);
    TextScores {
        wer: word_error_rate(reference, hyp),
        edit_distance: char_edit_distance(reference, hyp),
        f1: prf.f1,
        precision: prf.precision,
        recall: prf.recall,
        counting_f1: counting_f1(reference, hyp),
        bleu: bleu(reference, hyp),
        meteor: meteor(reference, hyp),
    }
}

pub fn score_pair(ref_raw: &str, hyp_raw: &str) -> TextScores {
    score_pair_with(ref_raw, hyp_raw, NormalizeOptions::default())
}

pub fn score_pair_with(ref_raw: &str, hyp_raw: &str, opts: NormalizeOptions) -> TextScores {
    score_normalized(&normalize_with(ref_raw, opts), &normalize_with(hyp_raw, opts))
}

/// Running (sum, count) of scores; merging is associative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreMean {
    pub sum: TextScores,
    pub count: u64,
}

impl ScoreMean {
    pub fn add(&mut self, s: TextScores) {
        self.sum = self.sum.zip(s, |a, b| a + b);
        self.count += 1;
    }

    pub fn merge(&mut self, other: &ScoreMean) {
        self.sum = self.sum.zip(other.sum, |a, b| a + b);
        self.count += other.count;
    }

    pub fn mean(&self) -> TextScores {
        let n = self.count as f64;
        self.sum.zip(TextScores::default(), |a, _| ratio(a, n))
    }
}
