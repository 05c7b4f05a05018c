//! Paragraph-level inverted index over a plain-text corpus.
//!
//! Contexts are paragraphs. Postings map each lowercased token to the
//! paragraphs containing it, with the character offset of every occurrence.
//! A paragraph with `k` occurrences of a word counts as `k` contexts for it.

mod persist;
pub mod tokenize;

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use persist::{INDEX_MAGIC, INDEX_VERSION};
pub use tokenize::{tokenize, Token};

/// Default number of contexts sampled per pair.
pub const DEFAULT_CONTEXT_CAP: usize = 1000;
/// Paragraphs longer than this (in characters) are truncated.
pub const DEFAULT_MAX_PARAGRAPH_CHARS: usize = 10_000;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("index format version {found:?} is not supported (expected {expected:?})")]
    VersionMismatch { found: char, expected: char },
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParagraphSplit {
    /// Paragraphs are blocks separated by blank lines.
    BlankLine,
    /// Every non-blank line is a paragraph (wikiextractor-style output).
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexConfig {
    pub split: ParagraphSplit,
    pub max_paragraph_chars: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig { split: ParagraphSplit::BlankLine, max_paragraph_chars: DEFAULT_MAX_PARAGRAPH_CHARS }
    }
}

/// A raw input document.
#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub doc_id: String,
    pub para_index: u32,
    pub text: String,
}

/// Occurrences of one word in one paragraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    pub paragraph: u32,
    /// Character offsets of token starts, ascending.
    pub offsets: Vec<u32>,
}

impl Posting {
    /// Occurrence count `k`.
    pub fn weight(&self) -> usize {
        self.offsets.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IndexStats {
    pub documents: u64,
    pub skipped_documents: u64,
    pub truncated_paragraphs: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParagraphStore {
    paragraphs: Vec<Paragraph>,
    postings: HashMap<String, Vec<Posting>>,
    stats: IndexStats,
}

/// One co-occurrence context for an ordered pair `(a, b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextRecord<'s> {
    pub paragraph: u32,
    pub text: &'s str,
    pub a_offsets: Vec<u32>,
    pub b_offsets: Vec<u32>,
    /// Smallest `|offset_a - offset_b|` over all occurrence pairs.
    pub min_char_distance: u32,
}

impl ContextRecord<'_> {
    /// `k` for word `a`.
    pub fn weight_a(&self) -> usize {
        self.a_offsets.len()
    }

    pub fn weight_b(&self) -> usize {
        self.b_offsets.len()
    }
}

/// Contexts retrieved for a pair, possibly a sample of the full population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairContexts<'s> {
    /// Number of paragraphs where both words occur.
    pub population: usize,
    pub records: Vec<ContextRecord<'s>>,
}

fn split_paragraphs(text: &str, split: ParagraphSplit) -> Vec<String> {
    match split {
        ParagraphSplit::Line => text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect(),
        ParagraphSplit::BlankLine => {
            let mut out = Vec::new();
            let mut block: Vec<&str> = Vec::new();
            for line in text.lines().map(|l| l.trim_end_matches('\r')) {
                if line.trim().is_empty() {
                    if !block.is_empty() {
                        out.push(block.join("\n"));
                        block.clear();
                    }
                } else {
                    block.push(line);
                }
            }
            if !block.is_empty() {
                out.push(block.join("\n"));
            }
            out
        }
    }
}

/// Truncates to at most `max_chars` characters, cutting after the last
/// sentence-ending punctuation when one exists. Returns whether it cut.
fn truncate_paragraph(text: &mut String, max_chars: usize) -> bool {
    let Some((limit, _)) = text.char_indices().nth(max_chars) else {
        return false;
    };
    let head = &text[..limit];
    let mut cut = limit;
    let mut chars = head.char_indices().peekable();
    let mut last_boundary = None;
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let next_is_space = match chars.peek() {
                Some(&(_, n)) => n.is_whitespace(),
                None => text[limit..].starts_with(char::is_whitespace),
            };
            if next_is_space {
                last_boundary = Some(i + c.len_utf8());
            }
        }
    }
    if let Some(b) = last_boundary {
        cut = b;
    }
    text.truncate(cut);
    true
}

struct DocumentIndex {
    paragraphs: Vec<String>,
    postings: HashMap<String, Vec<(u32, Vec<u32>)>>,
    truncated: u64,
}

fn index_document(text: &str, config: &IndexConfig) -> DocumentIndex {
    let mut paragraphs = split_paragraphs(text, config.split);
    let mut truncated = 0;
    let mut postings: HashMap<String, Vec<(u32, Vec<u32>)>> = HashMap::new();
    for (i, p) in paragraphs.iter_mut().enumerate() {
        if truncate_paragraph(p, config.max_paragraph_chars) {
            truncated += 1;
        }
        let mut local: HashMap<String, Vec<u32>> = HashMap::new();
        for tok in tokenize(p) {
            local.entry(tok.key).or_default().push(tok.start as u32);
        }
        for (word, offsets) in local {
            postings.entry(word).or_default().push((i as u32, offsets));
        }
    }
    DocumentIndex { paragraphs, postings, truncated }
}

/// Builds the index. Documents are tokenized in parallel and merged in input
/// order, so paragraph ordinals depend only on document order.
pub fn build_index(documents: Vec<Document>, config: &IndexConfig) -> ParagraphStore {
    let per_doc: Vec<Option<DocumentIndex>> = documents
        .par_iter()
        .map(|d| match std::str::from_utf8(&d.bytes) {
            Ok(text) => Some(index_document(text, config)),
            Err(e) => {
                log::warn!("skipping document {}: {e}", d.id);
                None
            }
        })
        .collect();

    let mut store = ParagraphStore { paragraphs: Vec::new(), postings: HashMap::new(), stats: IndexStats::default() };
    for (doc, idx) in documents.iter().zip(per_doc) {
        let Some(idx) = idx else {
            store.stats.skipped_documents += 1;
            continue;
        };
        store.stats.documents += 1;
        store.stats.truncated_paragraphs += idx.truncated;
        let base = store.paragraphs.len() as u32;
        for (i, text) in idx.paragraphs.into_iter().enumerate() {
            store.paragraphs.push(Paragraph { doc_id: doc.id.clone(), para_index: i as u32, text });
        }
        for (word, list) in idx.postings {
            let dst = store.postings.entry(word).or_default();
            dst.extend(list.into_iter().map(|(p, offsets)| Posting { paragraph: base + p, offsets }));
        }
    }
    for list in store.postings.values_mut() {
        list.sort_by_key(|p| p.paragraph);
    }
    if store.stats.skipped_documents > 0 {
        log::warn!("{} undecodable documents skipped", store.stats.skipped_documents);
    }
    store
}

/// Reads every `.txt` file in `dir` (sorted by file name) as one document.
pub fn read_corpus_dir(dir: &Path) -> io::Result<Vec<Document>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(Document { id, bytes: fs::read(&p)? })
        })
        .collect()
}

/// Splits a concatenated stream into documents at form-feed (`\f`) bytes.
pub fn split_stream(bytes: &[u8], stream_id: &str) -> Vec<Document> {
    bytes
        .split(|&b| b == b'\x0c')
        .enumerate()
        .map(|(i, chunk)| Document { id: format!("{stream_id}#{i}"), bytes: chunk.to_vec() })
        .collect()
}

/// Directory of `.txt` files, or a single file split at `\f`.
pub fn read_corpus(path: &Path) -> io::Result<Vec<Document>> {
    if path.is_dir() {
        read_corpus_dir(path)
    } else {
        let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(split_stream(&fs::read(path)?, &id))
    }
}

impl ParagraphStore {
    pub fn paragraphs(&self) -> &[Paragraph] {
        &self.paragraphs
    }

    pub fn paragraph(&self, ordinal: u32) -> Option<&Paragraph> {
        self.paragraphs.get(ordinal as usize)
    }

    pub fn stats(&self) -> IndexStats {
        self.stats
    }

    pub fn postings(&self, word: &str) -> &[Posting] {
        self.postings.get(&word.to_lowercase()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// Occurrence-weighted context count `|C(word)|`.
    pub fn context_count(&self, word: &str) -> usize {
        self.postings(word).iter().map(Posting::weight).sum()
    }

    /// Number of paragraphs containing both words.
    pub fn cooccurrence_count(&self, a: &str, b: &str) -> usize {
        self.cooccurring(a, b).len()
    }

    fn cooccurring<'p>(&'p self, a: &str, b: &str) -> Vec<(&'p Posting, &'p Posting)> {
        let (pa, pb) = (self.postings(a), self.postings(b));
        if a.to_lowercase() == b.to_lowercase() {
            return Vec::new();
        }
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < pa.len() && j < pb.len() {
            match pa[i].paragraph.cmp(&pb[j].paragraph) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push((&pa[i], &pb[j]));
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    /// Paragraphs containing both `a` and `b`. When more than `cap` exist, a
    /// uniform sample without replacement of size `cap` is drawn with `seed`;
    /// records are returned in paragraph order. Identical words yield nothing.
    pub fn contexts_for_pair(&self, a: &str, b: &str, cap: usize, seed: u64) -> PairContexts<'_> {
        let all = self.cooccurring(a, b);
        let population = all.len();
        let chosen: Vec<(&Posting, &Posting)> = if population > cap {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, population, cap).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| all[i]).collect()
        } else {
            all
        };
        let records = chosen
            .into_iter()
            .map(|(pa, pb)| ContextRecord {
                paragraph: pa.paragraph,
                text: &self.paragraphs[pa.paragraph as usize].text,
                a_offsets: pa.offsets.clone(),
                b_offsets: pb.offsets.clone(),
                min_char_distance: min_distance(&pa.offsets, &pb.offsets),
            })
            .collect();
        PairContexts { population, records }
    }
}

/// Smallest absolute difference between elements of two ascending lists.
fn min_distance(xs: &[u32], ys: &[u32]) -> u32 {
    let (mut i, mut j) = (0, 0);
    let mut best = u32::MAX;
    while i < xs.len() && j < ys.len() {
        best = best.min(xs[i].abs_diff(ys[j]));
        if xs[i] < ys[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(texts: &[&str]) -> ParagraphStore {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document { id: format!("d{i}"), bytes: t.as_bytes().to_vec() })
            .collect();
        build_index(docs, &IndexConfig::default())
    }

    #[test]
    fn blank_lines_split_paragraphs() {
        let s = store(&["The cat sat.\n\nA dog ran."]);
        assert_eq!(s.paragraphs().len(), 2);
        assert_eq!(s.postings("cat").len(), 1);
        assert_eq!(s.postings("cat")[0].weight(), 1);
    }

    #[test]
    fn case_folded_multi_occurrence() {
        let s = store(&["Dog dog DOG"]);
        assert_eq!(s.postings("dog")[0].weight(), 3);
        assert_eq!(s.context_count("dog"), 3);
        assert_eq!(s.context_count("absent"), 0);
    }

    #[test]
    fn empty_corpus_is_valid() {
        let s = build_index(Vec::new(), &IndexConfig::default());
        assert!(s.paragraphs().is_empty());
        assert_eq!(s.context_count("x"), 0);
    }

    #[test]
    fn undecodable_document_skipped() {
        let docs = vec![
            Document { id: "bad".into(), bytes: vec![0xff, 0xfe, b'a'] },
            Document { id: "ok".into(), bytes: b"cat".to_vec() },
        ];
        let s = build_index(docs, &IndexConfig::default());
        assert_eq!(s.stats().skipped_documents, 1);
        assert_eq!(s.paragraphs().len(), 1);
    }

    #[test]
    fn weight_and_distance() {
        let s = store(&["dog chased dog near cat"]);
        let ctx = s.contexts_for_pair("dog", "cat", 10, 0);
        assert_eq!(ctx.records.len(), 1);
        assert_eq!(ctx.records[0].weight_a(), 2);
        assert_eq!(ctx.records[0].min_char_distance, 20 - 11);
    }

    #[test]
    fn under_cap_returns_all() {
        let s = store(&["cat dog\n\nx\n\ndog and cat\n\ncat, dog, dog"]);
        let ctx = s.contexts_for_pair("cat", "dog", 10, 7);
        assert_eq!(ctx.population, 3);
        assert_eq!(ctx.records.iter().map(|r| r.paragraph).collect::<Vec<_>>(), [0, 2, 3]);
    }

    #[test]
    fn sampling_is_seeded() {
        let text: Vec<String> = (0..50).map(|i| format!("cat {i} dog")).collect();
        let s = store(&[&text.join("\n\n")]);
        let a = s.contexts_for_pair("cat", "dog", 10, 42);
        let b = s.contexts_for_pair("cat", "dog", 10, 42);
        assert_eq!(a, b);
        assert_eq!(a.population, 50);
        assert_eq!(a.records.len(), 10);
        let c = s.contexts_for_pair("cat", "dog", 10, 43);
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn identical_words_have_no_contexts() {
        let s = store(&["dog dog"]);
        assert!(s.contexts_for_pair("dog", "dog", 5, 0).records.is_empty());
    }

    #[test]
    fn line_split_mode() {
        let docs = vec![Document { id: "w".into(), bytes: b"one cat\ntwo cat\n\nthree".to_vec() }];
        let s = build_index(docs, &IndexConfig { split: ParagraphSplit::Line, ..Default::default() });
        assert_eq!(s.paragraphs().len(), 3);
    }

    #[test]
    fn long_paragraph_truncated_at_sentence() {
        let mut text = "Short one. ".repeat(5);
        text.push_str(&"x".repeat(100));
        let docs = vec![Document { id: "d".into(), bytes: text.into_bytes() }];
        let s = build_index(docs, &IndexConfig { max_paragraph_chars: 70, ..Default::default() });
        assert_eq!(s.paragraphs()[0].text, "Short one. ".repeat(5).trim_end());
        assert_eq!(s.stats().truncated_paragraphs, 1);
    }

    #[test]
    fn form_feed_stream() {
        let docs = split_stream(b"a b\x0cc d", "s");
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].id, "s#1");
    }
}
