//! ConceptNet assertion parsing and relation-specific pair sets.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pair::{OrderedPair, WordPair};

/// Relation assigned to pairs that match no knowledge-graph edge.
pub const FALLBACK_RELATION: &str = "relatedTo";

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("vocabulary intersection is empty")]
    EmptyVocabulary,
    #[error("no vocabularies given")]
    NoVocabularies,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KgEdge {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub rows: usize,
    pub kept: usize,
    pub malformed: usize,
    /// SHA-256 of the (decompressed) dump bytes.
    pub sha256: String,
}

/// `/r/IsA` → `isA`.
fn relation_name(uri: &str) -> Option<String> {
    let last = uri.trim_end_matches('/').rsplit('/').next()?;
    let mut chars = last.chars();
    let first = chars.next()?;
    Some(first.to_lowercase().chain(chars).collect())
}

/// `/c/en/ice_cream/n/...` → `ice_cream` when the language tag matches.
fn concept_word<'a>(uri: &'a str, language: &str) -> Option<&'a str> {
    let mut parts = uri.strip_prefix("/c/")?.split('/');
    if parts.next()? != language {
        return None;
    }
    parts.next().filter(|w| !w.is_empty())
}

/// Parses a ConceptNet 5 assertions dump (tab-separated: assertion URI,
/// relation URI, start URI, end URI, JSON metadata). Rows whose endpoints are
/// not both in `language` are dropped; malformed rows are counted and skipped.
pub fn parse_conceptnet<R: BufRead>(dump: R, language: &str) -> io::Result<(Vec<KgEdge>, ParseStats)> {
    let mut hasher = Sha256::new();
    let mut stats = ParseStats::default();
    let mut edges = Vec::new();
    let mut reader = dump;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        hasher.update(&buf);
        stats.rows += 1;
        let Ok(line) = std::str::from_utf8(&buf) else {
            stats.malformed += 1;
            continue;
        };
        let line = line.trim_end_matches(['\n', '\r']);
        if line.is_empty() {
            stats.rows -= 1;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 || !fields[1].starts_with("/r/") || !fields[2].starts_with("/c/") || !fields[3].starts_with("/c/") {
            stats.malformed += 1;
            continue;
        }
        let (Some(head), Some(tail)) = (concept_word(fields[2], language), concept_word(fields[3], language)) else {
            continue;
        };
        let Some(relation) = relation_name(fields[1]) else {
            stats.malformed += 1;
            continue;
        };
        stats.kept += 1;
        edges.push(KgEdge { head: head.to_string(), relation, tail: tail.to_string() });
    }
    if stats.malformed > 0 {
        log::warn!("skipped {} malformed ConceptNet rows", stats.malformed);
    }
    stats.sha256 = hex::encode(hasher.finalize());
    Ok((edges, stats))
}

/// Opens a dump file, transparently decompressing gzip input.
pub fn parse_conceptnet_file(path: &Path, language: &str) -> io::Result<(Vec<KgEdge>, ParseStats)> {
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = fs::File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        parse_conceptnet(BufReader::new(MultiGzDecoder::new(file)), language)
    } else {
        parse_conceptnet(BufReader::new(file), language)
    }
}

/// Ordered pairs `(head, tail)` annotated with one relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationPairSet {
    pub relation: String,
    pub pairs: Vec<OrderedPair>,
}

impl RelationPairSet {
    pub fn new(relation: impl Into<String>) -> Self {
        RelationPairSet { relation: relation.into(), pairs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (a, b) in &self.pairs {
            writeln!(w, "{a}\t{b}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R, relation: &str) -> io::Result<Self> {
        let mut set = RelationPairSet::new(relation);
        for line in r.lines() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split('\t');
            match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => set.pairs.push((a.to_string(), b.to_string())),
                _ => {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("bad pair row {line:?} in {relation}"),
                    ))
                }
            }
        }
        Ok(set)
    }
}

/// Builds `S(r)` for every relation.
///
/// Each pair with both words in `vocab` is added, once per distinct matching
/// edge, to the set of that edge's relation in head→tail order. Pairs with no
/// matching edge go to [`FALLBACK_RELATION`] in lexicographic order.
pub fn build_pair_sets<'a>(
    pairs: impl IntoIterator<Item = &'a WordPair>,
    edges: &[KgEdge],
    vocab: &HashSet<String>,
) -> Result<BTreeMap<String, RelationPairSet>, RelationError> {
    if vocab.is_empty() {
        return Err(RelationError::EmptyVocabulary);
    }
    let mut by_pair: HashMap<WordPair, BTreeSet<(String, String, String)>> = HashMap::new();
    for e in edges.iter().filter(|e| e.head != e.tail) {
        by_pair
            .entry(WordPair::new(e.head.as_str(), e.tail.as_str()))
            .or_default()
            .insert((e.relation.clone(), e.head.clone(), e.tail.clone()));
    }

    let mut sets: BTreeMap<String, RelationPairSet> = BTreeMap::new();
    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    for pair in pairs {
        if pair.is_self_pair() || !vocab.contains(pair.first()) || !vocab.contains(pair.second()) {
            continue;
        }
        match by_pair.get(pair) {
            Some(matches) => {
                for (rel, head, tail) in matches {
                    if seen.insert((rel.clone(), head.clone(), tail.clone())) {
                        sets.entry(rel.clone())
                            .or_insert_with(|| RelationPairSet::new(rel.as_str()))
                            .pairs
                            .push((head.clone(), tail.clone()));
                    }
                }
            }
            None => {
                let key = (FALLBACK_RELATION.to_string(), pair.first().to_string(), pair.second().to_string());
                if seen.insert(key) {
                    sets.entry(FALLBACK_RELATION.to_string())
                        .or_insert_with(|| RelationPairSet::new(FALLBACK_RELATION))
                        .pairs
                        .push(pair.canonical());
                }
            }
        }
    }
    Ok(sets)
}

/// Intersection of all vocabularies.
pub fn intersect_vocabularies(vocab_lists: &[HashSet<String>]) -> Result<HashSet<String>, RelationError> {
    let smallest = vocab_lists
        .iter()
        .min_by_key(|v| v.len())
        .ok_or(RelationError::NoVocabularies)?;
    Ok(smallest
        .iter()
        .filter(|w| vocab_lists.iter().all(|v| v.contains(w.as_str())))
        .cloned()
        .collect())
}
