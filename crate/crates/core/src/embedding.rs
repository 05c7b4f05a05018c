//! Static word vectors and the projection-softmax conditional `P_E(b|a)`.
//!
//! `proj(b|a) = emb(b)·emb(a) / ‖emb(a)‖`, normalized by a softmax over a
//! support vocabulary. The dual-space (`cxt`) variant takes `emb(a)` from the
//! word matrix and `emb(x)` for every predicted word from the context matrix.
//!
//! Dot products, norms and softmax denominators are evaluated in `f64` with
//! compensated summation whatever the storage scalar is.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, BufRead};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use thiserror::Error;

use crate::conditional::{ConditionalTable, TableError};
use crate::pair::WordPair;
use crate::scalar::{CompensatedSum, Real};

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("word {0:?} is not in the vector table")]
    AbsentWord(String),
    #[error("support set is empty")]
    EmptySupport,
    #[error("word {0:?} is not in the support set")]
    NotInSupport(String),
    #[error("word and context tables differ in dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Dense vectors, one per lowercased word, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable<T: Real> {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<T>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub header: Option<(usize, usize)>,
    pub rows: usize,
    pub duplicates: usize,
    pub zero_vectors: usize,
}

impl<T: Real> VectorTable<T> {
    /// Builds a table from `(word, vector)` rows. Panics on ragged input;
    /// use [`load_vectors`] for untrusted data.
    pub fn from_rows<S: AsRef<str>>(rows: impl IntoIterator<Item = (S, Vec<T>)>) -> Self {
        let mut table = VectorTable { dim: 0, words: Vec::new(), index: HashMap::new(), data: Vec::new() };
        for (w, v) in rows {
            if table.words.is_empty() {
                table.dim = v.len();
            }
            assert_eq!(v.len(), table.dim, "ragged vector rows");
            table.push(w.as_ref().to_lowercase(), v);
        }
        table
    }

    fn push(&mut self, word: String, v: Vec<T>) -> bool {
        if self.index.contains_key(&word) {
            return false;
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend(v);
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[T]> {
        let i = *self.index.get(word)?;
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    fn require(&self, word: &str) -> Result<&[T], VectorError> {
        self.get(word).ok_or_else(|| VectorError::AbsentWord(word.to_string()))
    }
}

fn dot<T: Real>(x: &[T], y: &[T]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.as_f64() * b.as_f64()).collect::<CompensatedSum>().value()
}

fn norm<T: Real>(x: &[T]) -> f64 {
    dot(x, x).sqrt()
}

/// Parses word2vec-text or GloVe-text vectors.
///
/// A first line of exactly two integers is treated as a `count dim` header.
/// Words are lowercased; the first occurrence of a duplicate wins. All-zero
/// vectors are dropped. Both are counted in the returned stats.
pub fn load_vectors<T: Real, R: BufRead>(source: R) -> Result<(VectorTable<T>, LoadStats), VectorError> {
    let mut stats = LoadStats::default();
    let mut table = VectorTable { dim: 0, words: Vec::new(), index: HashMap::new(), data: Vec::new() };
    let mut dim: Option<usize> = None;
    let mut first = true;
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if first {
            first = false;
            if rest.len() == 1 {
                if let (Ok(count), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                    if d == 0 {
                        return Err(VectorError::Parse { line: line_no, msg: "header declares dimension 0".into() });
                    }
                    stats.header = Some((count, d));
                    dim = Some(d);
                    continue;
                }
            }
        }
        let d = *dim.get_or_insert(rest.len());
        if rest.len() != d || d == 0 {
            return Err(VectorError::Parse {
                line: line_no,
                msg: format!("expected {d} components, found {}", rest.len()),
            });
        }
        let mut v = Vec::with_capacity(d);
        for f in rest {
            let x: T = f.parse().map_err(|_| VectorError::Parse {
                line: line_no,
                msg: format!("bad component {f:?}"),
            })?;
            if !x.is_finite() {
                return Err(VectorError::Parse { line: line_no, msg: format!("non-finite component {f:?}") });
            }
            v.push(x);
        }
        stats.rows += 1;
        if v.iter().all(|x| x.is_zero()) {
            stats.zero_vectors += 1;
            continue;
        }
        table.dim = d;
        if !table.push(word.to_lowercase(), v) {
            stats.duplicates += 1;
        }
    }
    if stats.duplicates > 0 || stats.zero_vectors > 0 {
        log::warn!("vector load: {} duplicate words, {} zero vectors skipped", stats.duplicates, stats.zero_vectors);
    }
    Ok((table, stats))
}

/// `emb(b)·emb(a) / ‖emb(a)‖`.
pub fn projection<T: Real>(t: &VectorTable<T>, b: &str, a: &str) -> Result<T, VectorError> {
    let va = t.require(a)?;
    let vb = t.require(b)?;
    Ok(T::from_f64_lossy(dot(vb, va) / norm(va)))
}

/// Cosine similarity, symmetric in its arguments.
pub fn cosine<T: Real>(t: &VectorTable<T>, a: &str, b: &str) -> Result<T, VectorError> {
    let va = t.require(a)?;
    let vb = t.require(b)?;
    Ok(T::from_f64_lossy(dot(va, vb) / (norm(va) * norm(vb))))
}

/// Word and context matrices for the dual-space conditional.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVectorTable<T: Real> {
    pub word_vectors: VectorTable<T>,
    pub context_vectors: VectorTable<T>,
}

impl<T: Real> DualVectorTable<T> {
    pub fn new(word_vectors: VectorTable<T>, context_vectors: VectorTable<T>) -> Result<Self, VectorError> {
        if word_vectors.dim() != context_vectors.dim() {
            return Err(VectorError::DimensionMismatch(word_vectors.dim(), context_vectors.dim()));
        }
        Ok(DualVectorTable { word_vectors, context_vectors })
    }
}

/// Where the conditioning and the predicted word vectors come from.
pub trait ProjectionSpace<T: Real>: Sync {
    /// Vector of the conditioning word `a`.
    fn cue(&self, word: &str) -> Option<&[T]>;
    /// Vector of a predicted word `x`.
    fn target(&self, word: &str) -> Option<&[T]>;
}

impl<T: Real> ProjectionSpace<T> for VectorTable<T> {
    fn cue(&self, word: &str) -> Option<&[T]> {
        self.get(word)
    }

    fn target(&self, word: &str) -> Option<&[T]> {
        self.get(word)
    }
}

impl<T: Real> ProjectionSpace<T> for DualVectorTable<T> {
    fn cue(&self, word: &str) -> Option<&[T]> {
        self.word_vectors.get(word)
    }

    fn target(&self, word: &str) -> Option<&[T]> {
        self.context_vectors.get(word)
    }
}

/// Projections `proj(x|a)` for every `x` in `support`, in `f64`.
fn support_projections<T: Real, S: ProjectionSpace<T> + ?Sized>(
    space: &S,
    a: &str,
    support: &[String],
) -> Result<Vec<f64>, VectorError> {
    let va = space.cue(a).ok_or_else(|| VectorError::AbsentWord(a.to_string()))?;
    let na = norm(va);
    support
        .iter()
        .map(|x| {
            let vx = space.target(x).ok_or_else(|| VectorError::AbsentWord(x.clone()))?;
            Ok(dot(vx, va) / na)
        })
        .collect()
}

/// Softmax normalizer for one cue: `max` and `Σ exp(proj - max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueNormalizer {
    pub max: f64,
    pub denominator: f64,
}

impl CueNormalizer {
    fn from_projections(projections: &[f64]) -> Self {
        let max = projections.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denominator = projections.iter().map(|p| (p - max).exp()).collect::<CompensatedSum>().value();
        CueNormalizer { max, denominator }
    }

    pub fn prob(&self, projection: f64) -> f64 {
        (projection - self.max).exp() / self.denominator
    }
}

/// `P_E(b|a)` by softmax over `support` (which must contain `b`).
pub fn conditional<T: Real, S: ProjectionSpace<T> + ?Sized>(
    space: &S,
    a: &str,
    b: &str,
    support: &[String],
) -> Result<T, VectorError> {
    if support.is_empty() {
        return Err(VectorError::EmptySupport);
    }
    let pos = support.iter().position(|x| x == b).ok_or_else(|| VectorError::NotInSupport(b.to_string()))?;
    let proj = support_projections(space, a, support)?;
    Ok(T::from_f64_lossy(CueNormalizer::from_projections(&proj).prob(proj[pos])))
}

/// Support vocabulary: every word of `pair_words` present on both sides of
/// the projection space, sorted.
pub fn resolve_support<T: Real, S: ProjectionSpace<T> + ?Sized>(
    space: &S,
    pair_words: impl IntoIterator<Item = String>,
) -> Vec<String> {
    let set: BTreeSet<String> = pair_words
        .into_iter()
        .filter(|w| space.cue(w).is_some() && space.target(w).is_some())
        .collect();
    set.into_iter().collect()
}

/// Conditional estimator with a fixed support and a per-cue cache of softmax
/// normalizers. The cache may be filled from many threads; concurrent fills
/// of the same cue compute the same value.
pub struct StaticConditionals<'s, T: Real, S: ProjectionSpace<T> + ?Sized> {
    space: &'s S,
    support: Vec<String>,
    support_index: HashMap<String, usize>,
    cache: RwLock<HashMap<String, Arc<CueNormalizer>>>,
    _scalar: std::marker::PhantomData<T>,
}

impl<'s, T: Real, S: ProjectionSpace<T> + ?Sized> StaticConditionals<'s, T, S> {
    pub fn new(space: &'s S, support: Vec<String>) -> Result<Self, VectorError> {
        if support.is_empty() {
            return Err(VectorError::EmptySupport);
        }
        for w in &support {
            if space.target(w).is_none() {
                return Err(VectorError::AbsentWord(w.clone()));
            }
        }
        let support_index = support.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(StaticConditionals {
            space,
            support,
            support_index,
            cache: RwLock::new(HashMap::new()),
            _scalar: std::marker::PhantomData,
        })
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn normalizer(&self, a: &str) -> Result<Arc<CueNormalizer>, VectorError> {
        if let Some(n) = self.cache.read().expect("cache lock").get(a) {
            return Ok(Arc::clone(n));
        }
        let proj = support_projections(self.space, a, &self.support)?;
        let n = Arc::new(CueNormalizer::from_projections(&proj));
        let mut cache = self.cache.write().expect("cache lock");
        Ok(Arc::clone(cache.entry(a.to_string()).or_insert(n)))
    }

    /// `P_E(b|a)` as `f64`.
    pub fn prob(&self, a: &str, b: &str) -> Result<f64, VectorError> {
        if !self.support_index.contains_key(b) {
            return Err(VectorError::NotInSupport(b.to_string()));
        }
        let va = self.space.cue(a).ok_or_else(|| VectorError::AbsentWord(a.to_string()))?;
        let vb = self.space.target(b).ok_or_else(|| VectorError::AbsentWord(b.to_string()))?;
        let proj = dot(vb, va) / norm(va);
        Ok(self.normalizer(a)?.prob(proj))
    }

    pub fn conditional(&self, a: &str, b: &str) -> Result<T, VectorError> {
        self.prob(a, b).map(T::from_f64_lossy)
    }

    /// Conditionals for both directions of every pair whose words are in the
    /// support. Pairs outside it are left absent. Probabilities that
    /// underflow are stored as `T::min_positive_value()`.
    pub fn table<'p>(
        &self,
        resource_id: &str,
        pairs: impl IntoIterator<Item = &'p WordPair>,
    ) -> Result<ConditionalTable<T>, VectorError> {
        let directed: Vec<(String, String)> = pairs
            .into_iter()
            .filter(|p| !p.is_self_pair() && self.support_index.contains_key(p.first()) && self.support_index.contains_key(p.second()))
            .flat_map(|p| {
                [(p.first().to_string(), p.second().to_string()), (p.second().to_string(), p.first().to_string())]
            })
            .collect();
        let probs: Vec<f64> = directed
            .par_iter()
            .map(|(a, b)| self.prob(a, b))
            .collect::<Result<_, _>>()?;
        let mut table = ConditionalTable::new(resource_id);
        for ((a, b), p) in directed.iter().zip(probs) {
            let p = T::from_f64_lossy(p).max(T::min_positive_value());
            table.insert(a, b, p)?;
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> VectorTable<f64> {
        VectorTable::from_rows([
            ("a", vec![3.0, 4.0]),
            ("b", vec![3.0, 4.0]),
            ("x", vec![1.0, 0.0]),
            ("y", vec![2.0, 2.0]),
            ("z", vec![0.0, 1.0]),
            ("m", vec![-1.0, 0.0]),
            ("w", vec![1.0, 1.0]),
        ])
    }

    #[test]
    fn header_is_detected() {
        let (t, stats) = load_vectors::<f64, _>("2 3\ncat 1 0 0\ndog 0 1 0\n".as_bytes()).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(stats.header, Some((2, 3)));
    }

    #[test]
    fn headerless_glove_rows() {
        let (t, stats) = load_vectors::<f32, _>("the 0.1 0.2\nCat 0.3 0.4\n".as_bytes()).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get("cat"), Some(&[0.3f32, 0.4][..]));
        assert_eq!(stats.header, None);
    }

    #[test]
    fn inconsistent_dimension_names_line() {
        let err = load_vectors::<f64, _>("a 1 2\nb 1 2 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, VectorError::Parse { line: 2, .. }));
    }

    #[test]
    fn non_finite_rejected() {
        let err = load_vectors::<f64, _>("a 1 NaN\n".as_bytes()).unwrap_err();
        assert!(matches!(err, VectorError::Parse { line: 1, .. }));
        let err = load_vectors::<f64, _>("a 1 inf\n".as_bytes()).unwrap_err();
        assert!(matches!(err, VectorError::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicates_and_zero_vectors_counted() {
        let (t, stats) = load_vectors::<f64, _>("a 1 2\nA 5 5\nz 0 0\n".as_bytes()).unwrap();
        assert_eq!(t.get("a"), Some(&[1.0, 2.0][..]));
        assert_eq!(stats.duplicates, 1);
        assert_eq!(stats.zero_vectors, 1);
        assert!(!t.contains("z"));
    }

    #[test]
    fn self_projection_is_norm() {
        assert_eq!(projection(&toy(), "b", "a").unwrap(), 5.0);
    }

    #[test]
    fn orthogonal_projection_is_zero() {
        assert_eq!(projection(&toy(), "z", "x").unwrap(), 0.0);
    }

    #[test]
    fn projection_hand_value() {
        assert_eq!(projection(&toy(), "y", "x").unwrap(), 2.0);
        assert!(projection(&toy(), "x", "y").unwrap() != 2.0);
    }

    #[test]
    fn missing_word_is_named() {
        match projection(&toy(), "nope", "x") {
            Err(VectorError::AbsentWord(w)) => assert_eq!(w, "nope"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cosine_values() {
        let t = toy();
        assert_eq!(cosine(&t, "a", "b").unwrap(), 1.0);
        assert_eq!(cosine(&t, "x", "m").unwrap(), -1.0);
        assert!((cosine(&t, "x", "w").unwrap() - 0.7071067811865475).abs() < 1e-12);
        assert_eq!(cosine(&t, "x", "y").unwrap(), cosine(&t, "y", "x").unwrap());
    }

    #[test]
    fn uniform_softmax() {
        // x and m are both orthogonal to z, so their projections tie at 0
        let t = toy();
        let support: Vec<String> = ["x", "m"].iter().map(|s| s.to_string()).collect();
        let p: f64 = conditional(&t, "z", "x", &support).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singleton_support() {
        let support = vec!["y".to_string()];
        assert_eq!(conditional::<f64, _>(&toy(), "x", "y", &support).unwrap(), 1.0);
    }

    #[test]
    fn support_errors() {
        let t = toy();
        assert!(matches!(conditional::<f64, _>(&t, "x", "y", &[]), Err(VectorError::EmptySupport)));
        assert!(matches!(
            conditional::<f64, _>(&t, "x", "y", &["z".to_string()]),
            Err(VectorError::NotInSupport(_))
        ));
    }

    #[test]
    fn cached_matches_direct() {
        let t = toy();
        let support: Vec<String> = t.words().to_vec();
        let est = StaticConditionals::new(&t, support.clone()).unwrap();
        for a in t.words() {
            let mut total = 0.0;
            for b in t.words() {
                let direct: f64 = conditional(&t, a, b, &support).unwrap();
                let cached: f64 = est.conditional(a, b).unwrap();
                assert!((direct - cached).abs() < 1e-15);
                total += cached;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_space_uses_context_rows() {
        let words = VectorTable::from_rows([("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]);
        let ctx = VectorTable::from_rows([("a", vec![0.0, 0.0 + 1.0]), ("b", vec![2.0, 0.0])]);
        let dual = DualVectorTable::new(words, ctx).unwrap();
        let support = vec!["a".to_string(), "b".to_string()];
        // proj(a|a) = ctx(a)·w(a) = 0, proj(b|a) = ctx(b)·w(a) = 2
        let p: f64 = conditional(&dual, "a", "b", &support).unwrap();
        let expected = 2f64.exp() / (1.0 + 2f64.exp());
        assert!((p - expected).abs() < 1e-15);
    }

    #[test]
    fn dual_dimension_mismatch() {
        let w = VectorTable::<f64>::from_rows([("a", vec![1.0])]);
        let c = VectorTable::<f64>::from_rows([("a", vec![1.0, 2.0])]);
        assert!(matches!(DualVectorTable::new(w, c), Err(VectorError::DimensionMismatch(1, 2))));
    }

    #[test]
    fn table_covers_both_directions() {
        let t = toy();
        let est = StaticConditionals::new(&t, t.words().to_vec()).unwrap();
        let pairs = [WordPair::new("x", "y"), WordPair::new("x", "nope")];
        let table = est.table("toy", &pairs).unwrap();
        assert_eq!(table.len(), 2);
        assert!(table.both("x", "y").is_some());
    }
}
