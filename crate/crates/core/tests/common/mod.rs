//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

// ---------------------------------------------------------------- rationals

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact value of a finite `f64`.
pub fn rat_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Average 1-based ranks with ties sharing the mean of their positions.
pub fn exact_ranks<K: Ord>(keys: &[K]) -> Vec<BigRational> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&i, &j| keys[i].cmp(&keys[j]));
    let mut ranks = vec![BigRational::zero(); keys.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && keys[idx[j + 1]] == keys[idx[i]] {
            j += 1;
        }
        // positions i+1 ..= j+1
        let r = rat((i + j + 2) as i64, 2);
        for &k in &idx[i..=j] {
            ranks[k] = r.clone();
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho from exact average ranks. Returns `None` when either side
/// is constant. Only the final square root is inexact.
pub fn exact_spearman<K: Ord, L: Ord>(x: &[K], y: &[L]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (exact_ranks(x), exact_ranks(y));
    let n = rat(x.len() as i64, 1);
    let mean = |v: &[BigRational]| v.iter().fold(BigRational::zero(), |a, b| a + b) / n.clone();
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut cov = BigRational::zero();
    let mut vx = BigRational::zero();
    let mut vy = BigRational::zero();
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - &mx, b - &my);
        cov += &da * &db;
        vx += &da * &da;
        vy += &db * &db;
    }
    if vx.is_zero() || vy.is_zero() {
        return None;
    }
    let r2 = (&cov * &cov) / (vx * vy);
    let mag = r2.to_f64().unwrap().sqrt();
    Some(if cov.is_negative() { -mag } else { mag })
}

/// Closed form for untied data: 1 - 6 Σd² / (n(n² - 1)).
pub fn exact_spearman_untied(perm: &[usize]) -> BigRational {
    let n = perm.len() as i64;
    let d2: i64 = perm.iter().enumerate().map(|(i, &p)| (i as i64 - p as i64).pow(2)).sum();
    BigRational::one() - rat(6 * d2, n * (n * n - 1))
}

// --------------------------------------------------------------- fixed point

/// Binary fixed point with `FRAC` fractional bits on big integers.
pub const FRAC: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fixed(pub BigInt);

impl Fixed {
    pub fn from_f64(x: f64) -> Fixed {
        let r = rat_f64(x);
        Fixed((r.numer() << FRAC) / r.denom())
    }

    pub fn from_int(i: i64) -> Fixed {
        Fixed(BigInt::from(i) << FRAC)
    }

    pub fn add(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 + &o.0)
    }

    pub fn mul(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 * &o.0) >> FRAC)
    }

    pub fn div(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 << FRAC) / &o.0)
    }

    pub fn sqrt(&self) -> Fixed {
        assert!(self.0.sign() != Sign::Minus);
        Fixed((&self.0 << FRAC).sqrt())
    }

    /// Taylor series after halving the argument 32 times, then squaring back.
    pub fn exp(&self) -> Fixed {
        const HALVINGS: usize = 32;
        let y = Fixed(&self.0 >> HALVINGS);
        let mut term = Fixed::from_int(1);
        let mut sum = term.clone();
        for k in 1..30 {
            term = Fixed(term.mul(&y).0 / k);
            sum = sum.add(&term);
        }
        for _ in 0..HALVINGS {
            sum = sum.mul(&sum);
        }
        sum
    }

    pub fn to_f64(&self) -> f64 {
        BigRational::new(self.0.clone(), BigInt::one() << FRAC).to_f64().unwrap()
    }
}

fn fixed_dot(x: &[f64], y: &[f64]) -> Fixed {
    x.iter().zip(y).fold(Fixed::from_int(0), |acc, (a, b)| acc.add(&Fixed::from_f64(*a).mul(&Fixed::from_f64(*b))))
}

/// Softmax conditional `P(b | a)` over `support`, where the cue vector is
/// `cue[a]` and candidates use `target[x]`.
pub fn fixed_softmax(cue: &[f64], targets: &[&[f64]], b: usize) -> f64 {
    let norm = fixed_dot(cue, cue).sqrt();
    let exps: Vec<Fixed> = targets.iter().map(|t| fixed_dot(t, cue).div(&norm).exp()).collect();
    let total = exps.iter().fold(Fixed::from_int(0), |a, e| a.add(e));
    exps[b].div(&total).to_f64()
}

// ------------------------------------------------------------ corpus oracle

pub fn is_joiner(c: char) -> bool {
    c == '\'' || c == '\u{2019}' || c == '-'
}

/// `(char offset, lowercased token)` for every token: maximal runs of
/// alphanumerics and joiners, trimmed of joiners at both ends.
pub fn scan_tokens(text: &str) -> Vec<(usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !(chars[i].is_alphanumeric() || is_joiner(chars[i])) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && (chars[j].is_alphanumeric() || is_joiner(chars[j])) {
            j += 1;
        }
        let (mut lo, mut hi) = (i, j);
        while lo < hi && is_joiner(chars[lo]) {
            lo += 1;
        }
        while hi > lo && is_joiner(chars[hi - 1]) {
            hi -= 1;
        }
        if lo < hi {
            out.push((lo, chars[lo..hi].iter().collect::<String>().to_lowercase()));
        }
        i = j;
    }
    out
}

/// Blank-line paragraphs of the bundled corpus, trimmed.
pub fn scan_paragraphs(text: &str) -> Vec<String> {
    text.split("\n\n").map(str::trim).filter(|p| !p.is_empty()).map(str::to_string).collect()
}

pub struct ScannedCorpus {
    pub paragraphs: Vec<String>,
    pub tokens: Vec<Vec<(usize, String)>>,
}

impl ScannedCorpus {
    pub fn new(text: &str) -> Self {
        let paragraphs = scan_paragraphs(text);
        let tokens = paragraphs.iter().map(|p| scan_tokens(p)).collect();
        ScannedCorpus { paragraphs, tokens }
    }

    pub fn offsets(&self, para: usize, word: &str) -> Vec<u32> {
        self.tokens[para].iter().filter(|(_, t)| t == word).map(|(o, _)| *o as u32).collect()
    }

    pub fn count(&self, word: &str) -> usize {
        self.tokens.iter().map(|ts| ts.iter().filter(|(_, t)| t == word).count()).sum()
    }

    pub fn cooccurring(&self, a: &str, b: &str) -> Vec<usize> {
        (0..self.paragraphs.len())
            .filter(|&p| !self.offsets(p, a).is_empty() && !self.offsets(p, b).is_empty())
            .collect()
    }

    pub fn frequencies(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for ts in &self.tokens {
            for (_, t) in ts {
                *m.entry(t.clone()).or_insert(0) += 1;
            }
        }
        m
    }
}

pub fn brute_min_distance(xs: &[u32], ys: &[u32]) -> u32 {
    xs.iter().flat_map(|x| ys.iter().map(move |y| x.abs_diff(*y))).min().unwrap()
}

// ---------------------------------------------------------- evocation oracle

/// Raw counts read line by line: `(cue, response) -> count` and cue totals.
pub struct RawEvocation {
    pub counts: BTreeMap<(String, String), i64>,
    pub totals: BTreeMap<String, i64>,
}

impl RawEvocation {
    pub fn parse(text: &str) -> Self {
        let mut counts = BTreeMap::new();
        let mut totals = BTreeMap::new();
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            let n: i64 = f[2].parse().unwrap();
            *counts.entry((f[0].to_lowercase(), f[1].to_lowercase())).or_insert(0) += n;
            *totals.entry(f[0].to_lowercase()).or_insert(0) += n;
        }
        RawEvocation { counts, totals }
    }

    /// Unordered pairs seen in both directions, lexicographically ordered.
    pub fn clean_pairs(&self) -> BTreeSet<(String, String)> {
        self.counts
            .keys()
            .filter(|(a, b)| a < b && self.counts.contains_key(&(b.clone(), a.clone())))
            .cloned()
            .collect()
    }

    /// `P(b|a) / P(a|b)` exactly.
    pub fn ratio(&self, a: &str, b: &str) -> BigRational {
        let p = |x: &str, y: &str| rat(self.counts[&(x.to_string(), y.to_string())], self.totals[x]);
        p(a, b) / p(b, a)
    }

    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.counts.keys().flat_map(|(a, b)| [a.clone(), b.clone()]).collect()
    }
}

/// `(head, relation, tail)` of English edges in a ConceptNet-style dump.
pub fn raw_edges(text: &str) -> BTreeSet<(String, String, String)> {
    let word = |uri: &str| -> Option<String> {
        let parts: Vec<&str> = uri.split('/').collect();
        (parts.len() >= 4 && parts[1] == "c" && parts[2] == "en").then(|| parts[3].to_string())
    };
    let mut out = BTreeSet::new();
    for line in text.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 4 || !f[1].starts_with("/r/") {
            continue;
        }
        if let (Some(h), Some(t)) = (word(f[2]), word(f[3])) {
            let r = &f[1][3..];
            let rel = r[..1].to_lowercase() + &r[1..];
            out.insert((h, rel, t));
        }
    }
    out
}
