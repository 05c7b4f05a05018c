//! Bayesian estimate of `P_B(b|a)` from masked-LM predictions over
//! co-occurrence contexts.
//!
//! For a sampled context `c` the scorer predicts the masked word once per
//! occurrence; the per-context probability is the mean of those predictions.
//! Each context counts `k` times for `a` when `a` occurs `k` times in it, so
//!
//! ```text
//! P_B(b|a) = (P / n) * Σ_c k_a(c) * P_B(b|c) / |C(a)|
//! ```
//!
//! where `P` is the number of co-occurring paragraphs, `n` the sample size and
//! `|C(a)|` the occurrence-weighted context count of `a`.

mod run;
mod scorer;
pub mod wire;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::conditional::TableError;
use crate::corpus::ContextRecord;
use crate::scalar::sorted_sum;

pub use run::{
    emit_all_tasks, lm_conditional_table, pairs_from_sets, read_factor_log, write_factor_log, FactorRecord, LmRun,
    LmRunConfig, PairOutcome, DEFAULT_PROB_FLOOR,
};
pub use scorer::{ClosedFormMock, ConstantScorer, FileScorer, ProcessScorer, Scorer, ScorerError};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("no result for {} task(s): {}", .missing.len(), .missing.join(", "))]
    IncompleteBatch { missing: Vec<String> },
    #[error("scorer protocol error: {0}")]
    ScorerProtocol(String),
    #[error("scorer refused task {task_id}: {reason}")]
    Refused { task_id: String, reason: String },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("scorer channel failed after {attempts} attempt(s): {message}")]
    ScorerChannel { attempts: usize, message: String },
    #[error("checkpoint was written with config {found}, current config is {expected}")]
    StaleCheckpoint { expected: String, found: String },
    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which conditional a task feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// Mask an occurrence of `b`; feeds `P(b|a)`.
    BGivenA,
    /// Mask an occurrence of `a`; feeds `P(a|b)`.
    AGivenB,
}

impl Direction {
    fn tag(self) -> &'static str {
        match self {
            Direction::BGivenA => "ba",
            Direction::AGivenB => "ab",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// How occurrence-level predictions of the masked word combine per context.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OccurrenceAggregation {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoringTask {
    pub task_id: String,
    pub paragraph: u32,
    pub context_text: String,
    /// Character offset of the masked occurrence.
    pub mask_char_offset: usize,
    /// Length in characters of the masked occurrence.
    pub mask_char_len: usize,
    pub target_word: String,
    pub pair: (String, String),
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreOutcome {
    Prob(f64),
    Refused(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreResult {
    pub task_id: String,
    pub outcome: ScoreOutcome,
    pub model_id: String,
}

/// Population and sample size of the contexts behind one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleInfo {
    pub population: usize,
    pub sample_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEstimate {
    pub pair: (String, String),
    pub p_b_given_a: f64,
    pub p_a_given_b: f64,
    pub n_contexts_used: usize,
    pub population: usize,
    pub sum_weight_a: usize,
    pub sum_weight_b: usize,
    pub total_count_a: usize,
    pub total_count_b: usize,
    /// `Σ_c k_a(c) * P_B(b|c)` over the sample.
    pub weighted_sum_ba: f64,
    /// `Σ_c k_b(c) * P_B(a|c)` over the sample.
    pub weighted_sum_ab: f64,
    pub mean_char_distance: f64,
}

pub fn task_id(pair: (&str, &str), paragraph: u32, offset: usize, direction: Direction) -> String {
    format!("{}|{}|{paragraph}|{offset}|{}", pair.0, pair.1, direction.tag())
}

/// One task per occurrence of `b` (direction b-given-a) and one per
/// occurrence of `a` (a-given-b) in every context.
pub fn emit_tasks(contexts: &[ContextRecord<'_>], pair: (&str, &str)) -> Vec<ScoringTask> {
    let (a, b) = pair;
    let mut tasks = Vec::new();
    for ctx in contexts {
        for (dir, target, offsets) in [(Direction::BGivenA, b, &ctx.b_offsets), (Direction::AGivenB, a, &ctx.a_offsets)] {
            for &off in offsets {
                tasks.push(ScoringTask {
                    task_id: task_id(pair, ctx.paragraph, off as usize, dir),
                    paragraph: ctx.paragraph,
                    context_text: ctx.text.to_string(),
                    mask_char_offset: off as usize,
                    mask_char_len: target.chars().count(),
                    target_word: target.to_string(),
                    pair: (a.to_string(), b.to_string()),
                    direction: dir,
                });
            }
        }
    }
    tasks
}

#[derive(Default)]
struct ContextAcc {
    b_probs: Vec<f64>,
    a_probs: Vec<f64>,
    a_offsets: BTreeSet<usize>,
    b_offsets: BTreeSet<usize>,
}

fn combine(probs: &mut [f64], mode: OccurrenceAggregation) -> f64 {
    let n = probs.len();
    let s = sorted_sum(probs);
    match mode {
        OccurrenceAggregation::Mean => s / n as f64,
        OccurrenceAggregation::Sum => s,
    }
}

/// Combines scorer results into both directional estimates for one pair.
///
/// Every task needs exactly one result. The result does not depend on the
/// order of `results` or `tasks`.
pub fn aggregate(
    results: &[ScoreResult],
    tasks: &[ScoringTask],
    counts: (usize, usize),
    sample: SampleInfo,
    mode: OccurrenceAggregation,
) -> Result<PairEstimate, LmError> {
    let SampleInfo { population, sample_size } = sample;
    if sample_size == 0 || population < sample_size {
        return Err(LmError::InvalidSample(format!("need P >= n >= 1, got P={population}, n={sample_size}")));
    }
    let Some(first) = tasks.first() else {
        return Err(LmError::InvalidSample("no tasks".into()));
    };
    let pair = first.pair.clone();

    let mut by_id: HashMap<&str, &ScoreResult> = HashMap::with_capacity(results.len());
    for r in results {
        if by_id.insert(r.task_id.as_str(), r).is_some() {
            return Err(LmError::ScorerProtocol(format!("duplicate result for {}", r.task_id)));
        }
    }
    let mut missing: Vec<String> = tasks.iter().filter(|t| !by_id.contains_key(t.task_id.as_str())).map(|t| t.task_id.clone()).collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(LmError::IncompleteBatch { missing });
    }

    let mut contexts: BTreeMap<u32, ContextAcc> = BTreeMap::new();
    for t in tasks {
        if t.pair != pair {
            return Err(LmError::InvalidSample(format!("task {} belongs to another pair", t.task_id)));
        }
        let r = by_id[t.task_id.as_str()];
        let p = match &r.outcome {
            ScoreOutcome::Prob(p) if p.is_finite() && (0.0..=1.0).contains(p) => *p,
            ScoreOutcome::Prob(p) => {
                return Err(LmError::ScorerProtocol(format!("probability {p} for {} is outside [0, 1]", t.task_id)))
            }
            ScoreOutcome::Refused(reason) => {
                return Err(LmError::Refused { task_id: t.task_id.clone(), reason: reason.clone() })
            }
        };
        let acc = contexts.entry(t.paragraph).or_default();
        match t.direction {
            Direction::BGivenA => {
                acc.b_probs.push(p);
                acc.b_offsets.insert(t.mask_char_offset);
            }
            Direction::AGivenB => {
                acc.a_probs.push(p);
                acc.a_offsets.insert(t.mask_char_offset);
            }
        }
    }
    if contexts.len() != sample_size {
        return Err(LmError::InvalidSample(format!("tasks cover {} contexts, sample size is {sample_size}", contexts.len())));
    }

    let (count_a, count_b) = counts;
    let mut terms_ba = Vec::with_capacity(contexts.len());
    let mut terms_ab = Vec::with_capacity(contexts.len());
    let mut distances = Vec::with_capacity(contexts.len());
    let (mut sum_weight_a, mut sum_weight_b) = (0, 0);
    for (para, acc) in contexts.iter_mut() {
        if acc.a_probs.is_empty() || acc.b_probs.is_empty() {
            return Err(LmError::InvalidSample(format!("context {para} lacks tasks for one direction")));
        }
        let (wa, wb) = (acc.a_offsets.len(), acc.b_offsets.len());
        sum_weight_a += wa;
        sum_weight_b += wb;
        terms_ba.push(wa as f64 * combine(&mut acc.b_probs, mode));
        terms_ab.push(wb as f64 * combine(&mut acc.a_probs, mode));
        let d = acc
            .a_offsets
            .iter()
            .flat_map(|&x| acc.b_offsets.iter().map(move |&y| x.abs_diff(y)))
            .min()
            .unwrap_or(0);
        distances.push(d as f64);
    }
    if count_a < sum_weight_a || count_b < sum_weight_b {
        return Err(LmError::InvalidSample(format!(
            "context counts ({count_a}, {count_b}) are below the sampled weights ({sum_weight_a}, {sum_weight_b})"
        )));
    }
    let scale = population as f64 / sample_size as f64;
    let weighted_sum_ba = sorted_sum(&mut terms_ba);
    let weighted_sum_ab = sorted_sum(&mut terms_ab);
    let n = contexts.len();
    Ok(PairEstimate {
        pair,
        p_b_given_a: (scale * weighted_sum_ba / count_a as f64).min(1.0),
        p_a_given_b: (scale * weighted_sum_ab / count_b as f64).min(1.0),
        n_contexts_used: n,
        population,
        sum_weight_a,
        sum_weight_b,
        total_count_a: count_a,
        total_count_b: count_b,
        weighted_sum_ba,
        weighted_sum_ab,
        mean_char_distance: sorted_sum(&mut distances) / n as f64,
    })
}
