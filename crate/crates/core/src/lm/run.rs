use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, Read, Write};
use std::path::PathBuf;

use log::{info, warn};

use super::{aggregate, emit_tasks, LmError, OccurrenceAggregation, PairEstimate, SampleInfo, Scorer, ScorerError, ScoringTask};
use crate::conditional::ConditionalTable;
use crate::corpus::{ParagraphStore, DEFAULT_CONTEXT_CAP};
use crate::pair::WordPair;
use crate::relations::RelationPairSet;
use crate::scalar::fmt_sig17;

pub const DEFAULT_PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LmRunConfig {
    pub resource_id: String,
    pub cap: usize,
    pub seed: u64,
    /// Estimates below this are stored as the floor.
    pub floor: f64,
    /// Extra attempts after a scorer channel failure.
    pub retries: usize,
    pub mode: OccurrenceAggregation,
    /// Identifies the configuration a checkpoint belongs to.
    pub run_key: String,
    pub checkpoint: Option<PathBuf>,
}

impl Default for LmRunConfig {
    fn default() -> Self {
        LmRunConfig {
            resource_id: "lm".into(),
            cap: DEFAULT_CONTEXT_CAP,
            seed: 0,
            floor: DEFAULT_PROB_FLOOR,
            retries: 2,
            mode: OccurrenceAggregation::Mean,
            run_key: String::new(),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    Estimated(PairEstimate),
    /// The words never share a paragraph.
    Absent,
    /// The scorer refused a task; the pair is left out of the table.
    Refused { task_id: String, reason: String },
}

/// Per-pair factors used for the binned analysis. `mean_char_distance` is
/// `None` for absent pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorRecord {
    pub a: String,
    pub b: String,
    pub population: usize,
    pub n_used: usize,
    pub mean_char_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LmRun {
    pub table: ConditionalTable<f64>,
    pub factors: Vec<FactorRecord>,
    pub outcomes: Vec<(WordPair, PairOutcome)>,
}

impl LmRun {
    pub fn refused(&self) -> impl Iterator<Item = (&WordPair, &str)> {
        self.outcomes.iter().filter_map(|(p, o)| match o {
            PairOutcome::Refused { reason, .. } => Some((p, reason.as_str())),
            _ => None,
        })
    }
}

/// Distinct unordered pairs across all sets, in first-seen order.
pub fn pairs_from_sets<'a>(sets: impl IntoIterator<Item = &'a RelationPairSet>) -> Vec<WordPair> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for set in sets {
        for (a, b) in &set.pairs {
            let p = WordPair::new(a.as_str(), b.as_str());
            if !p.is_self_pair() && seen.insert(p.clone()) {
                out.push(p);
            }
        }
    }
    out
}

/// Every scoring task a run over `pairs` would issue, for offline scoring.
pub fn emit_all_tasks(pairs: &[WordPair], store: &ParagraphStore, cap: usize, seed: u64) -> Vec<ScoringTask> {
    let mut out = Vec::new();
    for p in pairs {
        let ctx = store.contexts_for_pair(p.first(), p.second(), cap, seed);
        out.extend(emit_tasks(&ctx.records, (p.first(), p.second())));
    }
    out
}

fn score_with_retries(scorer: &mut dyn Scorer, tasks: &[ScoringTask], retries: usize) -> Result<Vec<super::ScoreResult>, LmError> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match scorer.score(tasks) {
            Ok(r) => return Ok(r),
            Err(ScorerError::Protocol(m)) => return Err(LmError::ScorerProtocol(m)),
            Err(ScorerError::Channel(m)) if attempt > retries => {
                return Err(LmError::ScorerChannel { attempts: attempt, message: m })
            }
            Err(ScorerError::Channel(m)) => warn!("scorer attempt {attempt} failed: {m}; retrying"),
        }
    }
}

fn estimate_pair(
    pair: &WordPair,
    store: &ParagraphStore,
    scorer: &mut dyn Scorer,
    cfg: &LmRunConfig,
) -> Result<PairOutcome, LmError> {
    let (a, b) = (pair.first(), pair.second());
    let ctx = store.contexts_for_pair(a, b, cfg.cap, cfg.seed);
    if ctx.population == 0 {
        return Ok(PairOutcome::Absent);
    }
    let tasks = emit_tasks(&ctx.records, (a, b));
    let results = score_with_retries(scorer, &tasks, cfg.retries)?;
    let sample = SampleInfo { population: ctx.population, sample_size: ctx.records.len() };
    let counts = (store.context_count(a), store.context_count(b));
    match aggregate(&results, &tasks, counts, sample, cfg.mode) {
        Ok(est) => Ok(PairOutcome::Estimated(est)),
        Err(LmError::Refused { task_id, reason }) => Ok(PairOutcome::Refused { task_id, reason }),
        Err(e) => Err(e),
    }
}

/// Estimates both conditionals for every pair.
///
/// With a checkpoint path, every finished pair is appended and synced before
/// the next one starts; a rerun with the same `run_key` skips recorded pairs
/// and yields the same table as an uninterrupted run.
pub fn lm_conditional_table(
    pairs: &[WordPair],
    store: &ParagraphStore,
    scorer: &mut dyn Scorer,
    cfg: &LmRunConfig,
) -> Result<LmRun, LmError> {
    let mut checkpoint = match &cfg.checkpoint {
        Some(path) => Some(Checkpoint::open(path.clone(), &cfg.run_key)?),
        None => None,
    };
    let mut outcomes = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let key = (pair.first().to_string(), pair.second().to_string());
        let recorded = checkpoint.as_mut().and_then(|c| c.done.remove(&key));
        let outcome = match recorded {
            Some(o) => o,
            None => {
                let o = estimate_pair(pair, store, scorer, cfg)?;
                if let Some(c) = checkpoint.as_mut() {
                    c.append(pair, &o)?;
                }
                o
            }
        };
        if (i + 1) % 100 == 0 {
            info!("{}: {} of {} pairs", cfg.resource_id, i + 1, pairs.len());
        }
        outcomes.push((pair.clone(), outcome));
    }

    let mut table = ConditionalTable::new(cfg.resource_id.clone());
    let mut factors = Vec::new();
    for (pair, outcome) in &outcomes {
        let (a, b) = (pair.first(), pair.second());
        match outcome {
            PairOutcome::Estimated(e) => {
                table.insert(a, b, e.p_b_given_a.max(cfg.floor))?;
                table.insert(b, a, e.p_a_given_b.max(cfg.floor))?;
                factors.push(FactorRecord {
                    a: a.into(),
                    b: b.into(),
                    population: e.population,
                    n_used: e.n_contexts_used,
                    mean_char_distance: Some(e.mean_char_distance),
                });
            }
            PairOutcome::Absent => factors.push(FactorRecord {
                a: a.into(),
                b: b.into(),
                population: 0,
                n_used: 0,
                mean_char_distance: None,
            }),
            PairOutcome::Refused { task_id, reason } => warn!("dropping ({a}, {b}): {task_id} refused ({reason})"),
        }
    }
    Ok(LmRun { table, factors, outcomes })
}

const FACTOR_COLUMNS: &str = "a\tb\tpopulation\tn_used\tmean_char_distance";

pub fn write_factor_log<W: Write>(mut w: W, factors: &[FactorRecord], header: &[String]) -> io::Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    writeln!(w, "{FACTOR_COLUMNS}")?;
    for f in factors {
        let d = f.mean_char_distance.map_or_else(|| "NA".to_string(), fmt_sig17);
        writeln!(w, "{}\t{}\t{}\t{}\t{d}", f.a, f.b, f.population, f.n_used)?;
    }
    w.flush()
}

pub fn read_factor_log<R: BufRead>(r: R) -> Result<Vec<FactorRecord>, LmError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line == FACTOR_COLUMNS || line.is_empty() {
            continue;
        }
        let bad = |msg: String| LmError::Checkpoint { line: i + 1, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
        let mean_char_distance = match f[4] {
            "NA" => None,
            s => Some(s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")))?),
        };
        out.push(FactorRecord {
            a: f[0].into(),
            b: f[1].into(),
            population: num(f[2])?,
            n_used: num(f[3])?,
            mean_char_distance,
        });
    }
    Ok(out)
}

struct Checkpoint {
    file: File,
    done: HashMap<(String, String), PairOutcome>,
}

const CHECKPOINT_KEY: &str = "# config_hash=";

impl Checkpoint {
    fn open(path: PathBuf, run_key: &str) -> Result<Self, LmError> {
        let mut done = HashMap::new();
        if path.exists() {
            let mut raw = String::new();
            File::open(&path)?.read_to_string(&mut raw)?;
            // A crash can leave a partial last line; keep complete lines only.
            let complete = raw.rfind('\n').map_or(0, |i| i + 1);
            let mut lines = raw[..complete].lines();
            let found = lines.next().and_then(|l| l.strip_prefix(CHECKPOINT_KEY)).unwrap_or("");
            if found != run_key {
                return Err(LmError::StaleCheckpoint { expected: run_key.into(), found: found.into() });
            }
            for (i, line) in lines.enumerate() {
                let (pair, outcome) = parse_row(line).map_err(|msg| LmError::Checkpoint { line: i + 2, msg })?;
                done.insert(pair, outcome);
            }
            let file = OpenOptions::new().write(true).open(&path)?;
            file.set_len(complete as u64)?;
            drop(file);
            let file = OpenOptions::new().append(true).open(&path)?;
            info!("resuming from {} with {} finished pairs", path.display(), done.len());
            Ok(Checkpoint { file, done })
        } else {
            let mut file = OpenOptions::new().create_new(true).append(true).open(&path)?;
            writeln!(file, "{CHECKPOINT_KEY}{run_key}")?;
            file.sync_data()?;
            Ok(Checkpoint { file, done })
        }
    }

    fn append(&mut self, pair: &WordPair, o: &PairOutcome) -> Result<(), LmError> {
        let (a, b) = (pair.first(), pair.second());
        let row = match o {
            PairOutcome::Absent => format!("absent\t{a}\t{b}\n"),
            PairOutcome::Refused { task_id, reason } => format!("refused\t{a}\t{b}\t{task_id}\t{reason}\n"),
            PairOutcome::Estimated(e) => format!(
                "ok\t{a}\t{b}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                fmt_sig17(e.p_b_given_a),
                fmt_sig17(e.p_a_given_b),
                e.n_contexts_used,
                e.population,
                e.sum_weight_a,
                e.sum_weight_b,
                e.total_count_a,
                e.total_count_b,
                fmt_sig17(e.weighted_sum_ba),
                fmt_sig17(e.weighted_sum_ab),
                fmt_sig17(e.mean_char_distance),
            ),
        };
        self.file.write_all(row.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}

fn parse_row(line: &str) -> Result<((String, String), PairOutcome), String> {
    let f: Vec<&str> = line.split('\t').collect();
    let pair = match (f.get(1), f.get(2)) {
        (Some(a), Some(b)) => (a.to_string(), b.to_string()),
        _ => return Err("missing pair".into()),
    };
    let int = |i: usize| f[i].parse::<usize>().map_err(|e| format!("field {i}: {e}"));
    let real = |i: usize| f[i].parse::<f64>().map_err(|e| format!("field {i}: {e}"));
    let outcome = match (f[0], f.len()) {
        ("absent", 3) => PairOutcome::Absent,
        ("refused", 5) => PairOutcome::Refused { task_id: f[3].into(), reason: f[4].into() },
        ("ok", 14) => PairOutcome::Estimated(PairEstimate {
            pair: pair.clone(),
            p_b_given_a: real(3)?,
            p_a_given_b: real(4)?,
            n_contexts_used: int(5)?,
            population: int(6)?,
            sum_weight_a: int(7)?,
            sum_weight_b: int(8)?,
            total_count_a: int(9)?,
            total_count_b: int(10)?,
            weighted_sum_ba: real(11)?,
            weighted_sum_ab: real(12)?,
            mean_char_distance: real(13)?,
        }),
        (tag, n) => return Err(format!("unexpected row kind {tag:?} with {n} fields")),
    };
    Ok((pair, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_index, Document, IndexConfig};
    use crate::lm::{ClosedFormMock, ConstantScorer, ScoreOutcome, ScoreResult};

    fn store() -> ParagraphStore {
        let text = "dog and cat.\n\ncat sat on dog mat.\n\nthe dog barked.\n\nfish swim.\n\ncat cat dog";
        build_index(vec![Document { id: "d".into(), bytes: text.as_bytes().to_vec() }], &IndexConfig::default())
    }

    fn pairs() -> Vec<WordPair> {
        vec![WordPair::new("dog", "cat"), WordPair::new("fish", "dog"), WordPair::new("mat", "cat")]
    }

    #[test]
    fn absent_pairs_only_in_factor_log() {
        let run = lm_conditional_table(&pairs(), &store(), &mut ClosedFormMock, &LmRunConfig::default()).unwrap();
        assert!(run.table.get("dog", "fish").is_none());
        let f = run.factors.iter().find(|f| f.a == "dog" && f.b == "fish").unwrap();
        assert_eq!((f.population, f.mean_char_distance), (0, None));
        assert_eq!(run.table.len(), 4);
    }

    #[test]
    fn constant_scorer_closed_form() {
        let s = store();
        let q = 0.2;
        let run = lm_conditional_table(&pairs(), &s, &mut ConstantScorer(q), &LmRunConfig::default()).unwrap();
        // cat/dog share paragraphs 0, 1, 4; cat weights 1, 1, 2 and dog weights 1, 1, 1
        let expected = q * 4.0 / s.context_count("cat") as f64;
        assert!((run.table.get("cat", "dog").unwrap() - expected).abs() < 1e-15);
        let expected_rev = q * 3.0 / s.context_count("dog") as f64;
        assert!((run.table.get("dog", "cat").unwrap() - expected_rev).abs() < 1e-15);
    }

    #[test]
    fn floor_applies() {
        let run = lm_conditional_table(&pairs(), &store(), &mut ConstantScorer(0.0), &LmRunConfig::default()).unwrap();
        assert_eq!(run.table.get("cat", "dog"), Some(DEFAULT_PROB_FLOOR));
    }

    struct Refuser;
    impl Scorer for Refuser {
        fn model_id(&self) -> &str {
            "r"
        }
        fn score(&mut self, tasks: &[ScoringTask]) -> Result<Vec<ScoreResult>, ScorerError> {
            Ok(tasks
                .iter()
                .map(|t| ScoreResult {
                    task_id: t.task_id.clone(),
                    outcome: if t.target_word == "mat" {
                        ScoreOutcome::Refused("multi-token-target".into())
                    } else {
                        ScoreOutcome::Prob(0.5)
                    },
                    model_id: "r".into(),
                })
                .collect())
        }
    }

    #[test]
    fn refusal_drops_pair() {
        let run = lm_conditional_table(&pairs(), &store(), &mut Refuser, &LmRunConfig::default()).unwrap();
        assert!(run.table.get("cat", "mat").is_none());
        assert!(run.table.get("cat", "dog").is_some());
        assert_eq!(run.refused().count(), 1);
    }

    struct Flaky {
        fail_left: usize,
    }
    impl Scorer for Flaky {
        fn model_id(&self) -> &str {
            "flaky"
        }
        fn score(&mut self, tasks: &[ScoringTask]) -> Result<Vec<ScoreResult>, ScorerError> {
            if self.fail_left > 0 {
                self.fail_left -= 1;
                return Err(ScorerError::Channel("broken pipe".into()));
            }
            ClosedFormMock.score(tasks)
        }
    }

    #[test]
    fn retries_then_gives_up() {
        let cfg = LmRunConfig { retries: 2, ..Default::default() };
        assert!(lm_conditional_table(&pairs(), &store(), &mut Flaky { fail_left: 2 }, &cfg).is_ok());
        match lm_conditional_table(&pairs(), &store(), &mut Flaky { fail_left: 3 }, &cfg) {
            Err(LmError::ScorerChannel { attempts: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn checkpoint_resume_matches_and_rejects_stale() {
        let dir = tempfile::tempdir().unwrap();
        let s = store();
        let full = lm_conditional_table(&pairs(), &s, &mut ClosedFormMock, &LmRunConfig::default()).unwrap();

        let path = dir.path().join("ck.tsv");
        let cfg = LmRunConfig { checkpoint: Some(path.clone()), run_key: "k1".into(), retries: 0, ..Default::default() };
        // first pair succeeds, second is absent (no scoring), third fails
        struct OneShot(usize);
        impl Scorer for OneShot {
            fn model_id(&self) -> &str {
                "o"
            }
            fn score(&mut self, t: &[ScoringTask]) -> Result<Vec<ScoreResult>, ScorerError> {
                if self.0 == 0 {
                    return Err(ScorerError::Channel("down".into()));
                }
                self.0 -= 1;
                ClosedFormMock.score(t)
            }
        }
        assert!(lm_conditional_table(&pairs(), &s, &mut OneShot(1), &cfg).is_err());
        // simulate a torn write
        OpenOptions::new().append(true).open(&path).unwrap().write_all(b"ok\tcat\tm").unwrap();
        let resumed = lm_conditional_table(&pairs(), &s, &mut ClosedFormMock, &cfg).unwrap();
        assert_eq!(resumed.table, full.table);
        assert_eq!(resumed.factors, full.factors);

        let stale = LmRunConfig { run_key: "k2".into(), ..cfg };
        assert!(matches!(
            lm_conditional_table(&pairs(), &s, &mut ClosedFormMock, &stale),
            Err(LmError::StaleCheckpoint { .. })
        ));
    }

    #[test]
    fn factor_log_round_trip() {
        let run = lm_conditional_table(&pairs(), &store(), &mut ClosedFormMock, &LmRunConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_factor_log(&mut buf, &run.factors, &["seed=0".into()]).unwrap();
        assert_eq!(read_factor_log(buf.as_slice()).unwrap(), run.factors);
    }

    #[test]
    fn split_mode_equivalence() {
        let s = store();
        let tasks = emit_all_tasks(&pairs(), &s, 1000, 0);
        let results = ClosedFormMock.score(&tasks).unwrap();
        let mut file_scorer = crate::lm::FileScorer::new("mock", results);
        let a = lm_conditional_table(&pairs(), &s, &mut file_scorer, &LmRunConfig::default()).unwrap();
        let b = lm_conditional_table(&pairs(), &s, &mut ClosedFormMock, &LmRunConfig::default()).unwrap();
        assert_eq!(a.table, b.table);
    }
}
