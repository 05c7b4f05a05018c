use std::collections::HashMap;
use std::io::{BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use thiserror::Error;

use super::wire::{self, WireRequest};
use super::{ScoreOutcome, ScoreResult, ScoringTask};

#[derive(Debug, Error)]
pub enum ScorerError {
    /// Transport failure; the batch may be retried.
    #[error("scorer channel: {0}")]
    Channel(String),
    #[error("scorer protocol: {0}")]
    Protocol(String),
}

/// Anything that turns scoring tasks into masked-word probabilities.
pub trait Scorer {
    fn model_id(&self) -> &str;

    /// Scores one batch. Results may come back in any order.
    fn score(&mut self, tasks: &[ScoringTask]) -> Result<Vec<ScoreResult>, ScorerError>;
}

fn prob(task: &ScoringTask, p: f64, model: &str) -> ScoreResult {
    ScoreResult { task_id: task.task_id.clone(), outcome: ScoreOutcome::Prob(p), model_id: model.to_string() }
}

/// Deterministic mock: `1 / (1 + offset mod 7)` for the masked offset.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClosedFormMock;

impl ClosedFormMock {
    pub fn probability(offset: usize) -> f64 {
        1.0 / (1.0 + (offset % 7) as f64)
    }
}

impl Scorer for ClosedFormMock {
    fn model_id(&self) -> &str {
        "mock-closed-form"
    }

    fn score(&mut self, tasks: &[ScoringTask]) -> Result<Vec<ScoreResult>, ScorerError> {
        Ok(tasks.iter().map(|t| prob(t, Self::probability(t.mask_char_offset), "mock-closed-form")).collect())
    }
}

/// Returns the same probability for every task.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn model_id(&self) -> &str {
        "mock-constant"
    }

    fn score(&mut self, tasks: &[ScoringTask]) -> Result<Vec<ScoreResult>, ScorerError> {
        Ok(tasks.iter().map(|t| prob(t, self.0, "mock-constant")).collect())
    }
}

/// Serves results read from a response file (offline split mode). Tasks with
/// no stored response are left unanswered.
#[derive(Debug, Clone)]
pub struct FileScorer {
    model_id: String,
    results: HashMap<String, ScoreResult>,
}

impl FileScorer {
    pub fn new(model_id: impl Into<String>, results: Vec<ScoreResult>) -> Self {
        FileScorer { model_id: model_id.into(), results: results.into_iter().map(|r| (r.task_id.clone(), r)).collect() }
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}

impl Scorer for FileScorer {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score(&mut self, tasks: &[ScoringTask]) -> Result<Vec<ScoreResult>, ScorerError> {
        Ok(tasks.iter().filter_map(|t| self.results.get(&t.task_id).cloned()).collect())
    }
}

/// External scorer process speaking the wire protocol over stdin/stdout.
/// The process is started lazily and restarted after a channel failure.
pub struct ProcessScorer {
    command: String,
    model_id: String,
    child: Option<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl ProcessScorer {
    /// `command` runs through `sh -c`.
    pub fn new(command: impl Into<String>, model_id: impl Into<String>) -> Self {
        ProcessScorer { command: command.into(), model_id: model_id.into(), child: None }
    }

    fn spawn(&mut self) -> Result<(), ScorerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ScorerError::Channel(format!("spawn {:?}: {e}", self.command)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        self.child = Some((child, stdin, stdout));
        Ok(())
    }

    fn kill(&mut self) {
        if let Some((mut child, stdin, _)) = self.child.take() {
            drop(stdin);
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Scorer for ProcessScorer {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score(&mut self, tasks: &[ScoringTask]) -> Result<Vec<ScoreResult>, ScorerError> {
        if self.child.is_none() {
            self.spawn()?;
        }
        let model_id = self.model_id.clone();
        let (_, stdin, stdout) = self.child.as_mut().expect("spawned");
        let requests: Vec<WireRequest> = tasks.iter().map(WireRequest::from).collect();
        // Write on a separate thread so a scorer that streams responses
        // cannot fill both pipes.
        let outcome = std::thread::scope(|s| {
            let writer = s.spawn(|| -> std::io::Result<()> {
                for r in &requests {
                    serde_json::to_writer(&mut *stdin, r)?;
                    stdin.write_all(b"\n")?;
                }
                stdin.write_all(b"\n")?;
                stdin.flush()
            });
            let read = wire::read_batch(stdout, &model_id);
            let wrote = writer.join().expect("writer thread");
            (wrote, read)
        });
        match outcome {
            (Ok(()), Ok(results)) if results.len() == tasks.len() => Ok(results),
            (Ok(()), Ok(results)) => {
                self.kill();
                Err(ScorerError::Channel(format!("expected {} responses, got {}", tasks.len(), results.len())))
            }
            (Err(e), _) => {
                self.kill();
                Err(ScorerError::Channel(e.to_string()))
            }
            (_, Err(wire::WireError::Io(e))) => {
                self.kill();
                Err(ScorerError::Channel(e.to_string()))
            }
            (_, Err(e)) => {
                self.kill();
                Err(ScorerError::Protocol(e.to_string()))
            }
        }
    }
}

impl Drop for ProcessScorer {
    fn drop(&mut self) {
        self.kill();
    }
}
