//! Line-delimited JSON protocol between the estimator and a scorer.
//!
//! Request: `{"id": "...", "text": "...", "offset": 12, "length": 3, "target": "cat"}`
//! Response: `{"id": "...", "prob": 0.01}` or `{"id": "...", "refused": "multi-token-target"}`.
//! A blank line terminates a batch. Responses may arrive in any order. In
//! task and result files, lines starting with `#` are metadata and ignored.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ScoreOutcome, ScoreResult, ScoringTask};

/// Reserved request id: the scorer answers with the total probability mass
/// at the masked position instead of the target's probability.
pub const DISTSUM_PROBE_ID: &str = "__distsum__";
/// Refusal for a target that is not one token in the model vocabulary.
pub const REFUSAL_MULTI_TOKEN: &str = "multi-token-target";
/// Refusal for a request whose offset/length slice does not match the target.
pub const REFUSAL_OFFSET_MISMATCH: &str = "offset-mismatch";

#[derive(Debug, Error)]
pub enum WireError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: String,
    pub text: String,
    pub offset: usize,
    pub length: usize,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refused: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
}

impl From<&ScoringTask> for WireRequest {
    fn from(t: &ScoringTask) -> Self {
        WireRequest {
            id: t.task_id.clone(),
            text: t.context_text.clone(),
            offset: t.mask_char_offset,
            length: t.mask_char_len,
            target: t.target_word.clone(),
        }
    }
}

impl WireResponse {
    pub fn into_result(self, model_id: &str, line: usize) -> Result<ScoreResult, WireError> {
        let outcome = match (self.prob, self.refused) {
            (Some(p), None) => ScoreOutcome::Prob(p),
            (None, Some(r)) => ScoreOutcome::Refused(r),
            _ => {
                return Err(WireError::Malformed {
                    line,
                    msg: format!("response {} must carry exactly one of prob/refused", self.id),
                })
            }
        };
        Ok(ScoreResult { task_id: self.id, outcome, model_id: model_id.to_string() })
    }

    pub fn from_result(r: &ScoreResult) -> Self {
        let (prob, refused) = match &r.outcome {
            ScoreOutcome::Prob(p) => (Some(*p), None),
            ScoreOutcome::Refused(s) => (None, Some(s.clone())),
        };
        WireResponse { id: r.task_id.clone(), prob, refused, truncated: None }
    }
}

/// Probe for the scorer's normalization check, masking the same occurrence
/// as `task`.
pub fn distsum_probe(task: &ScoringTask) -> WireRequest {
    WireRequest { id: DISTSUM_PROBE_ID.to_string(), ..WireRequest::from(task) }
}

/// Writes one request line per task followed by the terminating blank line.
pub fn write_batch<W: Write>(mut w: W, tasks: &[ScoringTask]) -> io::Result<()> {
    for t in tasks {
        serde_json::to_writer(&mut w, &WireRequest::from(t))?;
        w.write_all(b"\n")?;
    }
    w.write_all(b"\n")?;
    w.flush()
}

/// Reads response lines up to a blank line or end of stream.
pub fn read_batch<R: BufRead>(r: &mut R, model_id: &str) -> Result<Vec<ScoreResult>, WireError> {
    let mut out = Vec::new();
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            break;
        }
        n += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            break;
        }
        let resp: WireResponse =
            serde_json::from_str(trimmed).map_err(|e| WireError::Malformed { line: n, msg: e.to_string() })?;
        out.push(resp.into_result(model_id, n)?);
    }
    Ok(out)
}

/// Reads every response in a results file, across batch separators.
pub fn read_all<R: BufRead>(r: R, model_id: &str) -> Result<Vec<ScoreResult>, WireError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let resp: WireResponse =
            serde_json::from_str(trimmed).map_err(|e| WireError::Malformed { line: i + 1, msg: e.to_string() })?;
        out.push(resp.into_result(model_id, i + 1)?);
    }
    Ok(out)
}

/// Reads every request in a task file.
pub fn read_requests<R: BufRead>(r: R) -> Result<Vec<WireRequest>, WireError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| WireError::Malformed { line: i + 1, msg: e.to_string() })?);
    }
    Ok(out)
}

pub fn write_responses<W: Write>(mut w: W, results: &[ScoreResult]) -> io::Result<()> {
    for r in results {
        serde_json::to_writer(&mut w, &WireResponse::from_result(r))?;
        w.write_all(b"\n")?;
    }
    w.write_all(b"\n")?;
    w.flush()
}
