//! Verification oracle backed by Lean REPL processes.
//!
//! [`ReplPool`] keeps a set of worker processes speaking the community REPL
//! JSON protocol. Each request is checked against a per-worker base
//! environment built from the file's `import` lines, so requests never see
//! each other's declarations.

mod client;
pub mod pool;
pub mod protocol;

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proof_model::TheoremScript;

pub use client::{Client, Session, SessionError};
pub use pool::{PoolConfig, ReplPool};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("Lean toolchain unavailable: {0}")]
    ToolchainUnavailable(String),
    #[error("REPL worker crashed: {0}")]
    WorkerCrashed(String),
    #[error("proof state unavailable: {0}")]
    StateUnavailable(String),
    #[error("oracle pool is shut down")]
    PoolClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Verify,
    States,
}

#[derive(Debug, Clone)]
pub struct OracleRequest {
    pub source_text: String,
    pub mode: Mode,
    pub timeout: Duration,
    /// Informational; the cap is applied when a worker process is spawned.
    pub memory_cap_mb: Option<u64>,
}

impl OracleRequest {
    pub fn verify(source_text: impl Into<String>, timeout: Duration) -> Self {
        Self {
            source_text: source_text.into(),
            mode: Mode::Verify,
            timeout,
            memory_cap_mb: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Proved,
    Failed,
    Incomplete,
    Timeout,
    Crashed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Proved => "proved",
            Status::Failed => "failed",
            Status::Incomplete => "incomplete",
            Status::Timeout => "timeout",
            Status::Crashed => "crashed",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// 1-based.
    pub line: usize,
    /// 0-based.
    pub column: usize,
    pub text: String,
}

/// Hypotheses and open goals at one proof position. Hypotheses are those of
/// the first goal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofState {
    pub hypotheses: Vec<(String, String)>,
    pub goals: Vec<String>,
}

impl ProofState {
    pub fn is_terminal(&self) -> bool {
        self.goals.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub status: Status,
    pub messages: Vec<Diagnostic>,
    /// Per step boundary when states were requested; `None` entries mark
    /// positions the oracle could not report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Option<ProofState>>>,
    pub wall_time_s: f64,
}

impl VerificationResult {
    pub fn without_messages(status: Status, wall_time_s: f64) -> Self {
        Self {
            status,
            messages: Vec::new(),
            states: None,
            wall_time_s,
        }
    }

    pub fn proved(&self) -> bool {
        self.status == Status::Proved
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.messages
            .iter()
            .filter(|d| d.severity == Severity::Error)
    }
}

/// Anything that can check Lean source.
pub trait Oracle: Send + Sync {
    fn verify(&self, request: &OracleRequest) -> Result<VerificationResult, OracleError>;

    /// States at each top-level step boundary of `script`: before step 0,
    /// after step 0, ..., after the last step.
    fn collect_states(
        &self,
        script: &TheoremScript,
        timeout: Duration,
    ) -> Result<Vec<Option<ProofState>>, OracleError> {
        let request = OracleRequest {
            source_text: crate::proof_model::print_theorem(script),
            mode: Mode::States,
            timeout,
            memory_cap_mb: None,
        };
        let result = self.verify(&request)?;
        result.states.ok_or_else(|| {
            OracleError::StateUnavailable(format!("no states reported for {}", script.name))
        })
    }
}

pub const TRUNCATION_MARKER: &str = "[... further errors truncated]";

/// Plain-text digest of a failed verification: one `line L, col C: message`
/// entry per distinct error, ordered by position, cut to `budget` bytes.
pub fn summarize_errors(result: &VerificationResult, budget: usize) -> String {
    let mut entries: Vec<&Diagnostic> = result
        .messages
        .iter()
        .filter(|d| {
            d.severity == Severity::Error
                || (d.severity == Severity::Warning && d.text.contains("sorry"))
        })
        .collect();
    entries.sort_by_key(|d| (d.line, d.column));
    entries.dedup_by(|a, b| a.line == b.line && a.column == b.column && a.text == b.text);

    let mut lines: Vec<String> = entries
        .iter()
        .map(|d| format!("line {}, col {}: {}", d.line, d.column, d.text))
        .collect();
    match result.status {
        Status::Timeout => lines.push(format!(
            "verification timed out after {:.0} s",
            result.wall_time_s
        )),
        Status::Crashed => {
            lines.push("the Lean process crashed while checking this proof".to_string())
        }
        _ => {}
    }

    let full = lines.join("\n");
    if full.len() <= budget {
        return full;
    }
    let room = budget.saturating_sub(TRUNCATION_MARKER.len() + 1);
    let mut out = String::new();
    for line in &lines {
        let needed = if out.is_empty() {
            line.len()
        } else {
            line.len() + 1
        };
        if out.len() + needed > room {
            if out.is_empty() {
                // A single oversized entry is cut at a character boundary.
                let mut cut = room;
                while !line.is_char_boundary(cut) {
                    cut -= 1;
                }
                out.push_str(&line[..cut]);
            }
            break;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(line);
    }
    if budget > TRUNCATION_MARKER.len() {
        let _ = write!(out, "\n{TRUNCATION_MARKER}");
    } else {
        out.clear();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(line: usize, column: usize, text: &str) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            line,
            column,
            text: text.to_string(),
        }
    }

    fn failed(messages: Vec<Diagnostic>) -> VerificationResult {
        VerificationResult {
            status: Status::Failed,
            messages,
            states: None,
            wall_time_s: 0.1,
        }
    }

    #[test]
    fn single_error_digest() {
        let r = failed(vec![diag(3, 2, "unknown identifier 'foo'")]);
        assert_eq!(
            summarize_errors(&r, 4096),
            "line 3, col 2: unknown identifier 'foo'"
        );
    }

    #[test]
    fn duplicates_collapse_and_order_is_positional() {
        let r = failed(vec![diag(5, 0, "b"), diag(3, 1, "a"), diag(5, 0, "b")]);
        assert_eq!(
            summarize_errors(&r, 4096),
            "line 3, col 1: a\nline 5, col 0: b"
        );
    }

    #[test]
    fn budget_is_respected() {
        let msgs: Vec<Diagnostic> = (1..=50).map(|i| diag(i, 0, &"x".repeat(60))).collect();
        let digest = summarize_errors(&failed(msgs), 1024);
        assert!(digest.len() <= 1024, "{}", digest.len());
        assert!(digest.ends_with(TRUNCATION_MARKER));
        assert!(digest.starts_with("line 1, col 0: "));
    }

    #[test]
    fn oversized_single_entry_is_cut() {
        let digest = summarize_errors(&failed(vec![diag(1, 0, &"é".repeat(400))]), 200);
        assert!(digest.len() <= 200);
        assert!(digest.ends_with(TRUNCATION_MARKER));
    }
}
