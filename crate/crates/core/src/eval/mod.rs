//! Prover evaluation: prompting, proof extraction, oracle verdicts, feedback
//! rounds and pass@k sampling.

pub mod campaign;
pub mod model;
pub mod prompt;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use campaign::{load_lemmas, run_campaign, CampaignMode, CampaignSummary, RunDir};
pub use model::{
    ChatMessage, EndpointError, FakeBehavior, FakeModel, FakeScript, HttpModel, ModelClient,
    QueryContext,
};
pub use prompt::{build_prompt, extract_proof, EvalLemma, TEMPLATES};

use crate::repl::{
    summarize_errors, Diagnostic, Oracle, OracleError, OracleRequest, Severity, Status,
    VerificationResult,
};

pub const DEFAULT_DIGEST_BUDGET: usize = 4096;
pub const NO_PROOF_MESSAGE: &str = "no Lean code block with a proof was found in the response";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("run directory {0} already exists; pass --resume to continue it")]
    RunExists(std::path::PathBuf),
    #[error("run directory {0} has no config.json")]
    NotARun(std::path::PathBuf),
    #[error("{path}: {msg}")]
    Corrupt {
        path: std::path::PathBuf,
        msg: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub model_id: String,
    pub endpoint: String,
    pub max_feedback_rounds: usize,
    pub samples_k: usize,
    /// Forwarded verbatim in the request body.
    pub decoding: serde_json::Map<String, Value>,
    pub timeout_s: f64,
    pub prompt_template_id: String,
    pub verify_timeout_s: f64,
    pub early_stop: bool,
    pub endpoint_retries: usize,
    pub retry_backoff_ms: u64,
    pub digest_budget: usize,
    pub in_flight: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            model_id: String::new(),
            endpoint: String::new(),
            max_feedback_rounds: 10,
            samples_k: 1,
            decoding: Default::default(),
            timeout_s: 300.0,
            prompt_template_id: "default".into(),
            verify_timeout_s: 120.0,
            early_stop: true,
            endpoint_retries: 3,
            retry_backoff_ms: 1000,
            digest_budget: DEFAULT_DIGEST_BUDGET,
            in_flight: 4,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.samples_k == 0 {
            return Err(EvalError::InvalidConfig(
                "samples_k must be at least 1".into(),
            ));
        }
        if self.in_flight == 0 {
            return Err(EvalError::InvalidConfig(
                "in_flight must be at least 1".into(),
            ));
        }
        if !TEMPLATES.contains(&self.prompt_template_id.as_str()) {
            return Err(EvalError::UnknownTemplate(self.prompt_template_id.clone()));
        }
        Ok(())
    }

    fn verify_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.verify_timeout_s.max(0.001))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalAttempt {
    pub attempt_id: String,
    pub lemma_id: String,
    pub model_id: String,
    pub sample_index: usize,
    pub round: usize,
    pub prompt_text: String,
    pub raw_response: String,
    pub extracted_proof: Option<String>,
    pub verdict: VerificationResult,
    pub timestamp: String,
}

pub fn attempt_id(lemma_id: &str, sample: usize, round: usize) -> String {
    format!("{lemma_id}/s{sample}/r{round}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub lemma_id: String,
    pub model_id: String,
    pub solved: bool,
    pub solved_at_round: Option<usize>,
    pub solved_at_sample: Option<usize>,
    pub attempts: Vec<String>,
    /// Set when the endpoint kept failing and the lemma was abandoned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Where attempts go as soon as they are verified.
pub trait AttemptSink: Sync {
    fn record(&self, attempt: &EvalAttempt) -> Result<(), EvalError>;
}

/// Keeps attempts in memory.
#[derive(Default)]
pub struct MemorySink(pub std::sync::Mutex<Vec<EvalAttempt>>);

impl MemorySink {
    pub fn attempts(&self) -> Vec<EvalAttempt> {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

impl AttemptSink for MemorySink {
    fn record(&self, attempt: &EvalAttempt) -> Result<(), EvalError> {
        self.0
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(attempt.clone());
        Ok(())
    }
}

pub struct Evaluator<'a> {
    pub oracle: &'a dyn Oracle,
    pub model: &'a dyn ModelClient,
    pub config: &'a EvalConfig,
    pub sink: &'a dyn AttemptSink,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Verdict for a response without an extractable proof.
fn unverifiable() -> VerificationResult {
    VerificationResult {
        status: Status::Failed,
        messages: vec![Diagnostic {
            severity: Severity::Error,
            line: 1,
            column: 0,
            text: NO_PROOF_MESSAGE.into(),
        }],
        states: None,
        wall_time_s: 0.0,
    }
}

impl Evaluator<'_> {
    /// Queries the model, retrying endpoint failures with exponential backoff.
    fn query(
        &self,
        messages: &[ChatMessage],
        ctx: QueryContext<'_>,
    ) -> Result<String, EndpointError> {
        let mut last = None;
        for attempt in 0..=self.config.endpoint_retries {
            if attempt > 0 {
                let backoff = self
                    .config
                    .retry_backoff_ms
                    .saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.model.complete(messages, ctx) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    tracing::warn!(lemma = ctx.lemma_id, attempt, "endpoint error: {e}");
                    last = Some(e);
                }
            }
        }
        Err(last.unwrap_or_else(|| EndpointError("no attempts made".into())))
    }

    fn attempt(
        &self,
        lemma: &EvalLemma,
        messages: &[ChatMessage],
        ctx: QueryContext<'_>,
    ) -> Result<Result<EvalAttempt, EndpointError>, EvalError> {
        let raw = match self.query(messages, ctx) {
            Ok(raw) => raw,
            Err(e) => return Ok(Err(e)),
        };
        let extracted = extract_proof(&raw, lemma.theorem_name());
        let verdict = match &extracted {
            Some(proof) => {
                let request =
                    OracleRequest::verify(lemma.source_with(proof), self.config.verify_timeout());
                self.oracle.verify(&request)?
            }
            None => unverifiable(),
        };
        let attempt = EvalAttempt {
            attempt_id: attempt_id(&lemma.id, ctx.sample, ctx.round),
            lemma_id: lemma.id.clone(),
            model_id: self.model.model_id().to_string(),
            sample_index: ctx.sample,
            round: ctx.round,
            prompt_text: messages
                .last()
                .map(|m| m.content.clone())
                .unwrap_or_default(),
            raw_response: raw,
            extracted_proof: extracted,
            verdict,
            timestamp: now(),
        };
        self.sink.record(&attempt)?;
        Ok(Ok(attempt))
    }

    fn outcome(&self, lemma: &EvalLemma) -> EvalOutcome {
        EvalOutcome {
            lemma_id: lemma.id.clone(),
            model_id: self.model.model_id().to_string(),
            solved: false,
            solved_at_round: None,
            solved_at_sample: None,
            attempts: Vec::new(),
            error: None,
        }
    }

    /// Zero-shot query, then up to `max_feedback_rounds` repair rounds. Each
    /// round continues the conversation with the previous error digest.
    pub fn run_feedback_loop(&self, lemma: &EvalLemma) -> Result<EvalOutcome, EvalError> {
        let mut outcome = self.outcome(lemma);
        let mut messages = vec![ChatMessage::user(build_prompt(
            lemma,
            &self.config.prompt_template_id,
            None,
        )?)];
        for round in 0..=self.config.max_feedback_rounds {
            let ctx = QueryContext {
                lemma_id: &lemma.id,
                sample: 0,
                round,
            };
            let attempt = match self.attempt(lemma, &messages, ctx)? {
                Ok(a) => a,
                Err(e) => {
                    outcome.error = Some(format!("round {round}: {e}"));
                    break;
                }
            };
            outcome.attempts.push(attempt.attempt_id.clone());
            if attempt.verdict.proved() {
                outcome.solved = true;
                outcome.solved_at_round = Some(round);
                outcome.solved_at_sample = Some(0);
                break;
            }
            let digest = summarize_errors(&attempt.verdict, self.config.digest_budget);
            messages.push(ChatMessage::assistant(attempt.raw_response));
            messages.push(ChatMessage::user(build_prompt(
                lemma,
                "feedback",
                Some(&digest),
            )?));
        }
        Ok(outcome)
    }

    /// `samples_k` independent zero-shot samples.
    pub fn run_pass_at_k(&self, lemma: &EvalLemma) -> Result<EvalOutcome, EvalError> {
        let mut outcome = self.outcome(lemma);
        let prompt = build_prompt(lemma, &self.config.prompt_template_id, None)?;
        let messages = vec![ChatMessage::user(prompt)];
        for sample in 0..self.config.samples_k {
            let ctx = QueryContext {
                lemma_id: &lemma.id,
                sample,
                round: 0,
            };
            let attempt = match self.attempt(lemma, &messages, ctx)? {
                Ok(a) => a,
                Err(e) => {
                    outcome.error = Some(format!("sample {sample}: {e}"));
                    break;
                }
            };
            outcome.attempts.push(attempt.attempt_id.clone());
            if attempt.verdict.proved() && !outcome.solved {
                outcome.solved = true;
                outcome.solved_at_round = Some(0);
                outcome.solved_at_sample = Some(sample);
                if self.config.early_stop {
                    break;
                }
            }
        }
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::sim::LocalOracle;

    fn lemma() -> EvalLemma {
        EvalLemma::from_source(
            "p",
            "import Mathlib\n\ntheorem add_two (x : ℕ) (h : x = 2) : x + 2 = 4 := by\n  rw [h]\n",
        )
        .unwrap()
    }

    fn fake(behavior: FakeBehavior) -> FakeModel {
        let l = lemma();
        let refs = HashMap::from([(
            l.id.clone(),
            (l.statement_text.clone(), l.reference_proof.clone()),
        )]);
        FakeModel::new(
            FakeScript {
                default: behavior,
                ..Default::default()
            },
            refs,
        )
    }

    fn config() -> EvalConfig {
        EvalConfig {
            retry_backoff_ms: 1,
            verify_timeout_s: 5.0,
            ..Default::default()
        }
    }

    #[test]
    fn second_round_solves() {
        let oracle = LocalOracle::new();
        let model = fake(FakeBehavior {
            solve_at_round: Some(1),
            ..Default::default()
        });
        let sink = MemorySink::default();
        let cfg = config();
        let ev = Evaluator {
            oracle: &oracle,
            model: &model,
            config: &cfg,
            sink: &sink,
        };
        let out = ev.run_feedback_loop(&lemma()).unwrap();
        assert_eq!(
            (out.solved, out.solved_at_round, out.attempts.len()),
            (true, Some(1), 2)
        );
        let attempts = sink.attempts();
        assert_eq!(attempts[0].verdict.status, Status::Failed);
        let digest = summarize_errors(&attempts[0].verdict, DEFAULT_DIGEST_BUDGET);
        assert!(digest.contains("unknown identifier"), "{digest}");
        assert!(attempts[1].prompt_text.contains(&digest));
        assert!(!attempts[0].prompt_text.contains("did not compile"));
    }

    #[test]
    fn zero_rounds_is_zero_shot() {
        let oracle = LocalOracle::new();
        let model = fake(FakeBehavior::default());
        let sink = MemorySink::default();
        let cfg = EvalConfig {
            max_feedback_rounds: 0,
            ..config()
        };
        let ev = Evaluator {
            oracle: &oracle,
            model: &model,
            config: &cfg,
            sink: &sink,
        };
        let out = ev.run_feedback_loop(&lemma()).unwrap();
        assert_eq!((out.solved, out.attempts.len()), (false, 1));
    }

    #[test]
    fn endpoint_failures_are_retried_then_recorded() {
        let oracle = LocalOracle::new();
        let cfg = EvalConfig {
            endpoint_retries: 2,
            ..config()
        };
        let model = fake(FakeBehavior {
            solve_at_round: Some(0),
            endpoint_failures: 2,
            ..Default::default()
        });
        let sink = MemorySink::default();
        let ev = Evaluator {
            oracle: &oracle,
            model: &model,
            config: &cfg,
            sink: &sink,
        };
        assert!(ev.run_feedback_loop(&lemma()).unwrap().solved);

        let model = fake(FakeBehavior {
            solve_at_round: Some(0),
            endpoint_failures: 5,
            ..Default::default()
        });
        let ev = Evaluator {
            oracle: &oracle,
            model: &model,
            config: &cfg,
            sink: &sink,
        };
        let out = ev.run_feedback_loop(&lemma()).unwrap();
        assert!(!out.solved && out.attempts.is_empty() && out.error.is_some());
    }

    #[test]
    fn pass_at_k_without_early_stop_keeps_sampling() {
        let oracle = LocalOracle::new();
        let model = fake(FakeBehavior {
            solve_at_sample: Some(2),
            ..Default::default()
        });
        let sink = MemorySink::default();
        let cfg = EvalConfig {
            samples_k: 5,
            early_stop: false,
            ..config()
        };
        let ev = Evaluator {
            oracle: &oracle,
            model: &model,
            config: &cfg,
            sink: &sink,
        };
        let out = ev.run_pass_at_k(&lemma()).unwrap();
        assert_eq!((out.solved_at_sample, out.attempts.len()), (Some(2), 5));
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig {
            samples_k: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(matches!(
            EvalConfig {
                prompt_template_id: "x".into(),
                ..Default::default()
            }
            .validate(),
            Err(EvalError::UnknownTemplate(_))
        ));
        assert!(EvalConfig::default().validate().is_ok());
    }
}
