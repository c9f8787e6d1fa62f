//! Request logic shared by every transport: base environments, verdicts,
//! crash retry and proof-state collection.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::protocol::{
    classify, messages_of, parse_goals, sorry_count, split_goal_dump, split_imports,
};
use super::{Mode, OracleError, OracleRequest, ProofState, Severity, Status, VerificationResult};
use crate::proof_model::{self, TheoremScript};

#[derive(Debug)]
pub enum SessionError {
    Timeout,
    Crashed(String),
}

/// A running REPL conversation.
pub trait Session {
    fn request(&mut self, req: &Value, timeout: Duration) -> Result<Value, SessionError>;
    /// Replaces the underlying process with a fresh one.
    fn restart(&mut self) -> Result<(), OracleError>;
}

pub struct Client<S: Session> {
    session: S,
    bases: HashMap<String, u64>,
    import_timeout: Duration,
    served: usize,
    recycle_after: Option<usize>,
}

enum Failure {
    Timeout,
    Crashed(String),
    Fatal(OracleError),
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Timeout => Failure::Timeout,
            SessionError::Crashed(m) => Failure::Crashed(m),
        }
    }
}

impl<S: Session> Client<S> {
    pub fn new(session: S, import_timeout: Duration, recycle_after: Option<usize>) -> Self {
        Self {
            session,
            bases: HashMap::new(),
            import_timeout,
            served: 0,
            recycle_after,
        }
    }

    fn restart(&mut self) -> Result<(), OracleError> {
        self.bases.clear();
        self.served = 0;
        self.session.restart()
    }

    /// Verifies one request. Timeouts and crashes restart the process; a
    /// crash is retried once before being reported as `crashed`.
    pub fn verify(&mut self, req: &OracleRequest) -> Result<VerificationResult, OracleError> {
        if let Some(limit) = self.recycle_after {
            if self.served >= limit {
                tracing::debug!(served = self.served, "recycling REPL worker");
                self.restart()?;
            }
        }
        self.served += 1;
        let start = Instant::now();
        let mut last_crash = String::new();
        for attempt in 0..2 {
            match self.try_verify(req, start) {
                Ok(r) => return Ok(r),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Timeout) => {
                    self.restart()?;
                    return Ok(VerificationResult::without_messages(
                        Status::Timeout,
                        start.elapsed().as_secs_f64(),
                    ));
                }
                Err(Failure::Crashed(m)) => {
                    tracing::warn!(attempt, "REPL worker crashed: {m}");
                    last_crash = m;
                    self.restart()?;
                }
            }
        }
        let mut r =
            VerificationResult::without_messages(Status::Crashed, start.elapsed().as_secs_f64());
        r.messages.push(super::Diagnostic {
            severity: Severity::Error,
            line: 1,
            column: 0,
            text: format!("REPL process crashed: {last_crash}"),
        });
        Ok(r)
    }

    fn base_env(&mut self, imports: &str) -> Result<Option<u64>, Failure> {
        if imports.is_empty() {
            return Ok(None);
        }
        if let Some(&env) = self.bases.get(imports) {
            return Ok(Some(env));
        }
        let resp = self
            .session
            .request(&json!({ "cmd": imports }), self.import_timeout)?;
        let errors: Vec<String> = messages_of(&resp)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.text)
            .collect();
        let env = resp.get("env").and_then(Value::as_u64);
        match env {
            Some(env) if errors.is_empty() => {
                self.bases.insert(imports.to_string(), env);
                Ok(Some(env))
            }
            _ => Err(Failure::Fatal(OracleError::ToolchainUnavailable(format!(
                "could not load `{}`: {}",
                imports.replace('\n', "; "),
                errors.join("; ")
            )))),
        }
    }

    fn command(&mut self, source: &str, timeout: Duration) -> Result<Value, Failure> {
        let (imports, body) = split_imports(source);
        let env = self.base_env(&imports)?;
        let mut req = json!({ "cmd": body });
        if let Some(env) = env {
            req["env"] = json!(env);
        }
        Ok(self.session.request(&req, timeout)?)
    }

    fn try_verify(
        &mut self,
        req: &OracleRequest,
        start: Instant,
    ) -> Result<VerificationResult, Failure> {
        let resp = self.command(&req.source_text, req.timeout)?;
        let messages = messages_of(&resp);
        let status = classify(&messages, sorry_count(&resp));
        let states = match req.mode {
            Mode::Verify => None,
            Mode::States => match proof_model::parse_last_theorem(&req.source_text) {
                Ok(script) => Some(self.states(&script, req.timeout)?),
                Err(e) => {
                    tracing::debug!("no tactic script for state collection: {e}");
                    None
                }
            },
        };
        Ok(VerificationResult {
            status,
            messages,
            states,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    fn states(
        &mut self,
        script: &TheoremScript,
        timeout: Duration,
    ) -> Result<Vec<Option<ProofState>>, Failure> {
        match self.tactic_states(script, timeout)? {
            Some(states) => Ok(states),
            None => self.prefix_states(script, timeout),
        }
    }

    /// Tactic mode: open the goal with `sorry`, then replay each step against
    /// the returned proof state. `None` when the REPL does not support it.
    fn tactic_states(
        &mut self,
        script: &TheoremScript,
        timeout: Duration,
    ) -> Result<Option<Vec<Option<ProofState>>>, Failure> {
        let source = format!("{}{} := by sorry\n", script.preamble, script.statement());
        let resp = self.command(&source, timeout)?;
        let Some(first) = resp
            .get("sorries")
            .and_then(Value::as_array)
            .and_then(|a| a.first())
        else {
            return Ok(None);
        };
        let (Some(mut ps), Some(goal)) = (
            first.get("proofState").and_then(Value::as_u64),
            first.get("goal").and_then(Value::as_str),
        ) else {
            return Ok(None);
        };
        let steps = script.steps();
        let mut states = Vec::with_capacity(steps.len() + 1);
        states.push(parse_goals(&[goal]));
        let mut broken = false;
        for step in steps {
            if broken {
                states.push(None);
                continue;
            }
            let tactic =
                proof_model::reindent_lines(&script.body[step.start..step.end], 0).join("\n");
            let resp = self
                .session
                .request(&json!({ "tactic": tactic, "proofState": ps }), timeout)?;
            match (
                resp.get("proofState").and_then(Value::as_u64),
                resp.get("goals").and_then(Value::as_array),
            ) {
                (Some(next), Some(goals)) => {
                    let texts: Vec<&str> = goals.iter().filter_map(Value::as_str).collect();
                    ps = next;
                    states.push(parse_goals(&texts));
                }
                _ => {
                    broken = true;
                    states.push(None);
                }
            }
        }
        Ok(Some(states))
    }

    /// Fallback: check the first m steps followed by `sorry` and read the
    /// reported goal; remaining goals come from the unsolved-goals error.
    fn prefix_states(
        &mut self,
        script: &TheoremScript,
        timeout: Duration,
    ) -> Result<Vec<Option<ProofState>>, Failure> {
        let steps = script.steps();
        let statement = script.statement();
        let base = script.base_indent();
        let mut states = Vec::with_capacity(steps.len() + 1);
        for m in 0..=steps.len() {
            let end = if m == 0 { 0 } else { steps[m - 1].end };
            let mut lines = proof_model::reindent_lines(&script.body[..end], base);
            if m == steps.len() {
                let source = proof_model::render_source(&script.preamble, &statement, &lines);
                let resp = self.command(&source, timeout)?;
                let ok = classify(&messages_of(&resp), sorry_count(&resp)) == Status::Proved;
                states.push(ok.then(ProofState::default));
                continue;
            }
            lines.push(format!("{}sorry", " ".repeat(base)));
            let source = proof_model::render_source(&script.preamble, &statement, &lines);
            let resp = self.command(&source, timeout)?;
            let goal = resp
                .get("sorries")
                .and_then(Value::as_array)
                .and_then(|a| a.first())
                .and_then(|s| s.get("goal"))
                .and_then(Value::as_str);
            let msgs = messages_of(&resp);
            let mut extra = Vec::new();
            let mut clean = true;
            for d in msgs.iter().filter(|d| d.severity == Severity::Error) {
                match d.text.strip_prefix("unsolved goals\n") {
                    Some(rest) => {
                        extra.extend(split_goal_dump(rest).into_iter().map(str::to_string))
                    }
                    None => clean = false,
                }
            }
            let state = match goal {
                Some(g) if clean => {
                    let mut texts = vec![g.to_string()];
                    texts.extend(extra);
                    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
                    parse_goals(&refs)
                }
                _ => None,
            };
            states.push(state);
        }
        Ok(states)
    }
}
