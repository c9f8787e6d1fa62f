//! Model clients: an HTTP chat-completions client and a scripted fake.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const API_KEY_VAR: &str = "LEMMAFORGE_MODEL_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// Which attempt a query belongs to.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub lemma_id: &'a str,
    pub sample: usize,
    pub round: usize,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct EndpointError(pub String);

pub trait ModelClient: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(
        &self,
        messages: &[ChatMessage],
        ctx: QueryContext<'_>,
    ) -> Result<String, EndpointError>;
}

/// Chat-completions endpoint: POSTs `{model, messages, ...decoding}` and reads
/// `choices[0].message.content`. The bearer token comes from the
/// environment only.
pub struct HttpModel {
    pub model_id: String,
    pub endpoint: String,
    pub decoding: serde_json::Map<String, Value>,
    pub timeout: Duration,
    agent: ureq::Agent,
}

impl HttpModel {
    pub fn new(
        model_id: &str,
        endpoint: &str,
        decoding: serde_json::Map<String, Value>,
        timeout: Duration,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            model_id: model_id.to_string(),
            endpoint: endpoint.to_string(),
            decoding,
            timeout,
            agent,
        }
    }

    /// The request body sent for `messages`.
    pub fn body(&self, messages: &[ChatMessage]) -> Value {
        let mut body = json!({ "model": self.model_id, "messages": messages });
        for (k, v) in &self.decoding {
            body[k] = v.clone();
        }
        body
    }
}

impl ModelClient for HttpModel {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(
        &self,
        messages: &[ChatMessage],
        _ctx: QueryContext<'_>,
    ) -> Result<String, EndpointError> {
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("content-type", "application/json");
        if let Ok(key) = std::env::var(API_KEY_VAR) {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(self.body(messages))
            .map_err(|e| EndpointError(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| EndpointError(e.to_string()))?;
        if !status.is_success() {
            return Err(EndpointError(format!(
                "HTTP {status}: {}",
                text.chars().take(500).collect::<String>()
            )));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| EndpointError(format!("bad response JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| EndpointError("response has no choices[0].message.content".into()))
    }
}

/// Per-lemma behavior of the fake model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FakeBehavior {
    /// Answers with the reference proof from this feedback round on.
    #[serde(default)]
    pub solve_at_round: Option<usize>,
    /// Answers with the reference proof on exactly this sample index.
    #[serde(default)]
    pub solve_at_sample: Option<usize>,
    /// Fails with an endpoint error on the first this-many queries.
    #[serde(default)]
    pub endpoint_failures: usize,
    #[serde(default)]
    pub delay_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FakeScript {
    #[serde(default)]
    pub default: FakeBehavior,
    #[serde(default)]
    pub lemmas: BTreeMap<String, FakeBehavior>,
}

/// Deterministic stand-in for a prover. Correct answers replay the
/// dataset's reference proof; wrong answers alternate between a citation
/// of a nonexistent lemma and an unfinished proof.
pub struct FakeModel {
    pub script: FakeScript,
    references: HashMap<String, (String, String)>,
    calls: std::sync::Mutex<HashMap<String, usize>>,
}

impl FakeModel {
    /// `references` maps lemma id to (statement header, reference body).
    pub fn new(script: FakeScript, references: HashMap<String, (String, String)>) -> Self {
        Self {
            script,
            references,
            calls: Default::default(),
        }
    }

    fn behavior(&self, lemma_id: &str) -> &FakeBehavior {
        self.script
            .lemmas
            .get(lemma_id)
            .unwrap_or(&self.script.default)
    }
}

impl ModelClient for FakeModel {
    fn model_id(&self) -> &str {
        "fake"
    }

    fn complete(
        &self,
        _messages: &[ChatMessage],
        ctx: QueryContext<'_>,
    ) -> Result<String, EndpointError> {
        let b = self.behavior(ctx.lemma_id).clone();
        if b.delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(b.delay_ms));
        }
        let call = {
            let mut calls = self.calls.lock().unwrap_or_else(|p| p.into_inner());
            let c = calls.entry(ctx.lemma_id.to_string()).or_insert(0);
            *c += 1;
            *c
        };
        if call <= b.endpoint_failures {
            return Err(EndpointError(format!("scripted endpoint failure {call}")));
        }
        let (statement, reference) = self.references.get(ctx.lemma_id).ok_or_else(|| {
            EndpointError(format!(
                "fake model has no reference for `{}`",
                ctx.lemma_id
            ))
        })?;
        let solves = b.solve_at_round.is_some_and(|r| ctx.round >= r)
            || b.solve_at_sample == Some(ctx.sample);
        let body = if solves {
            reference.clone()
        } else if (ctx.round + ctx.sample).is_multiple_of(2) {
            "  exact Nat.lemma_that_does_not_exist".to_string()
        } else {
            "  sorry".to_string()
        };
        Ok(format!(
            "The statement follows from the hypotheses.\n\n```lean\n{statement} := by\n{body}\n```\n"
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoding_knobs_are_forwarded() {
        let mut decoding = serde_json::Map::new();
        decoding.insert("temperature".into(), json!(0.7));
        let m = HttpModel::new(
            "m",
            "http://127.0.0.1:9/v1/chat/completions",
            decoding,
            Duration::from_secs(1),
        );
        let body = m.body(&[ChatMessage::user("hi")]);
        assert_eq!(body["temperature"], json!(0.7));
        assert_eq!(body["messages"][0]["role"], "user");
    }

    #[test]
    fn unreachable_endpoint_is_an_error() {
        let m = HttpModel::new(
            "m",
            "http://127.0.0.1:9/v1/chat/completions",
            Default::default(),
            Duration::from_secs(2),
        );
        let ctx = QueryContext {
            lemma_id: "x",
            sample: 0,
            round: 0,
        };
        assert!(m.complete(&[ChatMessage::user("hi")], ctx).is_err());
    }

    #[test]
    fn fake_schedule() {
        let mut refs = HashMap::new();
        refs.insert(
            "l".to_string(),
            ("theorem l : 1 = 1".to_string(), "  rfl".to_string()),
        );
        let script = FakeScript {
            default: FakeBehavior {
                solve_at_round: Some(2),
                ..Default::default()
            },
            ..Default::default()
        };
        let m = FakeModel::new(script, refs);
        let ask = |round| {
            m.complete(
                &[],
                QueryContext {
                    lemma_id: "l",
                    sample: 0,
                    round,
                },
            )
            .unwrap()
        };
        assert!(ask(0).contains("lemma_that_does_not_exist"));
        assert!(ask(1).contains("sorry"));
        assert!(ask(2).contains("  rfl"));
    }
}
