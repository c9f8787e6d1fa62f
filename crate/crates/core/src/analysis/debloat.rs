//! Greedy removal of proof lines that verification does not need.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proof_model::{self, lex, LineKind, TacticLine, TheoremScript};
use crate::repl::{Oracle, OracleError, OracleRequest, Status};

#[derive(Debug, Error)]
pub enum DebloatError {
    #[error("the input proof does not verify (status {0})")]
    NotProved(Status),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebloatResult {
    pub original_proof: String,
    pub minimized_proof: String,
    /// Body line indices of the original proof that were removed.
    pub removed_line_indices: Vec<usize>,
    pub original_length: usize,
    pub minimized_length: usize,
    /// Re-derived hypotheses replaced by an identical given one: (local, given).
    pub substitutions: Vec<(String, String)>,
    /// The original proof with removed lines commented out.
    pub annotated_proof: String,
    pub passes: usize,
}

/// A body line tagged with its index in the original proof.
#[derive(Debug, Clone)]
struct Line {
    orig: usize,
    line: TacticLine,
}

fn render(lines: &[Line]) -> Vec<String> {
    let body: Vec<TacticLine> = lines.iter().map(|l| l.line.clone()).collect();
    proof_model::reindent_lines(&body, 2)
}

fn body_of(lines: &[Line]) -> Vec<TacticLine> {
    lines.iter().map(|l| l.line.clone()).collect()
}

struct Trial<'a> {
    oracle: &'a dyn Oracle,
    script: &'a TheoremScript,
    statement: String,
    timeout: Duration,
}

impl Trial<'_> {
    /// Timeouts and crashes count as "not proved" so the removal is skipped.
    fn proves(&self, lines: &[Line]) -> Result<bool, OracleError> {
        if !lines.iter().any(|l| l.line.is_code()) {
            return Ok(false);
        }
        let src =
            proof_model::render_source(&self.script.preamble, &self.statement, &render(lines));
        let r = self
            .oracle
            .verify(&OracleRequest::verify(src, self.timeout))?;
        if matches!(r.status, Status::Timeout | Status::Crashed) {
            tracing::debug!("removal trial {}; skipped", r.status);
        }
        Ok(r.proved())
    }
}

/// Binder name whose type is literally `type_text`, if any.
fn given_with_type(script: &TheoremScript, type_text: &str) -> Option<String> {
    let want = lex::collapse_ws(type_text);
    script
        .binders
        .iter()
        .find(|b| lex::collapse_ws(&b.type_text) == want)
        .and_then(|b| b.names.first().cloned())
}

/// Repeats reverse-order passes, each trying to drop one line or one
/// indented block at a time and keeping every drop that still verifies,
/// until a pass changes nothing. A dropped `have` that re-proves a given
/// hypothesis may have its later uses renamed to that hypothesis.
pub fn debloat(
    oracle: &dyn Oracle,
    script: &TheoremScript,
    timeout: Duration,
) -> Result<DebloatResult, DebloatError> {
    let trial = Trial {
        oracle,
        script,
        statement: script.statement(),
        timeout,
    };
    let mut lines: Vec<Line> = script
        .body
        .iter()
        .map(|l| Line {
            orig: l.index,
            line: l.clone(),
        })
        .collect();
    // Comments and blank lines carry no proof content.
    lines.retain(|l| l.line.is_code());
    if !trial.proves(&lines)? {
        let src = proof_model::render_source(&script.preamble, &trial.statement, &render(&lines));
        let status = oracle.verify(&OracleRequest::verify(src, timeout))?.status;
        return Err(DebloatError::NotProved(status));
    }

    let mut substitutions = Vec::new();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        let mut i = lines.len();
        while i > 0 {
            i -= 1;
            if i >= lines.len() {
                continue;
            }
            let body = body_of(&lines);
            let end = proof_model::block_end(&body, i);
            let mut candidate: Vec<Line> =
                lines[..i].iter().chain(&lines[end..]).cloned().collect();
            if trial.proves(&candidate)? {
                lines = candidate;
                changed = true;
                continue;
            }
            let rename = match (&body[i].kind, &body[i].introduced) {
                (LineKind::HaveIntro, Some(intro)) => given_with_type(script, &intro.hyp_type_text)
                    .filter(|given| *given != intro.hyp_name)
                    .map(|given| (intro.hyp_name.clone(), given)),
                _ => None,
            };
            if let Some((local, given)) = rename {
                for l in candidate[i..].iter_mut() {
                    l.line.text =
                        lex::rename_idents(&l.line.text, &|n| (n == local).then(|| given.clone()));
                }
                if trial.proves(&candidate)? {
                    lines = candidate;
                    substitutions.push((local, given));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let kept: std::collections::BTreeSet<usize> = lines.iter().map(|l| l.orig).collect();
    let code: Vec<&TacticLine> = script.body.iter().filter(|l| l.is_code()).collect();
    let removed: Vec<usize> = code
        .iter()
        .map(|l| l.index)
        .filter(|i| !kept.contains(i))
        .collect();
    let original = proof_model::reindent_lines(&script.body, 2);
    let annotated: Vec<String> = script
        .body
        .iter()
        .zip(&original)
        .map(|(l, text)| {
            if removed.contains(&l.index) {
                let indent = proof_model::lex::indent_of(text);
                format!("{}-- {}", &text[..indent], &text[indent..])
            } else {
                text.clone()
            }
        })
        .collect();
    let minimized = render(&lines);
    Ok(DebloatResult {
        original_length: script.proof_length(),
        minimized_length: lines.len(),
        original_proof: original.join("\n"),
        minimized_proof: minimized.join("\n"),
        removed_line_indices: removed,
        substitutions,
        annotated_proof: annotated.join("\n"),
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::LocalOracle;

    const T: Duration = Duration::from_secs(5);

    #[test]
    fn minimal_proof_is_a_fixed_point() {
        let src = "import Mathlib\n\ntheorem t (x : ℕ) (h : x = 2) : x + 2 = 4 := by\n  rw [h]\n";
        let script = proof_model::parse_last_theorem(src).unwrap();
        let r = debloat(&LocalOracle::new(), &script, T).unwrap();
        assert_eq!(r.minimized_proof, "  rw [h]");
        assert!(r.removed_line_indices.is_empty());
        assert_eq!(r.passes, 1);
    }

    #[test]
    fn failing_input_is_rejected() {
        let src = "import Mathlib\n\ntheorem t (x : ℕ) (h : x = 2) : x + 2 = 5 := by\n  rw [h]\n";
        let script = proof_model::parse_last_theorem(src).unwrap();
        assert!(matches!(
            debloat(&LocalOracle::new(), &script, T),
            Err(DebloatError::NotProved(_))
        ));
    }
}
