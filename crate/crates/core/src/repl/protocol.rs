//! Wire-level helpers: request shaping, response decoding, goal parsing.

use serde_json::Value;

use super::{Diagnostic, ProofState, Severity, Status};
use crate::proof_model::lex;

/// Splits the leading `import` block off `source`. Returns the import lines
/// (the base-environment key) and the source with those lines blanked, so
/// positions in diagnostics still refer to the original text.
pub fn split_imports(source: &str) -> (String, String) {
    let mut imports = Vec::new();
    let mut out = String::with_capacity(source.len());
    let mut in_header = true;
    for line in source.split_inclusive('\n') {
        let trimmed = line.trim();
        if in_header && trimmed.starts_with("import ") {
            imports.push(trimmed.to_string());
            if line.ends_with('\n') {
                out.push('\n');
            }
            continue;
        }
        if !(trimmed.is_empty() || trimmed.starts_with("--")) {
            in_header = false;
        }
        out.push_str(line);
    }
    (imports.join("\n"), out)
}

/// Diagnostics carried by a command response.
pub fn messages_of(resp: &Value) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if let Some(list) = resp.get("messages").and_then(Value::as_array) {
        for m in list {
            let severity = match m.get("severity").and_then(Value::as_str) {
                Some("error") => Severity::Error,
                Some("warning") => Severity::Warning,
                _ => Severity::Info,
            };
            let pos = m.get("pos");
            let field = |k: &str| {
                pos.and_then(|p| p.get(k))
                    .and_then(Value::as_u64)
                    .unwrap_or(0) as usize
            };
            out.push(Diagnostic {
                severity,
                line: field("line").max(1),
                column: field("column"),
                text: m
                    .get("data")
                    .and_then(Value::as_str)
                    .unwrap_or("")
                    .to_string(),
            });
        }
    }
    // Protocol-level failures come back as a bare `message`.
    if let Some(msg) = resp.get("message").and_then(Value::as_str) {
        if resp.get("env").is_none() {
            out.push(Diagnostic {
                severity: Severity::Error,
                line: 1,
                column: 0,
                text: msg.to_string(),
            });
        }
    }
    out
}

/// Number of `sorry` positions recorded in a command response.
pub fn sorry_count(resp: &Value) -> usize {
    resp.get("sorries")
        .and_then(Value::as_array)
        .map(Vec::len)
        .unwrap_or(0)
}

/// Verdict from diagnostics: proved iff no errors and no `sorry`; incomplete
/// if a `sorry` was seen or the only errors are unsolved goals.
pub fn classify(messages: &[Diagnostic], sorries: usize) -> Status {
    let errors: Vec<&Diagnostic> = messages
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    let sorry_warning = messages
        .iter()
        .any(|d| d.severity == Severity::Warning && d.text.contains("declaration uses 'sorry'"));
    if sorries > 0 || sorry_warning {
        return Status::Incomplete;
    }
    if errors.is_empty() {
        return Status::Proved;
    }
    if errors.iter().all(|d| d.text.starts_with("unsolved goals")) {
        Status::Incomplete
    } else {
        Status::Failed
    }
}

/// Parses one pretty-printed goal (`x y : ℕ` lines, then `⊢ target`).
pub fn parse_goal(text: &str) -> Option<(Vec<(String, String)>, String)> {
    let mut entries: Vec<String> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with("case ") && entries.is_empty() {
            continue;
        }
        if line.starts_with(' ') || line.starts_with('\t') {
            let last = entries.last_mut()?;
            last.push(' ');
            last.push_str(line.trim());
        } else {
            entries.push(line.to_string());
        }
    }
    let goal_line = entries.pop()?;
    let target = goal_line.strip_prefix('⊢')?.trim().to_string();
    let mut hyps = Vec::new();
    for e in entries {
        let colon = lex::find_type_colon(&e)?;
        let ty = lex::collapse_ws(&e[colon + 1..]);
        for name in e[..colon].split_whitespace() {
            hyps.push((name.to_string(), ty.clone()));
        }
    }
    Some((hyps, lex::collapse_ws(&target)))
}

/// Parses a list of goals separated by blank lines.
pub fn parse_goals(texts: &[&str]) -> Option<ProofState> {
    let mut state = ProofState::default();
    for (i, t) in texts.iter().enumerate() {
        let (hyps, goal) = parse_goal(t)?;
        if i == 0 {
            state.hypotheses = hyps;
        }
        state.goals.push(goal);
    }
    Some(state)
}

/// Splits a multi-goal dump (goals separated by blank lines).
pub fn split_goal_dump(text: &str) -> Vec<&str> {
    text.split("\n\n")
        .filter(|s| !s.trim().is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn imports_are_blanked_in_place() {
        let (key, body) =
            split_imports("import Mathlib\nimport Aesop\n\ntheorem t : True := by trivial\n");
        assert_eq!(key, "import Mathlib\nimport Aesop");
        assert_eq!(body, "\n\n\ntheorem t : True := by trivial\n");
    }

    #[test]
    fn classification_rules() {
        let err = |t: &str| Diagnostic {
            severity: Severity::Error,
            line: 1,
            column: 0,
            text: t.into(),
        };
        assert_eq!(classify(&[], 0), Status::Proved);
        assert_eq!(classify(&[], 1), Status::Incomplete);
        assert_eq!(
            classify(&[err("unsolved goals\n⊢ False")], 0),
            Status::Incomplete
        );
        assert_eq!(
            classify(
                &[
                    err("unsolved goals\n⊢ False"),
                    err("unknown identifier 'x'")
                ],
                0
            ),
            Status::Failed
        );
        let warn = Diagnostic {
            severity: Severity::Warning,
            line: 1,
            column: 0,
            text: "unused variable".into(),
        };
        assert_eq!(classify(&[warn], 0), Status::Proved);
    }

    #[test]
    fn goal_parsing_groups_and_continuations() {
        let text = "case h\nx y : ℕ\nh₀ : 0 < x ∧\n  0 < y\n⊢ y ^ 2 ∣ x";
        let (hyps, goal) = parse_goal(text).unwrap();
        assert_eq!(
            hyps,
            vec![
                ("x".to_string(), "ℕ".to_string()),
                ("y".to_string(), "ℕ".to_string()),
                ("h₀".to_string(), "0 < x ∧ 0 < y".to_string()),
            ]
        );
        assert_eq!(goal, "y ^ 2 ∣ x");
        assert!(parse_goal("x : ℕ").is_none());
    }

    #[test]
    fn repl_level_message_is_an_error() {
        let d = messages_of(&json!({"message": "Unknown environment."}));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Error);
    }
}
