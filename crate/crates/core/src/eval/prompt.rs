//! Prompt templates and proof extraction from model responses.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::decompose::ExtractedLemma;
use crate::proof_model::{self, lex, ParseError};

pub const TEMPLATES: &[&str] = &["default", "feedback"];

/// What a prover sees of a lemma, plus the reference proof for bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalLemma {
    pub id: String,
    pub source_problem: String,
    /// Declaration header without `:=`, e.g. `theorem t (x : ℕ) : x = x`.
    pub statement_text: String,
    pub preamble: String,
    /// Reference tactic body from the dataset, indented under `by`.
    pub reference_proof: String,
    pub proof_length: usize,
}

impl EvalLemma {
    /// Builds the prover view from a lemma file's text.
    pub fn from_source(source_problem: &str, source: &str) -> Result<Self, ParseError> {
        match proof_model::parse_last_theorem(source) {
            Ok(script) => Ok(Self {
                id: script.name.clone(),
                source_problem: source_problem.to_string(),
                statement_text: script.statement(),
                preamble: script.preamble.clone(),
                reference_proof: proof_model::reindent_lines(&script.body, 2).join("\n"),
                proof_length: script.proof_length(),
            }),
            Err(ParseError::TermModeProof(_)) => {
                let decl = proof_model::list_declarations(source)
                    .into_iter()
                    .rfind(|d| d.keyword == "theorem" || d.keyword == "lemma")
                    .ok_or(ParseError::NotFound(String::new()))?;
                let sig = proof_model::signature(source, &decl)?;
                let term = lex::collapse_ws(&lex::strip_comments(&source[sig.proof_start..]));
                let (_, len) = crate::dataset::lemma_file_info(source)?;
                Ok(Self {
                    statement_text: proof_model::render_statement(
                        &decl.keyword,
                        &sig.name,
                        &sig.binders,
                        &sig.goal_text,
                    ),
                    id: sig.name,
                    source_problem: source_problem.to_string(),
                    preamble: source[..decl.line_start].to_string(),
                    reference_proof: format!("  exact ({term})"),
                    proof_length: len,
                })
            }
            Err(e) => Err(e),
        }
    }

    /// Lean source checking `proof` (a tactic body) against the statement.
    pub fn source_with(&self, proof: &str) -> String {
        let lines: Vec<String> = proof.lines().map(str::to_string).collect();
        proof_model::render_source(&self.preamble, &self.statement_text, &lines)
    }

    /// Name declared by the statement.
    pub fn theorem_name(&self) -> &str {
        self.statement_text.split_whitespace().nth(1).unwrap_or("")
    }
}

impl From<&ExtractedLemma> for EvalLemma {
    fn from(l: &ExtractedLemma) -> Self {
        Self {
            id: l.id.clone(),
            source_problem: l.source_problem.clone(),
            statement_text: l.statement_text.clone(),
            preamble: l.preamble.clone(),
            reference_proof: l.proof_text.clone(),
            proof_length: l.proof_length,
        }
    }
}

fn statement_block(lemma: &EvalLemma) -> String {
    let mut s = String::from("```lean\n");
    let imports: Vec<&str> = lemma
        .preamble
        .lines()
        .filter(|l| !l.trim().is_empty())
        .collect();
    if !imports.is_empty() {
        s.push_str(&imports.join("\n"));
        s.push_str("\n\n");
    }
    s.push_str(&lemma.statement_text);
    s.push_str(" := by\n  sorry\n```");
    s
}

/// Prompt text for `template_id`. The `feedback` template adds the error
/// digest of the previous attempt.
pub fn build_prompt(
    lemma: &EvalLemma,
    template_id: &str,
    feedback: Option<&str>,
) -> Result<String, EvalError> {
    let intro = "Prove the following lemma in Lean 4 with Mathlib.\n\
        Think step by step: first explain the theorem, then the approach you will take, and then the proof.";
    let format = "End your answer with exactly one fenced ```lean code block containing the complete theorem \
        statement and its tactic proof. Do not use `sorry`.";
    match template_id {
        "default" => Ok(format!(
            "{intro}\n\n{}\n\n{format}\n",
            statement_block(lemma)
        )),
        "feedback" => {
            let mut s = String::new();
            if let Some(digest) = feedback {
                s.push_str("Your previous proof did not compile. Lean reported:\n\n```\n");
                s.push_str(digest);
                s.push_str("\n```\n\nFix the proof.\n\n");
            }
            s.push_str(&format!(
                "{intro}\n\n{}\n\n{format}\n",
                statement_block(lemma)
            ));
            Ok(s)
        }
        other => Err(EvalError::UnknownTemplate(other.to_string())),
    }
}

fn code_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let t = line.trim_start();
        if t.starts_with("```") {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None => current = Some(Vec::new()),
            }
            continue;
        }
        if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    blocks
}

const NON_TACTIC_STARTS: &[&str] = &[
    "import",
    "open",
    "theorem",
    "lemma",
    "example",
    "def",
    "namespace",
    "section",
    "end",
    "set_option",
    "variable",
    "noncomputable",
    "universe",
    "#",
];

fn starts_with_tactic(block: &str) -> bool {
    let first = block
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("--") && !l.starts_with("/-"));
    match first {
        Some(l) => {
            let word = l.split_whitespace().next().unwrap_or("");
            !NON_TACTIC_STARTS
                .iter()
                .any(|w| word == *w || word.starts_with('#'))
        }
        None => false,
    }
}

/// Tactic body of the last usable fenced block: one that restates the
/// theorem (its header is stripped) or that starts with tactic syntax.
pub fn extract_proof(raw_response: &str, theorem_name: &str) -> Option<String> {
    for block in code_blocks(raw_response).into_iter().rev() {
        let mentions = lex::ident_tokens(&block)
            .iter()
            .any(|t| t.text == theorem_name)
            || lex::dotted_names(&block).iter().any(|n| n == theorem_name);
        if mentions {
            if let Some(body) = body_of_restated(&block, theorem_name) {
                return Some(body);
            }
        }
        if starts_with_tactic(&block) {
            let trimmed = block.trim_start();
            let text = trimmed
                .strip_prefix("by")
                .filter(|r| r.starts_with(char::is_whitespace))
                .unwrap_or(trimmed);
            let lines: Vec<&str> = text.lines().collect();
            let body = proof_model::reindent(&lines, 2);
            let body: Vec<String> = trim_blank_edges(body);
            if !body.is_empty() {
                return Some(body.join("\n"));
            }
        }
    }
    None
}

fn trim_blank_edges(mut lines: Vec<String>) -> Vec<String> {
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let start = lines
        .iter()
        .position(|l| !l.trim().is_empty())
        .unwrap_or(lines.len());
    lines.split_off(start)
}

fn body_of_restated(block: &str, theorem_name: &str) -> Option<String> {
    let decls = proof_model::list_declarations(block);
    let decl = decls
        .iter()
        .rev()
        .find(|d| d.name == theorem_name)
        .or_else(|| {
            decls
                .iter()
                .rev()
                .find(|d| d.keyword == "theorem" || d.keyword == "lemma" || d.keyword == "example")
        })?;
    match proof_model::parse_declaration(block, decl) {
        Ok(script) => Some(proof_model::reindent_lines(&script.body, 2).join("\n")),
        Err(ParseError::TermModeProof(_)) => {
            let sig = proof_model::signature(block, decl).ok()?;
            let end = decls
                .iter()
                .find(|d| d.line_start > decl.line_start)
                .map(|d| d.line_start)
                .unwrap_or(block.len());
            let term = lex::collapse_ws(&lex::strip_comments(&block[sig.proof_start..end]));
            (!term.is_empty()).then(|| format!("  exact ({term})"))
        }
        Err(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lemma() -> EvalLemma {
        EvalLemma::from_source(
            "p",
            "import Mathlib\n\ntheorem add_two (x : ℕ) (h : x = 2) : x + 2 = 4 := by\n  rw [h]\n",
        )
        .unwrap()
    }

    #[test]
    fn prompts_contain_statement_and_are_deterministic() {
        let l = lemma();
        let a = build_prompt(&l, "default", None).unwrap();
        assert!(a.contains("theorem add_two (x : ℕ) (h : x = 2) : x + 2 = 4 := by\n  sorry"));
        assert!(a.contains("step by step"));
        assert_eq!(a, build_prompt(&l, "default", None).unwrap());
        let f = build_prompt(
            &l,
            "feedback",
            Some("line 3, col 2: unknown identifier 'foo'"),
        )
        .unwrap();
        assert!(f.contains("unknown identifier 'foo'"));
        assert!(matches!(
            build_prompt(&l, "nope", None),
            Err(EvalError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn restated_theorem_header_is_stripped() {
        let resp = "Here is the idea.\n\n```lean\ntheorem add_two (x : ℕ) (h : x = 2) : x + 2 = 4 := by\n  subst h\n  norm_num\n```\n";
        assert_eq!(
            extract_proof(resp, "add_two").as_deref(),
            Some("  subst h\n  norm_num")
        );
    }

    #[test]
    fn no_blocks_means_absent() {
        assert_eq!(extract_proof("I cannot do this.", "add_two"), None);
    }

    #[test]
    fn last_block_wins() {
        let resp = "```lean\n-- sketch\nomega\n```\nFinal:\n```lean\ntheorem add_two (x : ℕ) (h : x = 2) : x + 2 = 4 := by\n  omega\n```";
        assert_eq!(extract_proof(resp, "add_two").as_deref(), Some("  omega"));
        let tactic_only = "```\nby\n  rw [h]\n```";
        assert_eq!(
            extract_proof(tactic_only, "add_two").as_deref(),
            Some("  rw [h]")
        );
    }

    #[test]
    fn unrelated_declarations_are_ignored() {
        let resp = "```lean\ndef helper : ℕ := 3\n```";
        assert_eq!(extract_proof(resp, "add_two"), None);
    }
}
