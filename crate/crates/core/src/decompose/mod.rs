//! Lemma extraction from verified tactic proofs.
//!
//! Candidates come from two families. The structured family lifts each
//! top-level `have` into its own lemma and grants earlier ones back to the
//! original theorem. The unstructured family cuts the proof along its proof
//! states. Every candidate is checked by the oracle; only verified,
//! non-trivial, sufficiently long and distinct lemmas are exported.

pub mod structured;
pub mod unstructured;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proof_model::{self, lex, Binder, BinderKind, TheoremScript};
use crate::repl::{Oracle, OracleError, OracleRequest, ProofState, Status};

pub use unstructured::Skip;

/// Tactics tried one at a time by the triviality filter.
pub const DEFAULT_TRIVIAL_TACTICS: &[&str] = &[
    "hint",
    "linarith",
    "exact?",
    "simp",
    "omega",
    "ring",
    "norm_cast",
    "norm_num",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    HypothesisLift,
    CumulativeGrant,
    Forward,
    BackwardPair,
    BackwardPrefix,
    Imported,
}

impl Rule {
    pub const EXTRACTION: [Rule; 5] = [
        Rule::HypothesisLift,
        Rule::CumulativeGrant,
        Rule::Forward,
        Rule::BackwardPair,
        Rule::BackwardPrefix,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::HypothesisLift => "hypothesis_lift",
            Rule::CumulativeGrant => "cumulative_grant",
            Rule::Forward => "forward",
            Rule::BackwardPair => "backward_pair",
            Rule::BackwardPrefix => "backward_prefix",
            Rule::Imported => "imported",
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::EXTRACTION
            .into_iter()
            .chain([Rule::Imported])
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown rule `{s}`"))
    }
}

/// A synthesized statement and proof before naming and verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub rule: Rule,
    pub param: usize,
    pub binders: Vec<Binder>,
    pub goal_text: String,
    pub proof_lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaSource {
    pub theorem: String,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedLemma {
    pub id: String,
    pub rule: Rule,
    pub param: usize,
    /// `theorem <id> <binders> : <goal>`.
    pub statement_text: String,
    /// Tactic body, one line per entry, indented under `by`.
    pub proof_text: String,
    pub preamble: String,
    pub verified: bool,
    pub trivial: bool,
    pub proof_length: usize,
    pub source: LemmaSource,
    pub source_problem: String,
    pub topic: String,
}

impl ExtractedLemma {
    fn from_candidate(script: &TheoremScript, c: Candidate, meta: &SourceMeta) -> Self {
        let id = lemma_id(&script.name, c.rule, c.param);
        let statement_text =
            proof_model::render_statement("theorem", &id, &c.binders, &c.goal_text);
        let body = proof_model::build_body(&c.proof_lines);
        Self {
            rule: c.rule,
            param: c.param,
            statement_text,
            proof_text: c.proof_lines.join("\n"),
            preamble: script.preamble.clone(),
            verified: false,
            trivial: false,
            proof_length: proof_model::proof_length(&body),
            source: LemmaSource {
                theorem: script.name.clone(),
                file: script.source_path.clone(),
            },
            source_problem: meta.source_problem.clone(),
            topic: meta.topic.clone(),
            id,
        }
    }

    /// Complete Lean file for this lemma.
    pub fn source_text(&self) -> String {
        let lines: Vec<String> = self.proof_text.lines().map(str::to_string).collect();
        proof_model::render_source(&self.preamble, &self.statement_text, &lines)
    }

    /// The same statement closed by a single tactic.
    pub fn with_single_tactic(&self, tactic: &str) -> String {
        proof_model::render_source(
            &self.preamble,
            &self.statement_text,
            &[format!("  {tactic}")],
        )
    }

    pub fn script(&self) -> Result<TheoremScript, proof_model::ParseError> {
        proof_model::parse_theorem(&self.source_text(), &self.id)
    }
}

/// `<theorem>_<rule>_<param>` with a zero-padded parameter.
pub fn lemma_id(theorem: &str, rule: Rule, param: usize) -> String {
    format!("{theorem}_{}_{param:03}", rule.as_str())
}

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("theorem `{0}` has no top-level intermediate hypotheses")]
    NoIntermediateHypotheses(String),
    #[error("theorem `{name}` does not verify (status {status})")]
    SourceNotVerified { name: String, status: Status },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Structured,
    Unstructured,
    Both,
}

impl Strategy {
    fn structured(self) -> bool {
        matches!(self, Strategy::Structured | Strategy::Both)
    }

    fn unstructured(self) -> bool {
        matches!(self, Strategy::Unstructured | Strategy::Both)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SourceMeta {
    pub source_problem: String,
    pub topic: String,
}

#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    pub strategy: Strategy,
    pub timeout: Duration,
    pub trivial_timeout: Duration,
    pub trivial_tactics: Vec<String>,
    pub keep_trivial: bool,
    pub min_proof_lines: usize,
    /// Re-decompose exported lemmas longer than this many lines.
    pub recursive_threshold: Option<usize>,
    pub max_depth: usize,
    pub meta: SourceMeta,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::Both,
            timeout: Duration::from_secs(60),
            trivial_timeout: Duration::from_secs(60),
            trivial_tactics: DEFAULT_TRIVIAL_TACTICS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            keep_trivial: false,
            min_proof_lines: 2,
            recursive_threshold: None,
            max_depth: 2,
            meta: SourceMeta::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCounts {
    pub candidates: usize,
    pub verified: usize,
    pub exported: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub source: String,
    /// Top-level proof steps.
    pub n: usize,
    /// Top-level intermediate hypotheses.
    pub k: usize,
    pub per_rule: BTreeMap<Rule, RuleCounts>,
    pub notices: Vec<String>,
}

impl DecompositionReport {
    pub fn total(&self) -> RuleCounts {
        self.per_rule
            .values()
            .fold(RuleCounts::default(), |acc, c| RuleCounts {
                candidates: acc.candidates + c.candidates,
                verified: acc.verified + c.verified,
                exported: acc.exported + c.exported,
                skipped: acc.skipped + c.skipped,
            })
    }

    /// Upper bound on candidates for a rule, given n and k.
    pub fn bound(&self, rule: Rule) -> usize {
        let n = self.n;
        match rule {
            Rule::HypothesisLift | Rule::CumulativeGrant => self.k,
            Rule::Forward | Rule::BackwardPair => n.saturating_sub(2),
            Rule::BackwardPrefix => n.saturating_sub(3),
            Rule::Imported => 0,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}: n = {}, k = {}\n", self.source, self.n, self.k);
        out.push_str(&format!(
            "{:<18} {:>10} {:>9} {:>9} {:>8} {:>6}\n",
            "rule", "candidates", "verified", "exported", "skipped", "bound"
        ));
        for (rule, c) in &self.per_rule {
            out.push_str(&format!(
                "{:<18} {:>10} {:>9} {:>9} {:>8} {:>6}\n",
                rule.as_str(),
                c.candidates,
                c.verified,
                c.exported,
                c.skipped,
                self.bound(*rule)
            ));
        }
        let t = self.total();
        let n = self.n;
        out.push_str(&format!(
            "{:<18} {:>10} {:>9} {:>9} {:>8}\n",
            "total", t.candidates, t.verified, t.exported, t.skipped
        ));
        out.push_str(&format!(
            "bounds: structured 2k = {}, unstructured 3n-7 = {}\n",
            2 * self.k,
            (3 * n).saturating_sub(7)
        ));
        for notice in &self.notices {
            out.push_str(&format!("note: {notice}\n"));
        }
        out
    }
}

/// All candidates (with verification and triviality recorded), the export
/// list, and per-rule counts.
#[derive(Debug, Clone, Default)]
pub struct Decomposition {
    pub lemmas: Vec<ExtractedLemma>,
    pub exported: Vec<ExtractedLemma>,
    pub reports: Vec<DecompositionReport>,
}

/// Structured candidates as lemmas; exactly two per top-level `have`.
pub fn decompose_structured(
    script: &TheoremScript,
    meta: &SourceMeta,
) -> Result<Vec<ExtractedLemma>, DecomposeError> {
    if script.top_level_haves().is_empty() {
        return Err(DecomposeError::NoIntermediateHypotheses(
            script.name.clone(),
        ));
    }
    Ok(structured::candidates(script)
        .into_iter()
        .map(|c| ExtractedLemma::from_candidate(script, c, meta))
        .collect())
}

fn unstructured_rule(
    script: &TheoremScript,
    states: &[Option<ProofState>],
    meta: &SourceMeta,
    rule: Rule,
) -> Vec<ExtractedLemma> {
    unstructured::candidates(script, states)
        .candidates
        .into_iter()
        .filter(|c| c.rule == rule)
        .map(|c| ExtractedLemma::from_candidate(script, c, meta))
        .collect()
}

pub fn decompose_forward(
    script: &TheoremScript,
    states: &[Option<ProofState>],
    meta: &SourceMeta,
) -> Vec<ExtractedLemma> {
    unstructured_rule(script, states, meta, Rule::Forward)
}

pub fn decompose_backward_pair(
    script: &TheoremScript,
    states: &[Option<ProofState>],
    meta: &SourceMeta,
) -> Vec<ExtractedLemma> {
    unstructured_rule(script, states, meta, Rule::BackwardPair)
}

pub fn decompose_backward_prefix(
    script: &TheoremScript,
    states: &[Option<ProofState>],
    meta: &SourceMeta,
) -> Vec<ExtractedLemma> {
    unstructured_rule(script, states, meta, Rule::BackwardPrefix)
}

/// True iff one of `tactics`, alone, closes the lemma's goal. Timeouts and
/// crashes count as not closing it.
pub fn filter_trivial(
    oracle: &dyn Oracle,
    lemma: &ExtractedLemma,
    tactics: &[String],
    timeout: Duration,
) -> Result<bool, OracleError> {
    for tactic in tactics {
        let r = oracle.verify(&OracleRequest::verify(
            lemma.with_single_tactic(tactic),
            timeout,
        ))?;
        if r.proved() {
            tracing::debug!(lemma = %lemma.id, tactic, "closed by a single tactic");
            return Ok(true);
        }
    }
    Ok(false)
}

/// Statement with binder names replaced by `b0`, `b1`, ... and whitespace
/// collapsed; the lemma's own name is not part of it.
pub fn normalized_statement(lemma: &ExtractedLemma) -> String {
    let text = lemma.statement_text.trim();
    // Drop `theorem <name>`.
    let after_kw = text
        .split_once(char::is_whitespace)
        .map(|x| x.1)
        .unwrap_or("")
        .trim_start();
    let after_name = after_kw
        .split_once(char::is_whitespace)
        .map(|x| x.1)
        .unwrap_or("");
    normalize_signature(after_name)
}

fn normalize_signature(sig: &str) -> String {
    let (binders, goal) = match lex::find_type_colon(sig) {
        Some(c) => (&sig[..c], &sig[c + 1..]),
        None => ("", sig),
    };
    let binders = proof_model::parse_binders(binders).unwrap_or_default();
    let mut canon: BTreeMap<String, String> = BTreeMap::new();
    let mut expanded = Vec::new();
    for b in &binders {
        for name in &b.names {
            let fresh = format!("b{}", canon.len());
            expanded.push((b.kind, fresh.clone(), b.type_text.clone()));
            canon.insert(name.clone(), fresh);
        }
    }
    let rename = |s: &str| canon.get(s).cloned();
    let mut out = String::new();
    for (kind, name, ty) in expanded {
        let ty = lex::collapse_ws(&lex::rename_idents(&ty, &rename));
        let (open, close) = match kind {
            BinderKind::Explicit => ("(", ")"),
            BinderKind::Implicit => ("{", "}"),
            BinderKind::StrictImplicit => ("⦃", "⦄"),
            BinderKind::Instance => ("[", "]"),
        };
        out.push_str(&format!("{open}{name} : {ty}{close} "));
    }
    out.push_str(": ");
    out.push_str(&lex::collapse_ws(&lex::rename_idents(goal, &rename)));
    out
}

/// Keeps the first lemma of every normalized statement, preserving order.
pub fn dedup(lemmas: Vec<ExtractedLemma>) -> Vec<ExtractedLemma> {
    let mut seen = std::collections::HashSet::new();
    lemmas
        .into_iter()
        .filter(|l| seen.insert(normalized_statement(l)))
        .collect()
}

/// Runs the selected strategies on a verified script, gates candidates
/// through the oracle, filters trivial and short ones and deduplicates.
pub fn decompose(
    oracle: &dyn Oracle,
    script: &TheoremScript,
    opts: &DecomposeOptions,
) -> Result<Decomposition, DecomposeError> {
    let source = proof_model::print_theorem(script);
    let check = oracle.verify(&OracleRequest::verify(source, opts.timeout))?;
    if !check.proved() {
        return Err(DecomposeError::SourceNotVerified {
            name: script.name.clone(),
            status: check.status,
        });
    }
    let mut result = decompose_level(oracle, script, opts)?;

    if let Some(threshold) = opts.recursive_threshold {
        let mut frontier: Vec<ExtractedLemma> = result.exported.clone();
        for _depth in 1..opts.max_depth {
            let mut next = Vec::new();
            for lemma in frontier.iter().filter(|l| l.proof_length > threshold) {
                let Ok(sub_script) = lemma.script() else {
                    continue;
                };
                let sub = decompose_level(oracle, &sub_script, opts)?;
                next.extend(sub.exported.iter().cloned());
                result.lemmas.extend(sub.lemmas);
                result.reports.extend(sub.reports);
            }
            if next.is_empty() {
                break;
            }
            result.exported.extend(next.iter().cloned());
            frontier = next;
        }
        result.exported = dedup(std::mem::take(&mut result.exported));
    }
    Ok(result)
}

fn decompose_level(
    oracle: &dyn Oracle,
    script: &TheoremScript,
    opts: &DecomposeOptions,
) -> Result<Decomposition, DecomposeError> {
    let meta = &opts.meta;
    let mut report = DecompositionReport {
        source: script.name.clone(),
        n: script.steps().len(),
        k: script.top_level_haves().len(),
        ..Default::default()
    };
    for rule in Rule::EXTRACTION {
        let wanted = match rule {
            Rule::HypothesisLift | Rule::CumulativeGrant => opts.strategy.structured(),
            _ => opts.strategy.unstructured(),
        };
        if wanted {
            report.per_rule.insert(rule, RuleCounts::default());
        }
    }

    let mut lemmas = Vec::new();
    if opts.strategy.structured() {
        match decompose_structured(script, meta) {
            Ok(l) => lemmas.extend(l),
            Err(DecomposeError::NoIntermediateHypotheses(_)) => {
                report
                    .notices
                    .push("structured strategy skipped: no top-level `have` steps".to_string());
            }
            Err(e) => return Err(e),
        }
    }
    if opts.strategy.unstructured() {
        if report.n < 3 {
            report.notices.push(format!(
                "unstructured strategy needs at least 3 steps, found {}",
                report.n
            ));
        } else {
            let states = match oracle.collect_states(script, opts.timeout) {
                Ok(s) => s,
                Err(OracleError::StateUnavailable(m)) => {
                    report
                        .notices
                        .push(format!("proof states unavailable: {m}"));
                    vec![None; report.n + 1]
                }
                Err(e) => return Err(e.into()),
            };
            let ex = unstructured::candidates(script, &states);
            for (rule, _, _) in &ex.skipped {
                report.per_rule.entry(*rule).or_default().skipped += 1;
            }
            lemmas.extend(
                ex.candidates
                    .into_iter()
                    .map(|c| ExtractedLemma::from_candidate(script, c, meta)),
            );
        }
    }

    // Oracle gate, fanned out over the pool.
    let verdicts: Vec<Result<bool, OracleError>> = lemmas
        .par_iter()
        .map(|l| {
            let r = oracle.verify(&OracleRequest::verify(l.source_text(), opts.timeout))?;
            Ok(r.proved())
        })
        .collect();
    for (lemma, v) in lemmas.iter_mut().zip(verdicts) {
        lemma.verified = v?;
    }

    let trivial: Vec<Result<bool, OracleError>> = lemmas
        .par_iter()
        .map(|l| {
            if l.verified && l.proof_length >= opts.min_proof_lines {
                filter_trivial(oracle, l, &opts.trivial_tactics, opts.trivial_timeout)
            } else {
                Ok(false)
            }
        })
        .collect();
    for (lemma, t) in lemmas.iter_mut().zip(trivial) {
        lemma.trivial = t?;
    }

    let eligible: Vec<ExtractedLemma> = lemmas
        .iter()
        .filter(|l| {
            l.verified
                && l.proof_length >= opts.min_proof_lines
                && (opts.keep_trivial || !l.trivial)
        })
        .cloned()
        .collect();
    let exported = dedup(eligible);

    for l in &lemmas {
        let c = report.per_rule.entry(l.rule).or_default();
        c.candidates += 1;
        c.verified += l.verified as usize;
    }
    for l in &exported {
        report.per_rule.entry(l.rule).or_default().exported += 1;
    }
    Ok(Decomposition {
        lemmas,
        exported,
        reports: vec![report],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::LocalOracle;

    const K2: &str = "import Mathlib\n\ntheorem two (x : ℕ) (h₀ : x = 3) : x + 2 = 5 := by\n  have h₁ : x + 1 = 4 := by\n    omega\n  have h₂ : x + 2 = 5 := by\n    omega\n  exact h₂\n";

    fn lemma_with(statement: &str) -> ExtractedLemma {
        ExtractedLemma {
            id: "x".into(),
            rule: Rule::Forward,
            param: 1,
            statement_text: statement.into(),
            proof_text: String::new(),
            preamble: String::new(),
            verified: true,
            trivial: false,
            proof_length: 2,
            source: LemmaSource {
                theorem: "t".into(),
                file: None,
            },
            source_problem: String::new(),
            topic: String::new(),
        }
    }

    #[test]
    fn ids_are_zero_padded() {
        assert_eq!(
            lemma_id("imo_1997_p5", Rule::BackwardPair, 7),
            "imo_1997_p5_backward_pair_007"
        );
    }

    #[test]
    fn structured_candidates_shape() {
        let script = proof_model::parse_last_theorem(K2).unwrap();
        let lemmas = decompose_structured(&script, &SourceMeta::default()).unwrap();
        assert_eq!(lemmas.len(), 4);
        assert_eq!(
            lemmas[0].statement_text,
            "theorem two_hypothesis_lift_001 (x : ℕ) (h₀ : x = 3) : x + 1 = 4"
        );
        assert_eq!(lemmas[0].proof_text, "  omega");
        assert_eq!(
            lemmas[1].statement_text,
            "theorem two_hypothesis_lift_002 (x : ℕ) (h₀ : x = 3) (h₁ : x + 1 = 4) : x + 2 = 5"
        );
        assert_eq!(lemmas[3].proof_text, "  exact h₂");
        assert_eq!(
            lemmas[2].proof_text,
            "  have h₂ : x + 2 = 5 := by\n    omega\n  exact h₂"
        );
        assert!(lemmas[3].proof_length <= lemmas[2].proof_length);
    }

    #[test]
    fn no_haves_is_an_error() {
        let script = proof_model::parse_last_theorem("theorem t : True := by trivial").unwrap();
        assert!(matches!(
            decompose_structured(&script, &SourceMeta::default()),
            Err(DecomposeError::NoIntermediateHypotheses(_))
        ));
    }

    #[test]
    fn dedup_ignores_hypothesis_names() {
        let a = lemma_with("theorem a (x : ℕ) (h : x = 1) : x + 0 = 1");
        let b = lemma_with("theorem b (y : ℕ) (hy : y = 1) : y + 0 = 1");
        let c = lemma_with("theorem c (y : ℕ) (hy : y = 2) : y + 0 = 2");
        let kept = dedup(vec![a, b, c]);
        assert_eq!(
            kept.iter()
                .map(|l| l.statement_text.chars().nth(8).unwrap())
                .collect::<String>(),
            "ac"
        );
    }

    #[test]
    fn trivial_filter() {
        let oracle = LocalOracle::new();
        let mut l = lemma_with("theorem t (x : ℕ) (h : x = 2) : x + 2 = 4");
        l.preamble = "import Mathlib\n".into();
        let tactics: Vec<String> = DEFAULT_TRIVIAL_TACTICS
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert!(filter_trivial(&oracle, &l, &tactics, Duration::from_secs(5)).unwrap());
        assert!(!filter_trivial(&oracle, &l, &[], Duration::from_secs(5)).unwrap());
    }

    #[test]
    fn pipeline_on_structured_fixture() {
        let oracle = LocalOracle::new();
        let script = proof_model::parse_last_theorem(K2).unwrap();
        let opts = DecomposeOptions {
            strategy: Strategy::Structured,
            keep_trivial: true,
            min_proof_lines: 1,
            ..Default::default()
        };
        let d = decompose(&oracle, &script, &opts).unwrap();
        let r = &d.reports[0];
        assert_eq!(r.per_rule[&Rule::HypothesisLift].candidates, 2);
        assert_eq!(r.per_rule[&Rule::CumulativeGrant].candidates, 2);
        assert!(d.lemmas.iter().all(|l| l.verified), "{:#?}", d.lemmas);
    }
}
