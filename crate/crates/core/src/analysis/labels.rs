//! Error-taxonomy labels: automatic labeling from verdicts and merging of
//! human labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::name_index::NameIndex;
use crate::eval::EvalAttempt;
use crate::proof_model::lex;
use crate::repl::{Severity, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    NoError,
    Hallucination,
    WrongApproach,
    WrongImplementation,
    Incomplete,
    MinorError,
    /// The natural-language proof is correct (human judgment).
    NlCorrect,
    /// The natural-language proof matches the Lean proof (human judgment).
    NlLeanMatch,
}

impl Flag {
    pub const ALL: [Flag; 8] = [
        Flag::NoError,
        Flag::Hallucination,
        Flag::WrongApproach,
        Flag::WrongImplementation,
        Flag::Incomplete,
        Flag::MinorError,
        Flag::NlCorrect,
        Flag::NlLeanMatch,
    ];

    pub const ERRORS: [Flag; 5] = [
        Flag::Hallucination,
        Flag::WrongApproach,
        Flag::WrongImplementation,
        Flag::Incomplete,
        Flag::MinorError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::NoError => "no_error",
            Flag::Hallucination => "hallucination",
            Flag::WrongApproach => "wrong_approach",
            Flag::WrongImplementation => "wrong_implementation",
            Flag::Incomplete => "incomplete",
            Flag::MinorError => "minor_error",
            Flag::NlCorrect => "nl_correct",
            Flag::NlLeanMatch => "nl_lean_match",
        }
    }

    pub fn is_error(self) -> bool {
        Self::ERRORS.contains(&self)
    }
}

impl std::str::FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Flag::ALL
            .into_iter()
            .find(|f| f.as_str() == s.trim())
            .ok_or_else(|| format!("unknown flag `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Auto,
    Manual,
    /// Awaiting human judgment; the value is a placeholder.
    ManualPending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagValue {
    pub value: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelChange {
    pub flag: Flag,
    pub previous: Option<FlagValue>,
    pub value: bool,
    pub annotator: String,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorLabelSet {
    pub flags: BTreeMap<Flag, FlagValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<LabelChange>,
}

impl ErrorLabelSet {
    pub fn get(&self, flag: Flag) -> bool {
        self.flags.get(&flag).is_some_and(|v| v.value)
    }

    pub fn provenance(&self, flag: Flag) -> Option<Provenance> {
        self.flags.get(&flag).map(|v| v.provenance)
    }

    fn set(&mut self, flag: Flag, value: bool, provenance: Provenance) {
        self.flags.insert(flag, FlagValue { value, provenance });
    }

    /// Error flags currently set.
    pub fn errors(&self) -> Vec<Flag> {
        Flag::ERRORS.into_iter().filter(|f| self.get(*f)).collect()
    }
}

/// Diagnostic fragments counted as minor errors: wrong argument counts, type
/// mismatches and failed unification at an application.
pub const MINOR_ERROR_PATTERNS: &[&str] = &[
    "type mismatch",
    "application type mismatch",
    "function expected",
    "failed to unify",
    "too many arguments",
    "too many explicit arguments",
    "insufficient number of arguments",
];

const BINDING_TACTICS: &[&str] = &[
    "have",
    "let",
    "set",
    "intro",
    "intros",
    "rintro",
    "obtain",
    "rcases",
    "cases",
    "induction",
    "fun",
    "ext",
    "by_contra",
];

/// Names a proof binds itself: `have` names, `intro` variables, pattern
/// variables after `with`/`obtain`, and `fun` binders.
pub fn locally_defined(proof: &str) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let code = lex::strip_comments(proof);
    for line in code.lines() {
        let t = line
            .trim_start()
            .trim_start_matches(['·', '.'])
            .trim_start();
        let word = t.split_whitespace().next().unwrap_or("");
        let binding_line = BINDING_TACTICS.contains(&word);
        let with_at = t.find(" with ");
        for (i, piece) in t.split("fun ").enumerate() {
            if i == 0 && !binding_line && with_at.is_none() {
                continue;
            }
            let stop = [":=", " : ", "=>", "←", "↦"]
                .iter()
                .filter_map(|s| piece.find(s))
                .min()
                .unwrap_or(piece.len());
            let region = if i == 0 && !binding_line {
                &piece[with_at.unwrap_or(0)..]
            } else {
                &piece[..stop]
            };
            names.extend(
                lex::ident_tokens(region)
                    .iter()
                    .map(|tok| tok.text.to_string()),
            );
        }
    }
    names
}

/// Identifier named by an unknown-identifier or unknown-constant diagnostic.
pub fn unknown_name(text: &str) -> Option<&str> {
    for prefix in ["unknown identifier '", "unknown constant '"] {
        if let Some(rest) = text.find(prefix).map(|i| &text[i + prefix.len()..]) {
            let line = rest.lines().next().unwrap_or("");
            return line.rfind('\'').map(|end| &line[..end]);
        }
    }
    None
}

/// Labels derivable from the verdict alone. Judgment calls (approach and
/// implementation) stay pending for a human.
pub fn auto_label(attempt: &EvalAttempt, index: &NameIndex) -> ErrorLabelSet {
    let mut labels = ErrorLabelSet::default();
    let proved = attempt.verdict.status == Status::Proved;
    labels.set(Flag::NoError, proved, Provenance::Auto);
    if proved {
        for f in Flag::ERRORS {
            labels.set(f, false, Provenance::Auto);
        }
        return labels;
    }
    let local = attempt
        .extracted_proof
        .as_deref()
        .map(locally_defined)
        .unwrap_or_default();
    let errors: Vec<&str> = attempt
        .verdict
        .messages
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.text.as_str())
        .collect();
    let hallucination = errors
        .iter()
        .filter_map(|t| unknown_name(t))
        .any(|name| !index.contains(name) && !local.contains(name));
    let minor = errors
        .iter()
        .any(|t| MINOR_ERROR_PATTERNS.iter().any(|p| t.contains(p)));
    labels.set(Flag::Hallucination, hallucination, Provenance::Auto);
    labels.set(
        Flag::Incomplete,
        attempt.verdict.status == Status::Incomplete,
        Provenance::Auto,
    );
    labels.set(Flag::MinorError, minor, Provenance::Auto);
    labels.set(Flag::WrongApproach, false, Provenance::ManualPending);
    labels.set(Flag::WrongImplementation, false, Provenance::ManualPending);
    labels
}

/// Labels for every attempt of a run, keyed by attempt id.
pub type LabelStore = BTreeMap<String, ErrorLabelSet>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LabelRecord {
    attempt_id: String,
    labels: ErrorLabelSet,
}

pub const LABELS_FILE: &str = "labels.jsonl";

pub fn write_labels(path: &Path, store: &LabelStore) -> std::io::Result<()> {
    let mut text = String::new();
    for (id, labels) in store {
        let rec = LabelRecord {
            attempt_id: id.clone(),
            labels: labels.clone(),
        };
        text.push_str(&serde_json::to_string(&rec).expect("labels serialize"));
        text.push('\n');
    }
    crate::dataset::write_atomic(path, text.as_bytes()).map_err(std::io::Error::other)
}

pub fn read_labels(path: &Path) -> std::io::Result<LabelStore> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(LabelStore::new()),
        Err(e) => return Err(e),
    };
    let mut store = LabelStore::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let rec: LabelRecord = serde_json::from_str(line).map_err(std::io::Error::other)?;
        store.insert(rec.attempt_id, rec.labels);
    }
    Ok(store)
}

/// Auto labels for `attempts`, keeping any manual flags already in `previous`.
pub fn label_attempts(
    attempts: &[EvalAttempt],
    index: &NameIndex,
    previous: &LabelStore,
) -> LabelStore {
    let mut store = LabelStore::new();
    for a in attempts {
        let mut labels = auto_label(a, index);
        if let Some(old) = previous.get(&a.attempt_id) {
            for (flag, v) in &old.flags {
                if v.provenance == Provenance::Manual {
                    labels.flags.insert(*flag, *v);
                }
            }
            labels.history = old.history.clone();
        }
        store.insert(a.attempt_id.clone(), labels);
    }
    store
}

/// Attempts whose `no_error` label disagrees with the oracle verdict.
pub fn audit_labels(attempts: &[EvalAttempt], store: &LabelStore) -> Vec<String> {
    attempts
        .iter()
        .filter_map(|a| {
            let proved = a.verdict.status == Status::Proved;
            let labels = store.get(&a.attempt_id)?;
            (labels.get(Flag::NoError) != proved || (proved && !labels.errors().is_empty())).then(
                || {
                    format!(
                        "{}: verdict {} but labels {:?}",
                        a.attempt_id,
                        a.verdict.status,
                        labels.errors()
                    )
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("row {row}: unknown attempt id `{attempt_id}`")]
    UnknownAttemptId { row: usize, attempt_id: String },
    #[error("row {row}: {msg}")]
    IntegrityError { row: usize, msg: String },
    #[error("row {row}: {msg}")]
    BadRow { row: usize, msg: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub applied: usize,
    pub rejected: Vec<LabelError>,
}

#[derive(Debug, Deserialize)]
struct ManualRow {
    attempt_id: String,
    flag: String,
    value: String,
    #[serde(default)]
    annotator: String,
    #[serde(default)]
    note: String,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Merges a delimiter-separated labels file (header `attempt_id, flag,
/// value, annotator, note`; tab-separated unless the file ends in `.csv`).
/// Bad rows are rejected and reported; the rest apply.
pub fn ingest_manual_labels(
    path: &Path,
    attempts: &[EvalAttempt],
    store: &mut LabelStore,
) -> Result<IngestReport, csv::Error> {
    let delimiter = if path.extension().is_some_and(|e| e == "csv") {
        b','
    } else {
        b'\t'
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let status: HashMap<&str, Status> = attempts
        .iter()
        .map(|a| (a.attempt_id.as_str(), a.verdict.status))
        .collect();
    let mut report = IngestReport::default();
    for (i, row) in reader.deserialize::<ManualRow>().enumerate() {
        let row_no = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(LabelError::BadRow {
                    row: row_no,
                    msg: e.to_string(),
                });
                continue;
            }
        };
        match apply_row(row_no, &row, &status, store) {
            Ok(()) => report.applied += 1,
            Err(e) => report.rejected.push(e),
        }
    }
    Ok(report)
}

fn apply_row(
    row_no: usize,
    row: &ManualRow,
    status: &HashMap<&str, Status>,
    store: &mut LabelStore,
) -> Result<(), LabelError> {
    let bad = |msg: String| LabelError::BadRow { row: row_no, msg };
    let Some(&verdict) = status.get(row.attempt_id.as_str()) else {
        return Err(LabelError::UnknownAttemptId {
            row: row_no,
            attempt_id: row.attempt_id.clone(),
        });
    };
    let flag: Flag = row.flag.parse().map_err(bad)?;
    let value =
        parse_bool(&row.value).ok_or_else(|| bad(format!("invalid value `{}`", row.value)))?;
    let proved = verdict == Status::Proved;
    let integrity = |msg: &str| LabelError::IntegrityError {
        row: row_no,
        msg: msg.to_string(),
    };
    if flag == Flag::NoError && value != proved {
        return Err(integrity(&format!(
            "no_error = {value} contradicts the oracle verdict `{verdict}` for {}",
            row.attempt_id
        )));
    }
    if flag.is_error() && value && proved {
        return Err(integrity(&format!(
            "{} cannot be set on proved attempt {}",
            flag.as_str(),
            row.attempt_id
        )));
    }
    let labels = store.entry(row.attempt_id.clone()).or_default();
    let previous = labels.flags.get(&flag).copied();
    labels.history.push(LabelChange {
        flag,
        previous,
        value,
        annotator: row.annotator.clone(),
        note: row.note.clone(),
    });
    labels.set(flag, value, Provenance::Manual);
    Ok(())
}
