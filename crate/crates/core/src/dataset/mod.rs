//! On-disk lemma datasets: one `.lean` file per lemma, a JSONL manifest and
//! a summary document.
//!
//! ```text
//! <root>/lemmas/<source_problem>/<lemma_id>.lean
//! <root>/manifest.jsonl
//! <root>/manifest.summary.json
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use globset::Glob;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::length::{length_stats, LengthStats};
use crate::decompose::{ExtractedLemma, Rule};
use crate::proof_model::{self, ParseError};
use crate::repl::{Oracle, OracleError, OracleRequest, Status};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SUMMARY_FILE: &str = "manifest.summary.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("lemma `{0}` is not verified and cannot be exported")]
    UnverifiedLemma(String),
    #[error("duplicate lemma id `{0}`")]
    DuplicateId(String),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid manifest entry: {source}")]
    BadManifest {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("invalid glob `{0}`")]
    BadGlob(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub lemma_id: String,
    pub source_problem: String,
    pub topic: String,
    /// Relative to the dataset root, `/`-separated.
    pub file: String,
    pub proof_length: usize,
    pub rule: Rule,
    pub trivial: bool,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_name: String,
    pub lean_version: String,
    pub entries: Vec<ManifestEntry>,
    pub created_at: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemTotals {
    pub lemmas: usize,
    pub lines: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset_name: String,
    pub lean_version: String,
    pub tool_version: String,
    pub created_at: String,
    pub total_lemmas: usize,
    pub total_lines: usize,
    pub problems: BTreeMap<String, ProblemTotals>,
}

impl Manifest {
    pub fn summary(&self) -> Summary {
        let mut problems: BTreeMap<String, ProblemTotals> = BTreeMap::new();
        for e in &self.entries {
            let p = problems.entry(e.source_problem.clone()).or_default();
            p.lemmas += 1;
            p.lines += e.proof_length;
        }
        Summary {
            dataset_name: self.dataset_name.clone(),
            lean_version: self.lean_version.clone(),
            tool_version: self.tool_version.clone(),
            created_at: self.created_at.clone(),
            total_lemmas: self.entries.len(),
            total_lines: self.entries.iter().map(|e| e.proof_length).sum(),
            problems,
        }
    }

    /// Entries keyed by id.
    pub fn by_id(&self) -> HashMap<&str, &ManifestEntry> {
        self.entries
            .iter()
            .map(|e| (e.lemma_id.as_str(), e))
            .collect()
    }

    /// One JSON object per line, in entry order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
            out.push('\n');
        }
        out
    }

    /// Writes `manifest.jsonl` and `manifest.summary.json` under `root`.
    pub fn write(&self, root: &Path) -> Result<(), DatasetError> {
        write_atomic(&root.join(MANIFEST_FILE), self.to_jsonl().as_bytes())?;
        let mut summary =
            serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        summary.push('\n');
        write_atomic(&root.join(SUMMARY_FILE), summary.as_bytes())
    }

    /// Reads a dataset root written by [`Manifest::write`].
    pub fn load(root: &Path) -> Result<Self, DatasetError> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(line).map_err(|source| DatasetError::BadManifest {
                path: path.clone(),
                line: i + 1,
                source,
            })?;
            entries.push(e);
        }
        let summary: Option<Summary> = fs::read_to_string(root.join(SUMMARY_FILE))
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok());
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(match summary {
            Some(s) => Manifest {
                dataset_name: s.dataset_name,
                lean_version: s.lean_version,
                entries,
                created_at: s.created_at,
                tool_version: s.tool_version,
            },
            None => Manifest {
                dataset_name: name,
                lean_version: String::new(),
                entries,
                created_at: String::new(),
                tool_version: TOOL_VERSION.to_string(),
            },
        })
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Creation timestamp, pinned by `SOURCE_DATE_EPOCH` when set.
pub fn creation_time() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    pinned
        .unwrap_or_else(chrono::Utc::now)
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

#[derive(Debug, Clone, Default)]
pub struct ExportOptions {
    pub dataset_name: String,
    pub lean_version: String,
}

fn problem_of(lemma: &ExtractedLemma) -> String {
    if lemma.source_problem.is_empty() {
        lemma.source.theorem.clone()
    } else {
        lemma.source_problem.clone()
    }
}

/// Writes one file per lemma plus the manifest. Every lemma must be
/// verified; ids must be unique.
pub fn export_dataset(
    lemmas: &[ExtractedLemma],
    out_dir: &Path,
    opts: &ExportOptions,
) -> Result<Manifest, DatasetError> {
    if let Some(l) = lemmas.iter().find(|l| !l.verified) {
        return Err(DatasetError::UnverifiedLemma(l.id.clone()));
    }
    let mut sorted: Vec<&ExtractedLemma> = lemmas.iter().collect();
    sorted.sort_by(|a, b| (problem_of(a), &a.id).cmp(&(problem_of(b), &b.id)));
    let mut entries = Vec::with_capacity(sorted.len());
    for w in sorted.windows(2) {
        if w[0].id == w[1].id && problem_of(w[0]) == problem_of(w[1]) {
            return Err(DatasetError::DuplicateId(w[0].id.clone()));
        }
    }
    for lemma in sorted {
        let problem = problem_of(lemma);
        let file = format!("lemmas/{problem}/{}.lean", lemma.id);
        write_atomic(&out_dir.join(&file), lemma.source_text().as_bytes())?;
        entries.push(ManifestEntry {
            lemma_id: lemma.id.clone(),
            source_problem: problem,
            topic: lemma.topic.clone(),
            file,
            proof_length: lemma.proof_length,
            rule: lemma.rule,
            trivial: lemma.trivial,
            verified: lemma.verified,
        });
    }
    let manifest = Manifest {
        dataset_name: opts.dataset_name.clone(),
        lean_version: opts.lean_version.clone(),
        entries,
        created_at: creation_time(),
        tool_version: TOOL_VERSION.to_string(),
    };
    manifest.write(out_dir)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportFailure {
    pub file: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ImportReport {
    pub manifest: Manifest,
    pub failures: Vec<ImportFailure>,
    /// Verification status per lemma id when verification was requested.
    pub statuses: BTreeMap<String, Status>,
}

pub struct ImportOptions<'a> {
    pub glob: String,
    pub oracle: Option<&'a dyn Oracle>,
    pub timeout: Duration,
    pub dataset_name: Option<String>,
    pub lean_version: String,
}

impl Default for ImportOptions<'_> {
    fn default() -> Self {
        Self {
            glob: "**/*.lean".to_string(),
            oracle: None,
            timeout: Duration::from_secs(600),
            dataset_name: None,
            lean_version: String::new(),
        }
    }
}

/// Name and proof length of the last declaration in a lemma file. Term-mode
/// proofs count their non-blank, non-comment lines after `:=`.
pub fn lemma_file_info(source: &str) -> Result<(String, usize), ParseError> {
    match proof_model::parse_last_theorem(source) {
        Ok(script) => Ok((script.name.clone(), script.proof_length())),
        Err(ParseError::TermModeProof(_)) => {
            let decl = proof_model::list_declarations(source)
                .into_iter()
                .rfind(|d| d.keyword == "theorem" || d.keyword == "lemma")
                .ok_or(ParseError::NotFound(String::new()))?;
            let sig = proof_model::signature(source, &decl)?;
            let term = proof_model::lex::strip_comments(&source[sig.proof_start..]);
            let lines = term.lines().filter(|l| !l.trim().is_empty()).count();
            Ok((sig.name, lines.max(1)))
        }
        Err(e) => Err(e),
    }
}

/// Reads every lemma file under `dir` matching the glob. The source problem
/// is the file's parent directory name. Existing manifest metadata (topic,
/// rule, trivial) is kept for files it lists.
pub fn import_dataset(dir: &Path, opts: &ImportOptions<'_>) -> Result<ImportReport, DatasetError> {
    let matcher = Glob::new(&opts.glob)
        .map_err(|_| DatasetError::BadGlob(opts.glob.clone()))?
        .compile_matcher();
    let previous: HashMap<String, ManifestEntry> = Manifest::load(dir)
        .map(|m| m.entries.into_iter().map(|e| (e.file.clone(), e)).collect())
        .unwrap_or_default();

    let mut files: Vec<String> = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| DatasetError::Io {
            path: dir.to_path_buf(),
            source: e
                .into_io_error()
                .unwrap_or_else(|| std::io::Error::other("walk failed")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).expect("under root");
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if matcher.is_match(&rel) {
            files.push(rel);
        }
    }
    files.sort();

    let mut entries = Vec::new();
    let mut sources = Vec::new();
    let mut failures = Vec::new();
    for rel in files {
        let path = dir.join(&rel);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                failures.push(ImportFailure {
                    file: rel,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match lemma_file_info(&text) {
            Ok((name, proof_length)) => {
                let problem = Path::new(&rel)
                    .parent()
                    .and_then(|p| p.file_name())
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let prev = previous.get(&rel);
                entries.push(ManifestEntry {
                    lemma_id: name,
                    source_problem: problem,
                    topic: prev.map(|p| p.topic.clone()).unwrap_or_default(),
                    file: rel,
                    proof_length,
                    rule: prev.map(|p| p.rule).unwrap_or(Rule::Imported),
                    trivial: prev.map(|p| p.trivial).unwrap_or(false),
                    verified: prev.map(|p| p.verified).unwrap_or(false),
                });
                sources.push(text);
            }
            Err(e) => failures.push(ImportFailure {
                file: rel,
                reason: e.to_string(),
            }),
        }
    }

    let mut statuses = BTreeMap::new();
    if let Some(oracle) = opts.oracle {
        let verdicts: Vec<Result<Status, OracleError>> = sources
            .par_iter()
            .map(|s| {
                Ok(oracle
                    .verify(&OracleRequest::verify(s.clone(), opts.timeout))?
                    .status)
            })
            .collect();
        for (e, v) in entries.iter_mut().zip(verdicts) {
            let status = v?;
            e.verified = status == Status::Proved;
            if !e.verified {
                failures.push(ImportFailure {
                    file: e.file.clone(),
                    reason: format!("verification: {status}"),
                });
            }
            statuses.insert(e.lemma_id.clone(), status);
        }
    }

    let dataset_name = opts.dataset_name.clone().unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Ok(ImportReport {
        manifest: Manifest {
            dataset_name,
            lean_version: opts.lean_version.clone(),
            entries,
            created_at: creation_time(),
            tool_version: TOOL_VERSION.to_string(),
        },
        failures,
        statuses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub problems: BTreeMap<String, LengthStats>,
    pub total: LengthStats,
}

/// Proof-length statistics per source problem and overall.
pub fn dataset_stats(manifest: &Manifest) -> Result<DatasetStats, DatasetError> {
    if manifest.entries.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    let mut grouped: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for e in &manifest.entries {
        grouped
            .entry(e.source_problem.clone())
            .or_default()
            .push(e.proof_length);
    }
    let all: Vec<usize> = manifest.entries.iter().map(|e| e.proof_length).collect();
    let problems = grouped
        .into_iter()
        .map(|(p, lens)| (p, length_stats(&lens).expect("non-empty group")))
        .collect();
    Ok(DatasetStats {
        problems,
        total: length_stats(&all).expect("non-empty manifest"),
    })
}

impl DatasetStats {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<16} {:>7} {:>7} {:>6} {:>6} {:>7} {:>8}\n",
            "problem", "lemmas", "mean", "max", "min", "std", "lines"
        );
        let row = |name: &str, s: &LengthStats| {
            format!(
                "{:<16} {:>7} {:>7.1} {:>6} {:>6} {:>7.1} {:>8}\n",
                name, s.count, s.mean, s.max, s.min, s.std, s.total
            )
        };
        for (p, s) in &self.problems {
            out.push_str(&row(p, s));
        }
        out.push_str(&row("total", &self.total));
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    pub missing: Vec<String>,
    pub unparsable: Vec<String>,
    pub name_mismatch: Vec<String>,
    pub not_proved: Vec<(String, Status)>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty()
            && self.unparsable.is_empty()
            && self.name_mismatch.is_empty()
            && self.not_proved.is_empty()
    }
}

/// Re-checks that every manifest entry's file exists, parses, declares the
/// listed lemma and, for entries marked verified, still proves.
pub fn audit(
    root: &Path,
    oracle: Option<&dyn Oracle>,
    timeout: Duration,
) -> Result<AuditReport, DatasetError> {
    let manifest = Manifest::load(root)?;
    let mut report = AuditReport {
        checked: manifest.entries.len(),
        ..Default::default()
    };
    let mut to_verify = Vec::new();
    for e in &manifest.entries {
        let text = match fs::read_to_string(root.join(&e.file)) {
            Ok(t) => t,
            Err(_) => {
                report.missing.push(e.file.clone());
                continue;
            }
        };
        match lemma_file_info(&text) {
            Ok((name, _)) if name == e.lemma_id => {
                if e.verified {
                    to_verify.push((e.lemma_id.clone(), text));
                }
            }
            Ok(_) => report.name_mismatch.push(e.file.clone()),
            Err(_) => report.unparsable.push(e.file.clone()),
        }
    }
    if let Some(oracle) = oracle {
        let verdicts: Vec<Result<Status, OracleError>> = to_verify
            .par_iter()
            .map(|(_, s)| {
                Ok(oracle
                    .verify(&OracleRequest::verify(s.clone(), timeout))?
                    .status)
            })
            .collect();
        for ((id, _), v) in to_verify.iter().zip(verdicts) {
            let status = v?;
            if status != Status::Proved {
                report.not_proved.push((id.clone(), status));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::LemmaSource;

    fn lemma(id: &str, problem: &str, len: usize) -> ExtractedLemma {
        let proof: Vec<String> = (0..len).map(|_| "  skip".to_string()).collect();
        ExtractedLemma {
            id: id.into(),
            rule: Rule::Forward,
            param: 1,
            statement_text: format!("theorem {id} (x : ℕ) : x = x"),
            proof_text: proof.join("\n"),
            preamble: "import Mathlib\n\n".into(),
            verified: true,
            trivial: false,
            proof_length: len,
            source: LemmaSource {
                theorem: "t".into(),
                file: None,
            },
            source_problem: problem.into(),
            topic: "Algebra".into(),
        }
    }

    #[test]
    fn export_then_import_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let lemmas = vec![
            lemma("b_forward_001", "1997-P5", 3),
            lemma("a_forward_002", "1959-P1", 2),
        ];
        let opts = ExportOptions {
            dataset_name: "demo".into(),
            lean_version: "v4.17.0".into(),
        };
        let m = export_dataset(&lemmas, dir.path(), &opts).unwrap();
        assert_eq!(m.entries[0].file, "lemmas/1959-P1/a_forward_002.lean");
        let first = fs::read(dir.path().join(MANIFEST_FILE)).unwrap();
        export_dataset(&lemmas, dir.path(), &opts).unwrap();
        assert_eq!(first, fs::read(dir.path().join(MANIFEST_FILE)).unwrap());

        let imported = import_dataset(dir.path(), &ImportOptions::default()).unwrap();
        assert!(imported.failures.is_empty());
        let mut a = m.entries.clone();
        let mut b = imported.manifest.entries.clone();
        a.sort_by(|x, y| x.lemma_id.cmp(&y.lemma_id));
        b.sort_by(|x, y| x.lemma_id.cmp(&y.lemma_id));
        assert_eq!(a, b);
    }

    #[test]
    fn unverified_lemmas_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut l = lemma("x", "p", 2);
        l.verified = false;
        let opts = ExportOptions {
            dataset_name: "d".into(),
            lean_version: String::new(),
        };
        assert!(matches!(
            export_dataset(&[l], dir.path(), &opts),
            Err(DatasetError::UnverifiedLemma(_))
        ));
    }

    #[test]
    fn unparsable_file_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("p1")).unwrap();
        fs::write(
            dir.path().join("p1/good.lean"),
            "theorem good : True := by\n  trivial\n",
        )
        .unwrap();
        fs::write(dir.path().join("p1/bad.lean"), "-- nothing here\n").unwrap();
        let r = import_dataset(dir.path(), &ImportOptions::default()).unwrap();
        assert_eq!(r.manifest.entries.len(), 1);
        assert_eq!(r.manifest.entries[0].source_problem, "p1");
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].file, "p1/bad.lean");
    }

    #[test]
    fn stats_single_entry() {
        let m = Manifest {
            dataset_name: "d".into(),
            lean_version: String::new(),
            entries: vec![ManifestEntry {
                lemma_id: "a".into(),
                source_problem: "p".into(),
                topic: String::new(),
                file: "a.lean".into(),
                proof_length: 7,
                rule: Rule::Imported,
                trivial: false,
                verified: true,
            }],
            created_at: String::new(),
            tool_version: String::new(),
        };
        let s = dataset_stats(&m).unwrap();
        let p = &s.problems["p"];
        assert_eq!((p.mean, p.max, p.min, p.std), (7.0, 7, 7, 0.0));
        let empty = Manifest {
            entries: vec![],
            ..m
        };
        assert!(matches!(
            dataset_stats(&empty),
            Err(DatasetError::EmptyManifest)
        ));
    }

    #[test]
    fn term_mode_lemmas_are_counted() {
        let (name, len) = lemma_file_info("theorem t (h : 1 = 1) : 1 = 1 :=\n  h\n").unwrap();
        assert_eq!((name.as_str(), len), ("t", 1));
    }
}
