//! Whole-dataset evaluation runs persisted under `runs/<run_id>/`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    AttemptSink, EvalAttempt, EvalConfig, EvalError, EvalLemma, EvalOutcome, Evaluator, FakeScript,
    ModelClient,
};
use crate::dataset::{Manifest, ManifestEntry};
use crate::repl::Oracle;

pub const CONFIG_FILE: &str = "config.json";
pub const ATTEMPTS_FILE: &str = "attempts.jsonl";
pub const OUTCOMES_FILE: &str = "outcomes.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignMode {
    Feedback,
    PassAtK,
}

/// Everything needed to resume a run, stored as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    pub mode: CampaignMode,
    /// Dataset root the run evaluates.
    pub dataset: PathBuf,
    pub eval: EvalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fake_script: Option<FakeScript>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A run directory on disk.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn config_path(&self) -> PathBuf {
        self.path.join(CONFIG_FILE)
    }

    pub fn attempts_path(&self) -> PathBuf {
        self.path.join(ATTEMPTS_FILE)
    }

    pub fn outcomes_path(&self) -> PathBuf {
        self.path.join(OUTCOMES_FILE)
    }

    pub fn report_dir(&self) -> PathBuf {
        self.path.join("report")
    }

    /// Creates a fresh run; refuses to reuse an existing one.
    pub fn create(&self, config: &RunConfig) -> Result<(), EvalError> {
        if self.config_path().exists() {
            return Err(EvalError::RunExists(self.path.clone()));
        }
        fs::create_dir_all(&self.path).map_err(io_err(&self.path))?;
        let mut text = serde_json::to_string_pretty(config).expect("run config serializes");
        text.push('\n');
        crate::dataset::write_atomic(&self.config_path(), text.as_bytes()).map_err(|e| {
            EvalError::Corrupt {
                path: self.config_path(),
                msg: e.to_string(),
            }
        })
    }

    pub fn load_config(&self) -> Result<RunConfig, EvalError> {
        let path = self.config_path();
        let text = fs::read_to_string(&path).map_err(|_| EvalError::NotARun(self.path.clone()))?;
        serde_json::from_str(&text).map_err(|e| EvalError::Corrupt {
            path,
            msg: e.to_string(),
        })
    }

    pub fn outcomes(&self) -> Result<Vec<EvalOutcome>, EvalError> {
        Ok(read_jsonl(&self.outcomes_path())?.0)
    }

    pub fn attempts(&self) -> Result<Vec<EvalAttempt>, EvalError> {
        Ok(read_jsonl(&self.attempts_path())?.0)
    }

    /// Drops a torn final record from both logs and the attempts of lemmas
    /// that never reached an outcome. Returns the finished lemma ids.
    pub fn recover(&self) -> Result<BTreeSet<String>, EvalError> {
        let (outcomes, torn_o) = read_jsonl::<EvalOutcome>(&self.outcomes_path())?;
        let done: BTreeSet<String> = outcomes.iter().map(|o| o.lemma_id.clone()).collect();
        if torn_o {
            tracing::warn!(
                "discarding torn final record in {}",
                self.outcomes_path().display()
            );
            rewrite_jsonl(&self.outcomes_path(), &outcomes)?;
        }
        let (attempts, torn_a) = read_jsonl::<EvalAttempt>(&self.attempts_path())?;
        let kept: Vec<&EvalAttempt> = attempts
            .iter()
            .filter(|a| done.contains(&a.lemma_id))
            .collect();
        if torn_a || kept.len() != attempts.len() {
            tracing::info!(
                dropped = attempts.len() - kept.len(),
                "dropping attempts of unfinished lemmas"
            );
            rewrite_jsonl(&self.attempts_path(), &kept)?;
        }
        Ok(done)
    }
}

/// Parses one record per line. A final line that does not parse is a torn
/// write and is reported through the flag; earlier bad lines are errors.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, bool), EvalError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), false)),
        Err(e) => return Err(io_err(path)(e)),
    };
    // A write cut short may end inside a multi-byte character.
    let text = String::from_utf8_lossy(&bytes);
    let lines: Vec<&str> = text.split('\n').collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if lines[i + 1..].iter().all(|l| l.trim().is_empty()) => return Ok((out, true)),
            Err(e) => {
                return Err(EvalError::Corrupt {
                    path: path.to_path_buf(),
                    msg: format!("line {}: {e}", i + 1),
                })
            }
        }
    }
    Ok((out, !text.is_empty() && !text.ends_with('\n')))
}

fn rewrite_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), EvalError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("records serialize"));
        text.push('\n');
    }
    crate::dataset::write_atomic(path, text.as_bytes()).map_err(|e| EvalError::Corrupt {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

struct JsonlAppender {
    path: PathBuf,
    file: Mutex<File>,
}

impl JsonlAppender {
    fn open(path: PathBuf) -> Result<Self, EvalError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    fn append<T: Serialize>(&self, record: &T) -> Result<(), EvalError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(io_err(&self.path))
    }
}

impl AttemptSink for JsonlAppender {
    fn record(&self, attempt: &EvalAttempt) -> Result<(), EvalError> {
        self.append(attempt)
    }
}

/// Prover views of the non-trivial manifest entries, in manifest order.
/// Entries whose files cannot be read or parsed are returned separately.
pub fn load_lemmas(root: &Path, manifest: &Manifest) -> (Vec<EvalLemma>, Vec<(String, String)>) {
    let mut lemmas = Vec::new();
    let mut failures = Vec::new();
    for entry in manifest.entries.iter().filter(|e| !e.trivial) {
        match load_entry(root, entry) {
            Ok(l) => lemmas.push(l),
            Err(msg) => failures.push((entry.lemma_id.clone(), msg)),
        }
    }
    (lemmas, failures)
}

fn load_entry(root: &Path, entry: &ManifestEntry) -> Result<EvalLemma, String> {
    let path = root.join(&entry.file);
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lemma = EvalLemma::from_source(&entry.source_problem, &text)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    lemma.id = entry.lemma_id.clone();
    Ok(lemma)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CampaignSummary {
    pub evaluated: usize,
    pub skipped: usize,
    /// Lemmas left without an outcome (oracle failure or shutdown).
    pub unfinished: Vec<String>,
    pub interrupted: bool,
    /// Per problem: (solved, total) over every outcome in the run.
    pub per_problem: BTreeMap<String, (usize, usize)>,
}

impl CampaignSummary {
    pub fn totals(&self) -> (usize, usize) {
        self.per_problem
            .values()
            .fold((0, 0), |(s, t), (a, b)| (s + a, t + b))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (problem, (s, t)) in &self.per_problem {
            out.push_str(&format!("{problem:<16} {}\n", fraction(*s, *t)));
        }
        let (s, t) = self.totals();
        out.push_str(&format!("{:<16} {}\n", "total", fraction(s, t)));
        out
    }
}

pub(crate) fn fraction(solved: usize, total: usize) -> String {
    let pct = if total == 0 {
        0.0
    } else {
        100.0 * solved as f64 / total as f64
    };
    format!("{solved}/{total} ({pct:.1}%)")
}

/// Evaluates every lemma without a persisted outcome, at most
/// `config.in_flight` at a time. Setting `shutdown` stops new lemmas from
/// starting; in-flight ones finish.
pub fn run_campaign(
    run: &RunDir,
    lemmas: &[EvalLemma],
    oracle: &dyn Oracle,
    model: &dyn ModelClient,
    config: &EvalConfig,
    mode: CampaignMode,
    shutdown: &AtomicBool,
    on_outcome: &(dyn Fn(&EvalOutcome) + Sync),
) -> Result<CampaignSummary, EvalError> {
    config.validate()?;
    fs::create_dir_all(&run.path).map_err(io_err(&run.path))?;
    let done = run.recover()?;
    let pending: Vec<&EvalLemma> = lemmas.iter().filter(|l| !done.contains(&l.id)).collect();
    let attempts = JsonlAppender::open(run.attempts_path())?;
    let outcomes = JsonlAppender::open(run.outcomes_path())?;
    let evaluator = Evaluator {
        oracle,
        model,
        config,
        sink: &attempts,
    };

    let next = AtomicUsize::new(0);
    let unfinished = Mutex::new(Vec::new());
    let fatal: Mutex<Option<EvalError>> = Mutex::new(None);
    let evaluated = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..config.in_flight.min(pending.len()) {
            scope.spawn(|| loop {
                if shutdown.load(Ordering::SeqCst)
                    || fatal.lock().unwrap_or_else(|p| p.into_inner()).is_some()
                {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(lemma) = pending.get(i) else { return };
                let result = match mode {
                    CampaignMode::Feedback => evaluator.run_feedback_loop(lemma),
                    CampaignMode::PassAtK => evaluator.run_pass_at_k(lemma),
                };
                match result {
                    Ok(outcome) => {
                        if let Err(e) = outcomes.append(&outcome) {
                            *fatal.lock().unwrap_or_else(|p| p.into_inner()) = Some(e);
                            return;
                        }
                        evaluated.fetch_add(1, Ordering::SeqCst);
                        on_outcome(&outcome);
                    }
                    Err(e @ EvalError::Io { .. }) => {
                        *fatal.lock().unwrap_or_else(|p| p.into_inner()) = Some(e);
                        return;
                    }
                    Err(e) => {
                        tracing::error!(lemma = %lemma.id, "lemma left unfinished: {e}");
                        unfinished
                            .lock()
                            .unwrap_or_else(|p| p.into_inner())
                            .push(lemma.id.clone());
                    }
                }
            });
        }
    });
    if let Some(e) = fatal.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }

    let mut unfinished = unfinished.into_inner().unwrap_or_else(|p| p.into_inner());
    let started = next.load(Ordering::SeqCst).min(pending.len());
    unfinished.extend(pending[started..].iter().map(|l| l.id.clone()));
    unfinished.sort();

    let problems: BTreeMap<&str, &str> = lemmas
        .iter()
        .map(|l| (l.id.as_str(), l.source_problem.as_str()))
        .collect();
    let mut per_problem: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for o in run.outcomes()? {
        let problem = problems
            .get(o.lemma_id.as_str())
            .copied()
            .unwrap_or("")
            .to_string();
        let e = per_problem.entry(problem).or_default();
        e.0 += usize::from(o.solved);
        e.1 += 1;
    }
    Ok(CampaignSummary {
        evaluated: evaluated.into_inner(),
        skipped: done.len(),
        interrupted: shutdown.load(Ordering::SeqCst) && !unfinished.is_empty(),
        unfinished,
        per_problem,
    })
}
