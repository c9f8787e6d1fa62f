//! Accuracy tables and data series computed from a run directory.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::labels::{self, Flag, LabelStore, LABELS_FILE};
use super::length::{bucket_of, LengthBucket, BUCKETS};
use super::name_index::NameIndex;
use crate::dataset::Manifest;
use crate::eval::campaign::{fraction, CampaignMode, RunDir};
use crate::eval::{EvalAttempt, EvalError, EvalOutcome};
use crate::proof_model;

pub const TABLES: [&str; 5] = [
    "accuracy_by_problem",
    "feedback_progression",
    "error_types",
    "length_buckets",
    "length_histogram",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Run(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BucketRow {
    pub bucket: LengthBucket,
    pub solved: usize,
    pub total: usize,
}

impl BucketRow {
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.solved as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LengthAccuracy {
    pub rows: Vec<BucketRow>,
    /// Lemmas left out: no usable dataset length, or not in the manifest.
    pub missing_length: Vec<String>,
}

/// Solved fraction per canonical bucket of the dataset's own proof lengths.
/// Every non-trivial manifest entry with a bucketed length counts in a
/// denominator; lemmas without an outcome count as unsolved.
pub fn accuracy_by_length(outcomes: &[EvalOutcome], manifest: &Manifest) -> LengthAccuracy {
    let solved: HashMap<&str, bool> = outcomes
        .iter()
        .map(|o| (o.lemma_id.as_str(), o.solved))
        .collect();
    let mut rows: Vec<BucketRow> = BUCKETS
        .iter()
        .map(|b| BucketRow {
            bucket: *b,
            solved: 0,
            total: 0,
        })
        .collect();
    let mut missing = Vec::new();
    for e in manifest.entries.iter().filter(|e| !e.trivial) {
        match bucket_of(e.proof_length) {
            Some(b) => {
                let row = rows
                    .iter_mut()
                    .find(|r| r.bucket == b)
                    .expect("canonical bucket");
                row.total += 1;
                row.solved +=
                    usize::from(solved.get(e.lemma_id.as_str()).copied().unwrap_or(false));
            }
            None => missing.push(e.lemma_id.clone()),
        }
    }
    let by_id = manifest.by_id();
    missing.extend(
        outcomes
            .iter()
            .filter(|o| !by_id.contains_key(o.lemma_id.as_str()))
            .map(|o| o.lemma_id.clone()),
    );
    for id in &missing {
        tracing::warn!(lemma = %id, "no dataset proof length; excluded from length buckets");
    }
    LengthAccuracy {
        rows,
        missing_length: missing,
    }
}

/// One rendered table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub text: String,
    pub json: Value,
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        (1000.0 * n as f64 / d as f64).round() / 10.0
    }
}

fn text_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out.push_str(&line(
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    ));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

/// Attempts that stand as the model's answer: the last round of each
/// feedback conversation, or every pass@k sample.
fn final_attempts<'a>(
    outcomes: &[EvalOutcome],
    attempts: &'a HashMap<&str, &'a EvalAttempt>,
) -> Vec<&'a EvalAttempt> {
    let mut out = Vec::new();
    for o in outcomes {
        let mut last_per_sample: BTreeMap<usize, &EvalAttempt> = BTreeMap::new();
        for id in &o.attempts {
            if let Some(a) = attempts.get(id.as_str()) {
                let slot = last_per_sample.entry(a.sample_index).or_insert(a);
                if a.round >= slot.round {
                    *slot = a;
                }
            }
        }
        out.extend(last_per_sample.into_values());
    }
    out
}

fn proof_lines(proof: &str) -> usize {
    let texts: Vec<String> = proof.lines().map(str::to_string).collect();
    proof_model::proof_length(&proof_model::build_body(&texts))
}

/// Builds all five tables. Labels come from the run's `labels.jsonl` when
/// present, otherwise from automatic labeling against `index`.
pub fn build_report(
    run: &RunDir,
    manifest: &Manifest,
    index: &NameIndex,
) -> Result<Vec<Table>, ReportError> {
    let config = run.load_config()?;
    let mut outcomes = run.outcomes()?;
    outcomes.sort_by(|a, b| a.lemma_id.cmp(&b.lemma_id));
    let mut attempts = run.attempts()?;
    attempts.sort_by(|a, b| a.attempt_id.cmp(&b.attempt_id));
    let by_attempt: HashMap<&str, &EvalAttempt> = attempts
        .iter()
        .map(|a| (a.attempt_id.as_str(), a))
        .collect();
    let model = config.eval.model_id.clone();

    let label_path = run.path.join(LABELS_FILE);
    let store: LabelStore = match labels::read_labels(&label_path) {
        Ok(s) if !s.is_empty() => s,
        Ok(_) => labels::label_attempts(&attempts, index, &LabelStore::new()),
        Err(source) => {
            return Err(ReportError::Io {
                path: label_path,
                source,
            })
        }
    };

    let by_id = manifest.by_id();
    let mut tables = Vec::new();

    // Per-problem accuracy.
    let mut per_problem: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for e in manifest.entries.iter().filter(|e| !e.trivial) {
        per_problem.entry(e.source_problem.as_str()).or_default().1 += 1;
    }
    for o in outcomes.iter().filter(|o| o.solved) {
        if let Some(e) = by_id.get(o.lemma_id.as_str()) {
            per_problem.entry(e.source_problem.as_str()).or_default().0 += 1;
        }
    }
    let (ts, tt) = per_problem
        .values()
        .fold((0, 0), |(s, t), (a, b)| (s + a, t + b));
    let mut rows: Vec<Vec<String>> = per_problem
        .iter()
        .map(|(p, (s, t))| vec![p.to_string(), t.to_string(), fraction(*s, *t)])
        .collect();
    rows.push(vec!["total".into(), tt.to_string(), fraction(ts, tt)]);
    tables.push(Table {
        name: TABLES[0],
        text: text_table(&["problem", "lemmas", &model], &rows),
        json: json!({
            "model": model,
            "rows": per_problem.iter().map(|(p, (s, t))| json!({"problem": p, "lemmas": t, "solved": s, "percent": pct(*s, *t)})).collect::<Vec<_>>(),
            "total": {"lemmas": tt, "solved": ts, "percent": pct(ts, tt)},
        }),
    });

    // Accuracy as rounds (or samples) accumulate.
    let n = outcomes.len();
    let steps: Vec<(String, usize)> = match config.mode {
        CampaignMode::Feedback => (0..=config.eval.max_feedback_rounds)
            .map(|r| {
                let label = if r == 0 {
                    "zero-shot".to_string()
                } else {
                    format!("after {r} rounds")
                };
                (
                    label,
                    outcomes
                        .iter()
                        .filter(|o| o.solved_at_round.is_some_and(|s| s <= r))
                        .count(),
                )
            })
            .collect(),
        CampaignMode::PassAtK => (1..=config.eval.samples_k)
            .map(|k| {
                (
                    format!("pass@{k}"),
                    outcomes
                        .iter()
                        .filter(|o| o.solved_at_sample.is_some_and(|s| s < k))
                        .count(),
                )
            })
            .collect(),
    };
    let rows: Vec<Vec<String>> = steps
        .iter()
        .map(|(l, s)| vec![l.clone(), fraction(*s, n)])
        .collect();
    tables.push(Table {
        name: TABLES[1],
        text: text_table(&["stage", &model], &rows),
        json: json!({
            "model": model,
            "mode": config.mode,
            "lemmas": n,
            "rows": steps.iter().map(|(l, s)| json!({"stage": l, "solved": s, "percent": pct(*s, n)})).collect::<Vec<_>>(),
        }),
    });

    // Error types over final attempts, in both counting conventions.
    let finals = final_attempts(&outcomes, &by_attempt);
    let total = finals.len();
    let mut per_type: BTreeMap<Flag, usize> = BTreeMap::new();
    let mut per_proof: BTreeMap<Flag, f64> = BTreeMap::new();
    let mut no_error = 0;
    let mut unlabeled = 0;
    for a in &finals {
        let l = store.get(&a.attempt_id).cloned().unwrap_or_default();
        if l.get(Flag::NoError) {
            no_error += 1;
            continue;
        }
        let errs = l.errors();
        if errs.is_empty() {
            unlabeled += 1;
        }
        for f in &errs {
            *per_type.entry(*f).or_default() += 1;
            *per_proof.entry(*f).or_default() += 1.0 / errs.len() as f64;
        }
    }
    let share = |x: f64| {
        if total == 0 {
            0.0
        } else {
            (1000.0 * x / total as f64).round() / 10.0
        }
    };
    let mut rows = vec![vec![
        "no_error".to_string(),
        no_error.to_string(),
        format!("{:.1}", pct(no_error, total)),
        format!("{:.1}", pct(no_error, total)),
    ]];
    let mut json_rows = vec![
        json!({"type": "no_error", "count": no_error, "per_type_percent": pct(no_error, total), "per_proof_percent": pct(no_error, total)}),
    ];
    for f in Flag::ERRORS {
        let c = per_type.get(&f).copied().unwrap_or(0);
        let w = per_proof.get(&f).copied().unwrap_or(0.0);
        rows.push(vec![
            f.as_str().into(),
            c.to_string(),
            format!("{:.1}", pct(c, total)),
            format!("{:.1}", share(w)),
        ]);
        json_rows.push(json!({"type": f.as_str(), "count": c, "per_type_percent": pct(c, total), "per_proof_percent": share(w)}));
    }
    rows.push(vec![
        "unlabeled".into(),
        unlabeled.to_string(),
        format!("{:.1}", pct(unlabeled, total)),
        format!("{:.1}", pct(unlabeled, total)),
    ]);
    json_rows.push(json!({"type": "unlabeled", "count": unlabeled, "per_type_percent": pct(unlabeled, total), "per_proof_percent": pct(unlabeled, total)}));
    tables.push(Table {
        name: TABLES[2],
        text: format!(
            "{}\nper_type: share of final attempts carrying each flag (a proof counts once per type).\n\
             per_proof: each proof counts once, split evenly across its flags.\n",
            text_table(&["type", "count", "per_type_%", "per_proof_%"], &rows)
        ),
        json: json!({"model": model, "final_attempts": total, "rows": json_rows}),
    });

    // Accuracy by dataset proof length.
    let acc = accuracy_by_length(&outcomes, manifest);
    let rows: Vec<Vec<String>> = acc
        .rows
        .iter()
        .map(|r| {
            vec![
                r.bucket.label(),
                r.total.to_string(),
                fraction(r.solved, r.total),
            ]
        })
        .collect();
    tables.push(Table {
        name: TABLES[3],
        text: text_table(&["length", "lemmas", &model], &rows),
        json: json!({
            "model": model,
            "rows": acc.rows.iter().map(|r| json!({"lower": r.bucket.lower, "upper": r.bucket.upper, "lemmas": r.total, "solved": r.solved, "percent": pct(r.solved, r.total)})).collect::<Vec<_>>(),
            "missing_length": acc.missing_length,
        }),
    });

    // Length distributions: all dataset proofs, dataset proofs of solved
    // lemmas, and the model's verified proofs.
    let mut series: BTreeMap<usize, [usize; 3]> = BTreeMap::new();
    for e in manifest.entries.iter().filter(|e| !e.trivial) {
        series.entry(e.proof_length).or_default()[0] += 1;
    }
    for o in outcomes.iter().filter(|o| o.solved) {
        if let Some(e) = by_id.get(o.lemma_id.as_str()) {
            series.entry(e.proof_length).or_default()[1] += 1;
        }
        let proof = o
            .attempts
            .iter()
            .filter_map(|id| by_attempt.get(id.as_str()))
            .find(|a| a.verdict.proved())
            .and_then(|a| a.extracted_proof.as_deref());
        if let Some(p) = proof {
            series.entry(proof_lines(p)).or_default()[2] += 1;
        }
    }
    let rows: Vec<Vec<String>> = series
        .iter()
        .map(|(len, c)| {
            vec![
                len.to_string(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
            ]
        })
        .collect();
    let col = |i: usize| -> BTreeMap<String, usize> {
        series
            .iter()
            .filter(|(_, c)| c[i] > 0)
            .map(|(l, c)| (l.to_string(), c[i]))
            .collect()
    };
    tables.push(Table {
        name: TABLES[4],
        text: text_table(
            &["length", "dataset", "solved_dataset", "model_proofs"],
            &rows,
        ),
        json: json!({"dataset": col(0), "solved_dataset": col(1), "model_proofs": col(2)}),
    });
    Ok(tables)
}

/// Writes `<name>.txt` and `<name>.json` per table under the run's
/// `report/` directory and returns the written paths.
pub fn write_report(run: &RunDir, tables: &[Table]) -> Result<Vec<PathBuf>, ReportError> {
    let dir = run.report_dir();
    fs::create_dir_all(&dir).map_err(|source| ReportError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut paths = Vec::new();
    for t in tables {
        let mut json = serde_json::to_string_pretty(&t.json).expect("report serializes");
        json.push('\n');
        for (ext, bytes) in [("txt", t.text.as_bytes()), ("json", json.as_bytes())] {
            let path = dir.join(format!("{}.{ext}", t.name));
            crate::dataset::write_atomic(&path, bytes).map_err(|e| ReportError::Io {
                path: path.clone(),
                source: std::io::Error::other(e),
            })?;
            paths.push(path);
        }
    }
    Ok(paths)
}
