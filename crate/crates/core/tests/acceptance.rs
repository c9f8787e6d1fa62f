//! Acceptance checks run against the REPL simulator. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any attainable check fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use lemmaforge::analysis::{auto_label, build_name_index, build_report, debloat, Flag, NameIndex};
use lemmaforge::dataset::{self, ImportOptions, Manifest, ManifestEntry};
use lemmaforge::decompose::{decompose, filter_trivial, DecomposeOptions, Rule, Strategy};
use lemmaforge::eval::campaign::{CampaignMode, RunConfig, RunDir};
use lemmaforge::eval::model::{FakeBehavior, FakeModel, FakeScript};
use lemmaforge::eval::{EvalAttempt, EvalConfig, EvalLemma, EvalOutcome, Evaluator, MemorySink};
use lemmaforge::proof_model::{parse_last_theorem, print_theorem, render_source};
use lemmaforge::repl::{Oracle, OracleRequest, Status};
use lemmaforge::sim::LocalOracle;

const T: Duration = Duration::from_secs(30);
const BIN: &str = env!("CARGO_BIN_EXE_lemmaforge");
/// Directory of the released lemma files, when available locally.
const RELEASED_ENV: &str = "LEMMAFORGE_RELEASED_DATASET";

enum Verdict {
    Pass(String),
    Fail(String),
    /// The input the criterion needs is not present here.
    Unavailable(String),
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Result<Verdict>) -> bool {
    let start = Instant::now();
    let verdict = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => v,
        Ok(Err(e)) => Verdict::Fail(format!("{e:#}")),
        Err(p) => Verdict::Fail(
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default(),
        ),
    };
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail, fatal) = match verdict {
        Verdict::Pass(d) => ("PASS", d, false),
        Verdict::Fail(d) => ("FAIL", d, true),
        Verdict::Unavailable(d) => ("FAIL", format!("unavailable: {d}"), false),
    };
    println!("{tag} {n:>2} {name} ({secs:.1}s): {detail}");
    fatal
}

fn opts(strategy: Strategy) -> DecomposeOptions {
    DecomposeOptions {
        strategy,
        keep_trivial: true,
        min_proof_lines: 1,
        timeout: T,
        trivial_timeout: T,
        ..Default::default()
    }
}

fn decomposition_bounds() -> Result<Verdict> {
    let start = Instant::now();
    let pool = common::sim_pool(4);
    let mut totals = Vec::new();
    for n in 3..=20 {
        let script = parse_last_theorem(&common::chain_source(&format!("chain{n}"), n))?;
        ensure!(script.proof_length() == n);
        let d = decompose(&pool, &script, &opts(Strategy::Unstructured))?;
        let r = &d.reports[0];
        let c = |rule| r.per_rule.get(&rule).map_or(0, |c| c.candidates);
        let (f, p, b) = (
            c(Rule::Forward),
            c(Rule::BackwardPair),
            c(Rule::BackwardPrefix),
        );
        ensure!(
            f <= n - 2 && p <= n - 2 && b <= n - 3,
            "n = {n}: forward {f}, pair {p}, prefix {b}"
        );
        let total = r.total().candidates;
        ensure!(total <= 3 * n - 7, "n = {n}: total {total}");
        ensure!(d.exported.len() <= total);
        totals.push((n, total));
    }
    let at = |n| {
        totals
            .iter()
            .find(|(m, _)| *m == n)
            .map(|(_, t)| *t)
            .unwrap()
    };
    ensure!(at(3) <= 2, "n = 3 gave {}", at(3));
    ensure!(at(4) <= 5, "n = 4 gave {}", at(4));
    ensure!(
        start.elapsed() < Duration::from_secs(300),
        "took {:?}",
        start.elapsed()
    );
    Ok(Verdict::Pass(format!(
        "n = 3..20 within bounds; n = 3 -> {}, n = 4 -> {}, n = 20 -> {}",
        at(3),
        at(4),
        at(20)
    )))
}

fn structured_counts() -> Result<Verdict> {
    let pool = common::sim_pool(2);
    let mut seen = Vec::new();
    for k in 1..=5 {
        let script = parse_last_theorem(&common::structured_source(&format!("s{k}"), k))?;
        let d = decompose(&pool, &script, &opts(Strategy::Structured))?;
        let got = d.reports[0].total().candidates;
        ensure!(got == 2 * k, "k = {k}: {got} candidates");
        if k == 4 {
            ensure!(
                script.proof_length() == 13,
                "k = 4 proof has {} lines",
                script.proof_length()
            );
            ensure!(got == 8);
        }
        seen.push(got);
    }
    Ok(Verdict::Pass(format!(
        "candidates for k = 1..5: {seen:?}; k = 4, n = 13 -> 8"
    )))
}

fn soundness() -> Result<Verdict> {
    let dir = tempfile::tempdir()?;
    let mut lemmas = Vec::new();
    {
        let pool = common::sim_pool(4);
        let mut sources: Vec<String> = (4..=10)
            .map(|n| common::chain_source(&format!("sc{n}"), n))
            .collect();
        sources.push(common::structured_source("ss3", 3));
        sources.push(common::case_analysis_source("scase"));
        for src in sources {
            let script = parse_last_theorem(&src)?;
            for keep_trivial in [false, true] {
                let o = DecomposeOptions {
                    keep_trivial,
                    ..opts(Strategy::Both)
                };
                lemmas.extend(decompose(&pool, &script, &o)?.exported);
            }
        }
    }
    let lemmas = lemmaforge::decompose::dedup(lemmas);
    ensure!(!lemmas.is_empty());
    let manifest = dataset::export_dataset(&lemmas, dir.path(), &Default::default())?;
    let fresh = common::sim_pool(4);
    let mut failed = Vec::new();
    for e in &manifest.entries {
        let text = std::fs::read_to_string(dir.path().join(&e.file))?;
        if !fresh.verify(&OracleRequest::verify(text, T))?.proved() {
            failed.push(e.lemma_id.clone());
        }
    }
    ensure!(
        failed.is_empty(),
        "{} of {} exported lemmas failed: {failed:?}",
        failed.len(),
        manifest.entries.len()
    );
    Ok(Verdict::Pass(format!(
        "{} / {} exported lemmas re-verified",
        manifest.entries.len(),
        manifest.entries.len()
    )))
}

fn triviality() -> Result<Verdict> {
    let pool = common::sim_pool(2);
    let tactics: Vec<String> = lemmaforge::decompose::DEFAULT_TRIVIAL_TACTICS
        .iter()
        .map(|s| s.to_string())
        .collect();
    let as_lemma = |src: &str| -> Result<lemmaforge::decompose::ExtractedLemma> {
        let s = parse_last_theorem(src)?;
        Ok(lemmaforge::decompose::ExtractedLemma {
            id: s.name.clone(),
            rule: Rule::Imported,
            param: 0,
            statement_text: s.statement(),
            proof_text: lemmaforge::proof_model::reindent_lines(&s.body, 2).join("\n"),
            preamble: s.preamble.clone(),
            verified: true,
            trivial: false,
            proof_length: s.proof_length(),
            source: lemmaforge::decompose::LemmaSource {
                theorem: s.name.clone(),
                file: None,
            },
            source_problem: String::new(),
            topic: String::new(),
        })
    };
    let omega = as_lemma(&common::omega_closable_source("o"))?;
    ensure!(
        filter_trivial(&pool, &omega, &tactics, T)?,
        "omega-closable goal was kept"
    );
    let case = as_lemma(&common::case_analysis_source("cases15"))?;
    ensure!(case.proof_length == 15);
    ensure!(pool
        .verify(&OracleRequest::verify(case.source_text(), T))?
        .proved());
    ensure!(
        !filter_trivial(&pool, &case, &tactics, T)?,
        "case-analysis lemma was dropped"
    );
    Ok(Verdict::Pass(
        "omega fixture excluded; 15-line case analysis retained".into(),
    ))
}

fn fake_for(lemma: &EvalLemma, behavior: FakeBehavior) -> FakeModel {
    let refs = HashMap::from([(
        lemma.id.clone(),
        (lemma.statement_text.clone(), lemma.reference_proof.clone()),
    )]);
    FakeModel::new(
        FakeScript {
            default: behavior,
            lemmas: BTreeMap::new(),
        },
        refs,
    )
}

fn feedback_contract() -> Result<Verdict> {
    let lemma = EvalLemma::from_source("p", &common::chain_lemma("fb", 3))?;
    let oracle = LocalOracle::new();
    let cfg = EvalConfig {
        retry_backoff_ms: 1,
        verify_timeout_s: 30.0,
        ..Default::default()
    };
    ensure!(cfg.max_feedback_rounds == 10);
    for r in [0, 1, 5, 10] {
        let model = fake_for(
            &lemma,
            FakeBehavior {
                solve_at_round: Some(r),
                ..Default::default()
            },
        );
        let sink = MemorySink::default();
        let out = Evaluator {
            oracle: &oracle,
            model: &model,
            config: &cfg,
            sink: &sink,
        }
        .run_feedback_loop(&lemma)?;
        ensure!(
            out.solved_at_round == Some(r),
            "r = {r}: solved at {:?}",
            out.solved_at_round
        );
        ensure!(
            sink.attempts().len() == r + 1,
            "r = {r}: {} attempts",
            sink.attempts().len()
        );
    }
    let model = fake_for(&lemma, FakeBehavior::default());
    let sink = MemorySink::default();
    let out = Evaluator {
        oracle: &oracle,
        model: &model,
        config: &cfg,
        sink: &sink,
    }
    .run_feedback_loop(&lemma)?;
    ensure!(
        !out.solved && sink.attempts().len() == 11,
        "always-wrong: {} attempts",
        sink.attempts().len()
    );
    Ok(Verdict::Pass(
        "r in {0,1,5,10} -> r+1 attempts; always-wrong -> 11".into(),
    ))
}

/// `1985-p6`, `imo_1985_p6` and similar names as `1985-P6`.
fn problem_key(name: &str) -> String {
    let lower = name.to_lowercase();
    let year: String = lower
        .chars()
        .filter(|c| c.is_ascii_digit())
        .take(4)
        .collect();
    let p = lower.rfind('p').map(|i| {
        lower[i + 1..]
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .collect::<String>()
    });
    match p {
        Some(p) if year.len() == 4 && !p.is_empty() => format!("{year}-P{p}"),
        _ => name.to_string(),
    }
}

fn check_released(manifest: &Manifest, expected_total: usize) -> Result<String> {
    let stats = dataset::dataset_stats(manifest)?;
    let by_key: BTreeMap<String, &lemmaforge::analysis::LengthStats> = stats
        .problems
        .iter()
        .map(|(k, v)| (problem_key(k), v))
        .collect();
    let get = |k: &str| {
        by_key
            .get(k)
            .copied()
            .with_context(|| format!("problem {k} not found"))
    };
    ensure!(
        stats.total.count == expected_total,
        "total {} lemmas",
        stats.total.count
    );
    ensure!(
        get("1985-P6")?.count == 427,
        "1985-P6 has {}",
        get("1985-P6")?.count
    );
    ensure!(
        get("1959-P1")?.count == 4,
        "1959-P1 has {}",
        get("1959-P1")?.count
    );
    let p5 = get("1997-P5")?;
    ensure!(
        (p5.mean - 12.4).abs() <= 0.05 && p5.max == 85,
        "1997-P5 mean {:.3} max {}",
        p5.mean,
        p5.max
    );
    ensure!(
        get("1965-P2")?.max == 158,
        "1965-P2 max {}",
        get("1965-P2")?.max
    );
    Ok(format!(
        "{} lemmas over {} problems",
        stats.total.count,
        stats.problems.len()
    ))
}

fn released_dataset() -> Result<Verdict> {
    // The mechanism on a synthetic layout: per-problem counts and length
    // statistics come from the files alone.
    let dir = tempfile::tempdir()?;
    for (problem, lens) in [("imo_1959_p1", vec![2, 3, 4, 7]), ("1985-p6", vec![1])] {
        for (i, n) in lens.iter().enumerate() {
            let name = format!("lemma_{}_{i}", problem.replace('-', "_"));
            let path = dir.path().join(problem).join(format!("{name}.lean"));
            std::fs::create_dir_all(path.parent().unwrap())?;
            std::fs::write(path, common::chain_lemma(&name, *n))?;
        }
    }
    let report = dataset::import_dataset(dir.path(), &ImportOptions::default())?;
    ensure!(report.failures.is_empty(), "{:?}", report.failures);
    let stats = dataset::dataset_stats(&report.manifest)?;
    let p1 = &stats.problems["imo_1959_p1"];
    ensure!(
        p1.count == 4 && p1.max == 7 && p1.min == 2 && p1.mean == 4.0,
        "synthetic stats {p1:?}"
    );
    ensure!(problem_key("imo_1959_p1") == "1959-P1" && problem_key("1985-p6") == "1985-P6");

    let Some(root) = std::env::var_os(RELEASED_ENV).map(PathBuf::from) else {
        return Ok(Verdict::Unavailable(format!(
            "released lemma files not present (set {RELEASED_ENV}); import/stats mechanism checked on a synthetic layout"
        )));
    };
    let report = dataset::import_dataset(&root, &ImportOptions::default())?;
    ensure!(
        report.failures.is_empty(),
        "{} files failed to parse",
        report.failures.len()
    );
    Ok(Verdict::Pass(check_released(&report.manifest, 1329)?))
}

fn length_buckets() -> Result<Verdict> {
    // Lemma counts per bucket and synthetic solved counts; expected values
    // worked by hand: 71/497 = 14.29 -> 14.3, 51/204 = 25.0, 13/169 = 7.69
    // -> 7.7, 0/103 = 0.0, 32/128 = 25.0, 21/210 = 10.0, 9/18 = 50.0.
    let fixture = [
        (1, 497, 71),
        (3, 204, 51),
        (6, 169, 13),
        (11, 103, 0),
        (16, 128, 32),
        (26, 210, 21),
        (101, 18, 9),
    ];
    let expected = ["14.3", "25.0", "7.7", "0.0", "25.0", "10.0", "50.0"];
    let mut entries = Vec::new();
    let mut outcomes = Vec::new();
    for (b, (len, total, solved)) in fixture.iter().enumerate() {
        for i in 0..*total {
            let id = format!("b{b}_{i:03}");
            entries.push(ManifestEntry {
                lemma_id: id.clone(),
                source_problem: "P".into(),
                topic: String::new(),
                file: format!("lemmas/P/{id}.lean"),
                proof_length: len + i % 2,
                rule: Rule::Imported,
                trivial: false,
                verified: true,
            });
            outcomes.push(EvalOutcome {
                lemma_id: id,
                model_id: "m".into(),
                solved: i < *solved,
                solved_at_round: (i < *solved).then_some(0),
                solved_at_sample: None,
                attempts: Vec::new(),
                error: None,
            });
        }
    }
    let manifest = Manifest {
        dataset_name: "buckets".into(),
        lean_version: String::new(),
        entries,
        created_at: String::new(),
        tool_version: String::new(),
    };
    let acc = lemmaforge::analysis::accuracy_by_length(&outcomes, &manifest);
    ensure!(acc.rows.len() == 7 && acc.missing_length.is_empty());
    for ((row, (_, total, solved)), want) in acc.rows.iter().zip(&fixture).zip(expected) {
        ensure!(
            row.total == *total && row.solved == *solved,
            "{}: {}/{}",
            row.bucket.label(),
            row.solved,
            row.total
        );
        ensure!(
            format!("{:.1}", row.percent()) == want,
            "{}: {:.3}",
            row.bucket.label(),
            row.percent()
        );
    }

    // The rendered table carries the same numbers.
    let dir = tempfile::tempdir()?;
    let run = RunDir::new(dir.path().join("run"));
    run.create(&RunConfig {
        run_id: "buckets".into(),
        mode: CampaignMode::Feedback,
        dataset: dir.path().into(),
        eval: EvalConfig {
            model_id: "m".into(),
            ..Default::default()
        },
        fake_script: None,
    })?;
    let lines: Vec<String> = outcomes
        .iter()
        .map(|o| serde_json::to_string(o).unwrap() + "\n")
        .collect();
    std::fs::write(run.outcomes_path(), lines.concat())?;
    let tables = build_report(&run, &manifest, &NameIndex::default())?;
    let text = &tables
        .iter()
        .find(|t| t.name == "length_buckets")
        .context("no length table")?
        .text;
    for ((_, total, solved), want) in fixture.iter().zip(expected) {
        let cell = format!("{solved}/{total} ({want}%)");
        ensure!(text.contains(&cell), "missing {cell} in\n{text}");
    }
    Ok(Verdict::Pass(format!("7 buckets: {}", expected.join(", "))))
}

fn debloat_fixtures() -> Result<Verdict> {
    let pool = common::sim_pool(1);
    let mut summary = Vec::new();
    for src in [
        common::omega_finish_source("g1"),
        common::rederivation_source("g2"),
    ] {
        let script = parse_last_theorem(&src)?;
        ensure!(pool
            .verify(&OracleRequest::verify(print_theorem(&script), T))?
            .proved());
        let r = debloat(&pool, &script, T)?;
        let out = render_source(
            &script.preamble,
            &script.statement(),
            std::slice::from_ref(&r.minimized_proof),
        );
        ensure!(
            pool.verify(&OracleRequest::verify(out.clone(), T))?
                .proved(),
            "{} output fails",
            script.name
        );
        ensure!(
            r.minimized_length < r.original_length,
            "{} not shorter",
            script.name
        );
        let again = debloat(&pool, &parse_last_theorem(&out)?, T)?;
        ensure!(
            again.minimized_proof == r.minimized_proof && again.removed_line_indices.is_empty(),
            "{} second pass changed",
            script.name
        );
        summary.push(format!(
            "{} {} -> {}",
            script.name, r.original_length, r.minimized_length
        ));
    }
    Ok(Verdict::Pass(summary.join(", ")))
}

fn auto_labels() -> Result<Verdict> {
    let pool = common::sim_pool(1);
    let index = build_name_index(&pool, "import Mathlib", "sim", T)?;
    let lemma = EvalLemma::from_source("p", &common::chain_lemma("lab", 3))?;
    let attempt = |proof: &str| -> Result<EvalAttempt> {
        Ok(EvalAttempt {
            attempt_id: "lab/s0/r0".into(),
            lemma_id: lemma.id.clone(),
            model_id: "m".into(),
            sample_index: 0,
            round: 0,
            prompt_text: String::new(),
            raw_response: String::new(),
            extracted_proof: Some(proof.into()),
            verdict: pool.verify(&OracleRequest::verify(lemma.source_with(proof), T))?,
            timestamp: String::new(),
        })
    };
    let sorry = attempt("  rw [h1]\n  sorry")?;
    ensure!(sorry.verdict.status == Status::Incomplete);
    let l = auto_label(&sorry, &index);
    ensure!(
        l.errors() == vec![Flag::Incomplete] && !l.get(Flag::NoError),
        "sorry: {:?}",
        l.errors()
    );

    let fabricated = attempt("  exact Nat.chain_rewrite_closes h1 h2 h3")?;
    let l = auto_label(&fabricated, &index);
    ensure!(
        l.get(Flag::Hallucination) && !l.get(Flag::NoError),
        "fabricated: {:?}",
        l.errors()
    );

    let proved = attempt("  rw [h1]\n  rw [h2]\n  rw [h3]")?;
    ensure!(proved.verdict.proved());
    let l = auto_label(&proved, &index);
    let set: Vec<Flag> = Flag::ALL.iter().copied().filter(|f| l.get(*f)).collect();
    ensure!(set == vec![Flag::NoError], "proved: {set:?}");
    Ok(Verdict::Pass(
        "sorry -> incomplete; fabricated -> hallucination; proved -> no_error".into(),
    ))
}

fn lf(cwd: &Path, args: &[&str]) -> Command {
    let mut c = Command::new(BIN);
    c.current_dir(cwd)
        .env("LEMMAFORGE_REPL", common::SIM)
        .env_remove("LEMMAFORGE_LEAN_PROJECT")
        .args(args);
    c
}

fn evaluate(cwd: &Path, runs: &str, args: &[&str]) -> Command {
    let mut c = lf(cwd, args);
    c.args(["--runs-dir", runs]);
    c
}

fn report_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir)? {
        let e = e?;
        out.insert(
            e.file_name().to_string_lossy().into_owned(),
            std::fs::read(e.path())?,
        );
    }
    Ok(out)
}

fn resume_determinism() -> Result<Verdict> {
    let dir = tempfile::tempdir()?;
    let cwd = dir.path();
    let specs: Vec<(String, String, usize)> = (0..12)
        .map(|i| (format!("P{}", i % 3), format!("rs{i}"), 2 + i % 5))
        .collect();
    let specs: Vec<(&str, &str, usize)> = specs
        .iter()
        .map(|(p, i, n)| (p.as_str(), i.as_str(), *n))
        .collect();
    common::chain_dataset(&cwd.join("ds"), &specs);
    std::fs::write(
        cwd.join("fake.json"),
        r#"{"default": {"delay_ms": 40},
            "lemmas": {"rs1": {"solve_at_round": 0, "delay_ms": 40},
                       "rs4": {"solve_at_round": 2, "delay_ms": 40},
                       "rs7": {"solve_at_round": 1, "delay_ms": 40},
                       "rs10": {"solve_at_round": 3, "delay_ms": 40}}}"#,
    )?;
    let new_run = [
        "evaluate",
        "ds",
        "--model",
        "fake",
        "--fake-script",
        "fake.json",
        "--rounds",
        "3",
        "--run-id",
        "r",
        "--in-flight",
        "2",
    ];

    let s = evaluate(cwd, "full", &new_run).output()?;
    ensure!(
        s.status.code() == Some(0),
        "uninterrupted run: {}",
        String::from_utf8_lossy(&s.stderr)
    );
    ensure!(lf(cwd, &["report", "full/r"]).output()?.status.success());

    let mut child = evaluate(cwd, "part", &new_run)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .spawn()?;
    let outcomes = cwd.join("part/r/outcomes.jsonl");
    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        let done = std::fs::read_to_string(&outcomes)
            .map(|t| t.lines().count())
            .unwrap_or(0);
        if done >= 3 || Instant::now() > deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    child.kill()?;
    child.wait()?;
    let at_kill = std::fs::read_to_string(&outcomes)
        .map(|t| t.lines().count())
        .unwrap_or(0);
    ensure!(
        at_kill < specs.len(),
        "run finished before it could be killed"
    );

    let s = evaluate(cwd, "part", &["evaluate", "--resume", "r"]).output()?;
    ensure!(
        s.status.code() == Some(0),
        "resume: {}",
        String::from_utf8_lossy(&s.stderr)
    );
    ensure!(lf(cwd, &["report", "part/r"]).output()?.status.success());

    let a = report_files(&cwd.join("full/r/report"))?;
    let b = report_files(&cwd.join("part/r/report"))?;
    ensure!(a.len() == 10, "{} report files", a.len());
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    ensure!(
        differing.is_empty() && a.len() == b.len(),
        "differing files: {differing:?}"
    );
    Ok(Verdict::Pass(format!(
        "killed after {at_kill}/{} outcomes; {} report files byte-identical",
        specs.len(),
        a.len()
    )))
}

fn main() {
    let checks: Vec<(&str, fn() -> Result<Verdict>)> = vec![
        ("decomposition bounds", decomposition_bounds),
        ("structured decomposition", structured_counts),
        ("soundness", soundness),
        ("triviality filter", triviality),
        ("feedback-loop contract", feedback_contract),
        ("released dataset reproduction", released_dataset),
        ("accuracy by length", length_buckets),
        ("debloat", debloat_fixtures),
        ("auto-labeling", auto_labels),
        ("determinism and resume", resume_determinism),
    ];
    let mut failed = false;
    for (i, (name, f)) in checks.into_iter().enumerate() {
        failed |= run(i + 1, name, f);
    }
    if failed {
        std::process::exit(1);
    }
}
