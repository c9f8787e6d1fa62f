use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;
use tracing_subscriber::EnvFilter;

use lemmaforge::analysis::{self, labels, report, NameIndex};
use lemmaforge::config::{GlobalConfig, Overrides, CONFIG_FILE, PROJECT_ENV, REPL_ENV};
use lemmaforge::dataset::{self, ExportOptions, ImportOptions, Manifest};
use lemmaforge::decompose::{self, DecomposeError, DecomposeOptions, SourceMeta, Strategy};
use lemmaforge::eval::campaign::RunConfig;
use lemmaforge::eval::{
    self, CampaignMode, EvalConfig, EvalLemma, FakeModel, FakeScript, HttpModel, ModelClient,
    RunDir,
};
use lemmaforge::proof_model::{self, TheoremScript};
use lemmaforge::repl::{Oracle, OracleError, OracleRequest, ReplPool, Status};

/// lemmaforge: decompose Lean 4 proofs into verified lemma datasets and
/// evaluate model provers on them.
#[derive(Parser)]
#[command(name = "lemmaforge", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Config file.
    #[arg(long, global = true, default_value = CONFIG_FILE)]
    config: PathBuf,
    /// Lean REPL executable.
    #[arg(long, global = true, env = REPL_ENV)]
    repl: Option<PathBuf>,
    /// Lake project the REPL runs in.
    #[arg(long, global = true, env = PROJECT_ENV)]
    lean_project: Option<PathBuf>,
    /// Emit one JSON object per completed item on stdout.
    #[arg(long, global = true)]
    porcelain: bool,
    /// More logging (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Structured,
    Unstructured,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Extract verified lemmas from one theorem.
    Decompose {
        file: PathBuf,
        /// Theorem to decompose; defaults to the last one in the file.
        #[arg(long)]
        theorem: Option<String>,
        #[arg(long, value_enum, default_value = "both")]
        strategy: StrategyArg,
        /// Keep lemmas a single automation tactic closes.
        #[arg(long)]
        keep_trivial: bool,
        #[arg(long, default_value_t = 2)]
        min_proof_lines: usize,
        /// Re-decompose exported lemmas longer than this many lines.
        #[arg(long)]
        recursive_threshold: Option<usize>,
        #[arg(long, default_value_t = 2)]
        max_depth: usize,
        /// Competition-year-problem tag recorded in the manifest.
        #[arg(long)]
        problem: Option<String>,
        #[arg(long, default_value = "")]
        topic: String,
        /// Dataset directory to export into.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Verify a lemma file or every lemma of a dataset directory.
    Verify {
        path: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "**/*.lean")]
        glob: String,
    },
    /// Run a model over a dataset with feedback rounds or pass@k sampling.
    Evaluate {
        /// Dataset directory with a manifest. Taken from the run when resuming.
        dataset: Option<PathBuf>,
        /// Model name from the config, or `fake`.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        /// Independent samples instead of feedback rounds.
        #[arg(long, num_args = 0..=1, default_missing_value = "32")]
        pass_at_k: Option<usize>,
        /// Keep sampling after the first success.
        #[arg(long)]
        no_early_stop: bool,
        #[arg(long, default_value = "default")]
        template: String,
        #[arg(long, default_value_t = 4)]
        in_flight: usize,
        #[arg(long)]
        run_id: Option<String>,
        /// Continue an interrupted run.
        #[arg(long, conflicts_with = "run_id")]
        resume: Option<String>,
        #[arg(long)]
        runs_dir: Option<PathBuf>,
        /// Scripted behavior for `--model fake` (JSON).
        #[arg(long)]
        fake_script: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Label a run's attempts and merge manual labels.
    Analyze {
        run: PathBuf,
        /// Manual labels: attempt_id, flag, value, annotator, note.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        name_index: Option<PathBuf>,
    },
    /// Write the report tables of a run.
    Report {
        run: PathBuf,
        /// Dataset directory; defaults to the one the run used.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        name_index: Option<PathBuf>,
    },
    /// Remove proof lines that verification does not need.
    Debloat {
        file: PathBuf,
        #[arg(long)]
        theorem: Option<String>,
        /// Comment removed lines out instead of deleting them.
        #[arg(long)]
        annotate: bool,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a manifest for a directory of lemma files.
    Import {
        dir: PathBuf,
        #[arg(long, default_value = "**/*.lean")]
        glob: String,
        /// Check every file with the oracle.
        #[arg(long)]
        verify: bool,
        /// Write manifest.jsonl into the directory.
        #[arg(long)]
        write: bool,
        #[arg(long)]
        name: Option<String>,
    },
    /// Proof-length statistics per problem.
    Stats { dataset: PathBuf },
    /// Known-identifier index for hallucination labels.
    Index {
        #[command(subcommand)]
        action: IndexCommand,
    },
    /// Re-check a dataset against its manifest.
    Audit {
        dataset: PathBuf,
        /// Only check files and names.
        #[arg(long)]
        no_verify: bool,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Enumerate environment constants through the REPL.
    Build {
        #[arg(long, default_value = "import Mathlib")]
        preamble: String,
        #[arg(long, default_value = "name_index.txt")]
        out: PathBuf,
    },
}

/// A failure of the checked artifacts rather than of the setup.
const DOMAIN_FAILURE: u8 = 1;
const ENV_FAILURE: u8 = 2;

struct Ctx {
    config: GlobalConfig,
    porcelain: bool,
    shutdown: Arc<AtomicBool>,
}

impl Ctx {
    fn pool(&self, jobs: Option<usize>) -> Result<ReplPool> {
        let mut config = self.config.clone();
        if let Some(j) = jobs {
            config.pool_size = j;
        }
        Ok(ReplPool::start(config.pool_config()?)?)
    }

    fn emit(&self, value: serde_json::Value) {
        if self.porcelain {
            println!("{value}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)),
        )
        .with_writer(std::io::stderr)
        .init();

    let explicit = cli.global.config != Path::new(CONFIG_FILE);
    let mut config = match GlobalConfig::load(&cli.global.config, explicit) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(ENV_FAILURE);
        }
    };
    config.apply(&Overrides {
        repl_path: cli.global.repl.clone(),
        lean_project_root: cli.global.lean_project.clone(),
        pool_size: None,
    });
    let shutdown = Arc::new(AtomicBool::new(false));
    {
        let flag = shutdown.clone();
        let _ = ctrlc::set_handler(move || {
            if flag.swap(true, Ordering::SeqCst) {
                std::process::exit(130);
            }
            eprintln!("interrupt: finishing in-flight work; press again to abort");
        });
    }
    let ctx = Ctx {
        config,
        porcelain: cli.global.porcelain,
        shutdown,
    };

    match run(&ctx, cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ENV_FAILURE)
        }
    }
}

fn run(ctx: &Ctx, command: Command) -> Result<ExitCode> {
    match command {
        Command::Decompose {
            file,
            theorem,
            strategy,
            keep_trivial,
            min_proof_lines,
            recursive_threshold,
            max_depth,
            problem,
            topic,
            out,
            jobs,
        } => {
            let strategy = match strategy {
                StrategyArg::Structured => Strategy::Structured,
                StrategyArg::Unstructured => Strategy::Unstructured,
                StrategyArg::Both => Strategy::Both,
            };
            let script = load_script(&file, theorem.as_deref())?;
            let opts = DecomposeOptions {
                strategy,
                timeout: ctx.config.decompose_timeout(),
                trivial_timeout: ctx.config.decompose_timeout(),
                keep_trivial,
                min_proof_lines,
                recursive_threshold,
                max_depth,
                meta: SourceMeta {
                    source_problem: problem.unwrap_or_else(|| script.name.clone()),
                    topic,
                },
                ..Default::default()
            };
            cmd_decompose(ctx, &script, &opts, out.as_deref(), jobs)
        }
        Command::Verify { path, jobs, glob } => cmd_verify(ctx, &path, &glob, jobs),
        Command::Evaluate {
            dataset,
            model,
            rounds,
            pass_at_k,
            no_early_stop,
            template,
            in_flight,
            run_id,
            resume,
            runs_dir,
            fake_script,
            jobs,
        } => {
            let runs_dir = runs_dir.unwrap_or_else(|| ctx.config.runs_dir.clone());
            let run_config = match resume {
                Some(id) => RunDir::new(runs_dir.join(&id)).load_config()?,
                None => {
                    let dataset = dataset
                        .context("a dataset directory is required unless --resume is given")?;
                    let model = model.context("--model is required for a new run")?;
                    let rc = new_run_config(
                        ctx,
                        &dataset,
                        &model,
                        rounds,
                        pass_at_k,
                        !no_early_stop,
                        &template,
                        in_flight,
                        run_id,
                        fake_script,
                    )?;
                    RunDir::new(runs_dir.join(&rc.run_id)).create(&rc)?;
                    rc
                }
            };
            cmd_evaluate(ctx, &runs_dir, run_config, jobs)
        }
        Command::Analyze {
            run,
            labels,
            name_index,
        } => cmd_analyze(&run, labels.as_deref(), name_index.as_deref()),
        Command::Report {
            run,
            dataset,
            name_index,
        } => cmd_report(&run, dataset, name_index.as_deref()),
        Command::Debloat {
            file,
            theorem,
            annotate,
            out,
        } => {
            let script = load_script(&file, theorem.as_deref())?;
            cmd_debloat(ctx, &script, annotate, out.as_deref())
        }
        Command::Import {
            dir,
            glob,
            verify,
            write,
            name,
        } => cmd_import(ctx, &dir, &glob, verify, write, name),
        Command::Stats { dataset } => {
            let manifest = Manifest::load(&dataset)?;
            print!("{}", dataset::dataset_stats(&manifest)?.render());
            Ok(ExitCode::SUCCESS)
        }
        Command::Index {
            action: IndexCommand::Build { preamble, out },
        } => {
            let pool = ctx.pool(Some(1))?;
            let index = analysis::build_name_index(
                &pool,
                &preamble,
                &ctx.config.lean_version,
                ctx.config.verify_timeout(),
            )?;
            index
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("{} names written to {}", index.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { dataset, no_verify } => {
            let pool = if no_verify {
                None
            } else {
                Some(ctx.pool(None)?)
            };
            let report = dataset::audit(
                &dataset,
                pool.as_ref().map(|p| p as &dyn Oracle),
                ctx.config.verify_timeout(),
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(DOMAIN_FAILURE)
            })
        }
    }
}

fn load_script(file: &Path, theorem: Option<&str>) -> Result<TheoremScript> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let mut script = match theorem {
        Some(t) => proof_model::parse_theorem(&text, t),
        None => proof_model::parse_last_theorem(&text),
    }
    .with_context(|| format!("parsing {}", file.display()))?;
    script.source_path = Some(file.to_path_buf());
    Ok(script)
}

fn cmd_decompose(
    ctx: &Ctx,
    script: &TheoremScript,
    opts: &DecomposeOptions,
    out: Option<&Path>,
    jobs: Option<usize>,
) -> Result<ExitCode> {
    let pool = ctx.pool(jobs)?;
    let d = match decompose::decompose(&pool, script, opts) {
        Ok(d) => d,
        Err(DecomposeError::Oracle(e)) => return Err(e.into()),
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(DOMAIN_FAILURE));
        }
    };
    for r in &d.reports {
        if ctx.porcelain {
            ctx.emit(json!({"event": "report", "report": r}));
        } else {
            print!("{}", r.render());
        }
    }
    for l in &d.exported {
        ctx.emit(
            json!({"event": "lemma", "id": l.id, "rule": l.rule, "proof_length": l.proof_length}),
        );
    }
    if let Some(dir) = out {
        let manifest = merge_export(dir, &d.exported, &ctx.config.lean_version)?;
        if !ctx.porcelain {
            println!(
                "exported {} lemmas to {} ({} in manifest)",
                d.exported.len(),
                dir.display(),
                manifest.entries.len()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Exports `lemmas` into `dir`, keeping lemmas of other problems already
/// listed in its manifest.
fn merge_export(
    dir: &Path,
    lemmas: &[decompose::ExtractedLemma],
    lean_version: &str,
) -> Result<Manifest> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut all: Vec<decompose::ExtractedLemma> = Vec::new();
    if let Ok(previous) = Manifest::load(dir) {
        let fresh: std::collections::HashSet<&str> = lemmas.iter().map(|l| l.id.as_str()).collect();
        for e in previous
            .entries
            .iter()
            .filter(|e| !fresh.contains(e.lemma_id.as_str()))
        {
            let text = fs::read_to_string(dir.join(&e.file))
                .with_context(|| format!("reading {}", e.file))?;
            let script = proof_model::parse_last_theorem(&text)
                .with_context(|| format!("parsing {}", e.file))?;
            all.push(decompose::ExtractedLemma {
                id: e.lemma_id.clone(),
                rule: e.rule,
                param: 0,
                statement_text: script.statement(),
                proof_text: proof_model::reindent_lines(&script.body, 2).join("\n"),
                preamble: script.preamble.clone(),
                verified: e.verified,
                trivial: e.trivial,
                proof_length: e.proof_length,
                source: decompose::LemmaSource {
                    theorem: e.source_problem.clone(),
                    file: None,
                },
                source_problem: e.source_problem.clone(),
                topic: e.topic.clone(),
            });
        }
    }
    all.extend(lemmas.iter().cloned());
    Ok(dataset::export_dataset(
        &all,
        dir,
        &ExportOptions {
            dataset_name: name,
            lean_version: lean_version.to_string(),
        },
    )?)
}

fn cmd_verify(ctx: &Ctx, path: &Path, glob: &str, jobs: Option<usize>) -> Result<ExitCode> {
    let targets: Vec<(String, PathBuf)> = if path.is_dir() {
        match Manifest::load(path) {
            Ok(m) => m
                .entries
                .iter()
                .map(|e| (e.lemma_id.clone(), path.join(&e.file)))
                .collect(),
            Err(_) => {
                let report = dataset::import_dataset(
                    path,
                    &ImportOptions {
                        glob: glob.to_string(),
                        ..Default::default()
                    },
                )?;
                for f in &report.failures {
                    eprintln!("skipping {}: {}", f.file, f.reason);
                }
                report
                    .manifest
                    .entries
                    .iter()
                    .map(|e| (e.lemma_id.clone(), path.join(&e.file)))
                    .collect()
            }
        }
    } else {
        vec![(path.display().to_string(), path.to_path_buf())]
    };
    let pool = ctx.pool(jobs)?;
    let timeout = ctx.config.verify_timeout();
    let results: Vec<Option<Result<Status, OracleError>>> = targets
        .par_iter()
        .map(|(id, file)| {
            if ctx.shutdown.load(Ordering::SeqCst) {
                return None;
            }
            let status = match fs::read_to_string(file) {
                Ok(text) => pool
                    .verify(&OracleRequest::verify(text, timeout))
                    .map(|r| r.status),
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    Ok(Status::Failed)
                }
            };
            if let Ok(s) = &status {
                ctx.emit(json!({"event": "verified", "id": id, "status": s}));
            }
            Some(status)
        })
        .collect();
    let mut counts: BTreeMap<&str, usize> =
        ["proved", "failed", "incomplete", "timeout", "crashed"]
            .iter()
            .map(|s| (*s, 0))
            .collect();
    let mut skipped = 0;
    for ((id, _), r) in targets.iter().zip(results) {
        match r {
            Some(Ok(s)) => {
                *counts.entry(s.as_str()).or_default() += 1;
                if s != Status::Proved && !ctx.porcelain {
                    println!("{s}: {id}");
                }
            }
            Some(Err(e)) => return Err(e.into()),
            None => skipped += 1,
        }
    }
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    if ctx.porcelain {
        ctx.emit(json!({"event": "summary", "counts": counts, "skipped": skipped}));
    } else {
        println!("{}", summary.join(", "));
    }
    let all_proved = skipped == 0 && counts["proved"] == targets.len();
    Ok(if all_proved {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(DOMAIN_FAILURE)
    })
}

#[allow(clippy::too_many_arguments)]
fn new_run_config(
    ctx: &Ctx,
    dataset: &Path,
    model: &str,
    rounds: usize,
    pass_at_k: Option<usize>,
    early_stop: bool,
    template: &str,
    in_flight: usize,
    run_id: Option<String>,
    fake_script: Option<PathBuf>,
) -> Result<RunConfig> {
    let mut eval = EvalConfig {
        model_id: model.to_string(),
        max_feedback_rounds: rounds,
        samples_k: pass_at_k.unwrap_or(1),
        prompt_template_id: template.to_string(),
        verify_timeout_s: ctx.config.timeouts.verify_s,
        early_stop,
        in_flight,
        ..Default::default()
    };
    let fake_script = if model == "fake" {
        eval.endpoint = "fake://".into();
        eval.retry_backoff_ms = 10;
        Some(match fake_script {
            Some(p) => {
                let text =
                    fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str::<FakeScript>(&text)
                    .with_context(|| format!("parsing {}", p.display()))?
            }
            None => FakeScript::default(),
        })
    } else {
        let entry = ctx.config.model(model)?;
        eval.endpoint = entry.endpoint.clone();
        eval.model_id = entry.model.clone().unwrap_or_else(|| model.to_string());
        eval.decoding = entry.decoding.clone();
        if let Some(t) = entry.timeout_s {
            eval.timeout_s = t;
        }
        None
    };
    eval.validate()?;
    let run_id =
        run_id.unwrap_or_else(|| format!("{model}-{}", chrono::Utc::now().format("%Y%m%dT%H%M%S")));
    Ok(RunConfig {
        run_id,
        mode: if pass_at_k.is_some() {
            CampaignMode::PassAtK
        } else {
            CampaignMode::Feedback
        },
        dataset: dataset.to_path_buf(),
        eval,
        fake_script,
    })
}

fn cmd_evaluate(
    ctx: &Ctx,
    runs_dir: &Path,
    rc: RunConfig,
    jobs: Option<usize>,
) -> Result<ExitCode> {
    let run = RunDir::new(runs_dir.join(&rc.run_id));
    let manifest = Manifest::load(&rc.dataset)?;
    let (lemmas, failures) = eval::load_lemmas(&rc.dataset, &manifest);
    for (id, msg) in &failures {
        eprintln!("skipping {id}: {msg}");
    }
    let model: Box<dyn ModelClient> = match &rc.fake_script {
        Some(script) => {
            let refs: HashMap<String, (String, String)> = lemmas
                .iter()
                .map(|l: &EvalLemma| {
                    (
                        l.id.clone(),
                        (l.statement_text.clone(), l.reference_proof.clone()),
                    )
                })
                .collect();
            Box::new(FakeModel::new(script.clone(), refs))
        }
        None => Box::new(HttpModel::new(
            &rc.eval.model_id,
            &rc.eval.endpoint,
            rc.eval.decoding.clone(),
            Duration::from_secs_f64(rc.eval.timeout_s),
        )),
    };
    let pool = ctx.pool(jobs)?;
    let on_outcome = |o: &eval::EvalOutcome| {
        ctx.emit(json!({
            "event": "outcome",
            "lemma_id": o.lemma_id,
            "solved": o.solved,
            "solved_at_round": o.solved_at_round,
            "solved_at_sample": o.solved_at_sample,
            "attempts": o.attempts.len(),
        }));
    };
    let summary = eval::run_campaign(
        &run,
        &lemmas,
        &pool,
        model.as_ref(),
        &rc.eval,
        rc.mode,
        &ctx.shutdown,
        &on_outcome,
    )?;
    if ctx.porcelain {
        ctx.emit(json!({"event": "summary", "run": run.path, "summary": summary}));
    } else {
        println!("run {}", run.path.display());
        print!("{}", summary.render());
    }
    if !summary.unfinished.is_empty() {
        eprintln!(
            "{} lemmas unfinished; continue with `lemmaforge evaluate --resume {}`",
            summary.unfinished.len(),
            rc.run_id
        );
        return Ok(ExitCode::from(DOMAIN_FAILURE));
    }
    Ok(ExitCode::SUCCESS)
}

fn load_index(path: Option<&Path>, version: &str) -> Result<NameIndex> {
    match path {
        Some(p) => {
            NameIndex::load(p, Some(version)).with_context(|| format!("reading {}", p.display()))
        }
        None => Ok(NameIndex::default()),
    }
}

fn cmd_analyze(
    run: &Path,
    labels_file: Option<&Path>,
    name_index: Option<&Path>,
) -> Result<ExitCode> {
    let run = RunDir::new(run);
    run.load_config()?;
    let index = load_index(name_index, "")?;
    let attempts = run.attempts()?;
    let label_path = run.path.join(labels::LABELS_FILE);
    let previous = labels::read_labels(&label_path)?;
    let mut store = labels::label_attempts(&attempts, &index, &previous);
    let mut failed = false;
    if let Some(file) = labels_file {
        let report = labels::ingest_manual_labels(file, &attempts, &mut store)
            .with_context(|| format!("reading {}", file.display()))?;
        println!("manual labels applied: {}", report.applied);
        for e in &report.rejected {
            eprintln!("rejected {e}");
        }
        failed |= !report.rejected.is_empty();
    }
    let violations = labels::audit_labels(&attempts, &store);
    for v in &violations {
        eprintln!("label inconsistency: {v}");
    }
    failed |= !violations.is_empty();
    labels::write_labels(&label_path, &store)?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in store.values() {
        for (flag, v) in &l.flags {
            if v.value {
                *counts.entry(flag.as_str()).or_default() += 1;
            }
        }
    }
    println!("{} attempts labeled", store.len());
    for (flag, n) in counts {
        println!("{flag:<22} {n}");
    }
    Ok(if failed {
        ExitCode::from(DOMAIN_FAILURE)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_report(run: &Path, dataset: Option<PathBuf>, name_index: Option<&Path>) -> Result<ExitCode> {
    let run = RunDir::new(run);
    let rc = run.load_config()?;
    let manifest = Manifest::load(&dataset.unwrap_or(rc.dataset))?;
    let index = load_index(name_index, &manifest.lean_version)?;
    let tables = report::build_report(&run, &manifest, &index)?;
    let paths = report::write_report(&run, &tables)?;
    for t in &tables {
        println!("== {} ==\n{}", t.name, t.text);
    }
    eprintln!(
        "wrote {} files under {}",
        paths.len(),
        run.report_dir().display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_debloat(
    ctx: &Ctx,
    script: &TheoremScript,
    annotate: bool,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let pool = ctx.pool(Some(1))?;
    let result = match analysis::debloat(&pool, script, ctx.config.verify_timeout()) {
        Ok(r) => r,
        Err(analysis::DebloatError::Oracle(e)) => return Err(e.into()),
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(DOMAIN_FAILURE));
        }
    };
    let body = if annotate {
        &result.annotated_proof
    } else {
        &result.minimized_proof
    };
    let lines: Vec<String> = body.lines().map(str::to_string).collect();
    let source = proof_model::render_source(&script.preamble, &script.statement(), &lines);
    match out {
        Some(p) => fs::write(p, &source).with_context(|| format!("writing {}", p.display()))?,
        None if !ctx.porcelain => print!("{source}"),
        None => {}
    }
    ctx.emit(json!({"event": "debloated", "theorem": script.name, "result": result}));
    eprintln!(
        "{}: {} -> {} lines in {} passes",
        script.name, result.original_length, result.minimized_length, result.passes
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_import(
    ctx: &Ctx,
    dir: &Path,
    glob: &str,
    verify: bool,
    write: bool,
    name: Option<String>,
) -> Result<ExitCode> {
    let pool = if verify { Some(ctx.pool(None)?) } else { None };
    let opts = ImportOptions {
        glob: glob.to_string(),
        oracle: pool.as_ref().map(|p| p as &dyn Oracle),
        timeout: ctx.config.verify_timeout(),
        dataset_name: name,
        lean_version: ctx.config.lean_version.clone(),
    };
    let report = dataset::import_dataset(dir, &opts)?;
    let summary = report.manifest.summary();
    if ctx.porcelain {
        ctx.emit(json!({"event": "imported", "summary": summary, "failures": report.failures}));
    } else {
        for (problem, t) in &summary.problems {
            println!("{problem:<16} {:>6} lemmas {:>8} lines", t.lemmas, t.lines);
        }
        println!(
            "{:<16} {:>6} lemmas {:>8} lines",
            "total", summary.total_lemmas, summary.total_lines
        );
    }
    for f in &report.failures {
        eprintln!("{}: {}", f.file, f.reason);
    }
    if write {
        report.manifest.write(dir)?;
    }
    if report.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        if report.manifest.entries.is_empty() && !report.failures.is_empty() {
            bail!("no lemma files could be imported from {}", dir.display());
        }
        Ok(ExitCode::from(DOMAIN_FAILURE))
    }
}
