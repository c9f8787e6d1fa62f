mod common;

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lemmaforge");

fn lf(cwd: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(cwd)
        .env("LEMMAFORGE_REPL", common::SIM)
        .env_remove("LEMMAFORGE_LEAN_PROJECT")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("good.lean"), common::chain_lemma("good", 3)).unwrap();
    std::fs::write(
        dir.path().join("bad.lean"),
        "import Mathlib\n\ntheorem bad (a b : ℕ) (h : a = b) : a = b := by\n  sorry\n",
    )
    .unwrap();
    assert_eq!(
        lf(dir.path(), &["verify", "good.lean"]).status.code(),
        Some(0)
    );
    let bad = lf(dir.path(), &["verify", "bad.lean"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("incomplete: bad.lean"));

    // No REPL anywhere is an environment failure.
    let o = Command::new(BIN)
        .current_dir(dir.path())
        .env_remove("LEMMAFORGE_REPL")
        .args(["verify", "good.lean"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(dir.path().join("lemmaforge.toml"), "pool_sise = 2\n").unwrap();
    assert_eq!(
        lf(dir.path(), &["verify", "good.lean"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_is_independent_of_pool_size() {
    let dir = tempfile::tempdir().unwrap();
    let specs: Vec<(String, String, usize)> = (0..12)
        .map(|i| ("P".to_string(), format!("v{i}"), 1 + i % 5))
        .collect();
    let specs: Vec<(&str, &str, usize)> = specs
        .iter()
        .map(|(p, i, n)| (p.as_str(), i.as_str(), *n))
        .collect();
    let ds = dir.path().join("ds");
    common::chain_dataset(&ds, &specs);
    std::fs::write(
        ds.join("lemmas/P/v3.lean"),
        "import Mathlib\n\ntheorem v3 (a : ℕ) : a = a + 1 := by\n  rfl\n",
    )
    .unwrap();
    let one = lf(dir.path(), &["verify", "ds", "--jobs", "1"]);
    let eight = lf(dir.path(), &["verify", "ds", "--jobs", "8"]);
    assert_eq!(one.status.code(), Some(1));
    assert_eq!(stdout(&one), stdout(&eight));
    assert!(stdout(&one).contains("failed: v3"), "{}", stdout(&one));
}

#[test]
fn pipeline_writes_report_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    std::fs::write(cwd.join("c7.lean"), common::chain_source("c7", 7)).unwrap();
    let d = lf(
        cwd,
        &[
            "decompose",
            "c7.lean",
            "--problem",
            "1959-P1",
            "--out",
            "ds",
        ],
    );
    assert_eq!(
        d.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&d.stderr)
    );

    std::fs::write(
        cwd.join("fake.json"),
        r#"{"default": {"solve_at_round": 2}}"#,
    )
    .unwrap();
    let e = lf(
        cwd,
        &[
            "evaluate",
            "ds",
            "--model",
            "fake",
            "--fake-script",
            "fake.json",
            "--rounds",
            "3",
            "--run-id",
            "r1",
        ],
    );
    assert_eq!(
        e.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&e.stderr)
    );
    assert!(stdout(&e).contains("(100.0%)"), "{}", stdout(&e));

    // Reusing a run id without --resume is refused.
    let again = lf(
        cwd,
        &["evaluate", "ds", "--model", "fake", "--run-id", "r1"],
    );
    assert_eq!(again.status.code(), Some(2));

    assert_eq!(lf(cwd, &["analyze", "runs/r1"]).status.code(), Some(0));
    assert!(cwd.join("runs/r1/labels.jsonl").exists());
    assert_eq!(lf(cwd, &["report", "runs/r1"]).status.code(), Some(0));
    for t in lemmaforge::analysis::report::TABLES {
        for ext in ["txt", "json"] {
            assert!(
                cwd.join(format!("runs/r1/report/{t}.{ext}")).exists(),
                "{t}.{ext}"
            );
        }
    }
    let progression =
        std::fs::read_to_string(cwd.join("runs/r1/report/feedback_progression.txt")).unwrap();
    assert!(progression.contains("zero-shot"), "{progression}");
}

#[test]
fn debloat_command_prints_minimized_theorem() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.lean"), common::omega_finish_source("g1")).unwrap();
    let o = lf(dir.path(), &["debloat", "g.lean", "--annotate"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(
        stdout(&o).contains("  -- have hy : y = 4 := h₁"),
        "{}",
        stdout(&o)
    );
}
