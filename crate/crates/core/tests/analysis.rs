mod common;

use std::time::Duration;

use common::{omega_finish_source, rederivation_source, sim_pool};
use lemmaforge::analysis::{auto_label, build_name_index, debloat, Flag, NameIndex};
use lemmaforge::eval::{EvalAttempt, EvalLemma};
use lemmaforge::proof_model::{parse_last_theorem, print_theorem};
use lemmaforge::repl::{Oracle, OracleRequest, Status};

const T: Duration = Duration::from_secs(10);

fn lemma() -> EvalLemma {
    EvalLemma::from_source("p", &common::chain_lemma("ch", 3)).unwrap()
}

fn attempt_with(oracle: &dyn Oracle, proof: &str) -> EvalAttempt {
    let l = lemma();
    let verdict = oracle
        .verify(&OracleRequest::verify(l.source_with(proof), T))
        .unwrap();
    EvalAttempt {
        attempt_id: "ch/s0/r0".into(),
        lemma_id: l.id.clone(),
        model_id: "m".into(),
        sample_index: 0,
        round: 0,
        prompt_text: String::new(),
        raw_response: String::new(),
        extracted_proof: Some(proof.into()),
        verdict,
        timestamp: String::new(),
    }
}

#[test]
fn labels_follow_oracle_diagnostics() {
    let pool = sim_pool(1);
    let index = build_name_index(&pool, "import Mathlib", "sim", T).unwrap();

    let proved = attempt_with(&pool, "  rw [h1]\n  rw [h2]\n  rw [h3]");
    assert_eq!(proved.verdict.status, Status::Proved);
    let l = auto_label(&proved, &index);
    assert!(l.get(Flag::NoError) && l.errors().is_empty());

    let sorry = attempt_with(&pool, "  rw [h1]\n  sorry");
    assert_eq!(sorry.verdict.status, Status::Incomplete);
    assert_eq!(auto_label(&sorry, &index).errors(), vec![Flag::Incomplete]);

    let fabricated = attempt_with(&pool, "  exact Nat.chain_rewrite_closes h1 h2 h3");
    assert!(fabricated
        .verdict
        .messages
        .iter()
        .any(|d| d.text.contains("unknown identifier")));
    assert_eq!(
        auto_label(&fabricated, &index).errors(),
        vec![Flag::Hallucination]
    );

    // A real library lemma misapplied is not a hallucination.
    let misused = attempt_with(&pool, "  exact Nat.add_comm a0 a3");
    let l = auto_label(&misused, &index);
    assert!(!l.get(Flag::Hallucination) && !l.get(Flag::NoError));
}

#[test]
fn debloat_reduces_omega_finish_to_one_line() {
    let pool = sim_pool(1);
    let script = parse_last_theorem(&omega_finish_source("g1")).unwrap();
    let r = debloat(&pool, &script, T).unwrap();
    assert_eq!(r.minimized_proof, "  omega");
    assert_eq!((r.original_length, r.minimized_length), (5, 1));
    assert_eq!(r.removed_line_indices, vec![0, 1, 2, 3]);
    assert!(r.annotated_proof.contains("  -- have hx : x = 3 := h₀\n"));
    assert!(r.annotated_proof.ends_with("\n  omega"));
}

#[test]
fn debloat_uses_given_hypotheses_instead_of_copies() {
    let pool = sim_pool(1);
    let script = parse_last_theorem(&rederivation_source("g2")).unwrap();
    let r = debloat(&pool, &script, T).unwrap();
    assert_eq!(r.minimized_proof, "  rw [h₀]\n  exact h₁");
    assert_eq!(
        r.substitutions,
        vec![
            ("h₃".to_string(), "h₁".to_string()),
            ("h₂".to_string(), "h₀".to_string())
        ]
    );

    let src = lemmaforge::proof_model::render_source(
        &script.preamble,
        &script.statement(),
        std::slice::from_ref(&r.minimized_proof),
    );
    assert!(pool
        .verify(&OracleRequest::verify(src.clone(), T))
        .unwrap()
        .proved());
    let again = debloat(&pool, &parse_last_theorem(&src).unwrap(), T).unwrap();
    assert_eq!(again.minimized_proof, r.minimized_proof);
    assert_eq!(again.passes, 1);
}

#[test]
fn original_fixtures_verify() {
    let pool = sim_pool(1);
    for src in [omega_finish_source("g1"), rederivation_source("g2")] {
        let s = print_theorem(&parse_last_theorem(&src).unwrap());
        assert!(pool.verify(&OracleRequest::verify(s, T)).unwrap().proved());
    }
}

#[test]
fn name_index_persists_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("names.txt");
    let idx = NameIndex::from_names("v1", ["b.x", "a.y"]);
    idx.save(&path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "# lean-version: v1\na.y\nb.x\n"
    );
    assert_eq!(NameIndex::load(&path, Some("v2")).unwrap(), idx);
}
