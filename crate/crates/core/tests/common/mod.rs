#![allow(dead_code)]

use lemmaforge::repl::{PoolConfig, ReplPool};

pub const SIM: &str = env!("CARGO_BIN_EXE_lean-repl-sim");

pub fn sim_pool(size: usize) -> ReplPool {
    let mut config = PoolConfig::new(SIM);
    config.size = size;
    ReplPool::start(config).expect("simulator starts")
}

/// Straight-line rewrite chain with `n` tactic lines:
/// `a0 = a1, ..., a(n-1) = an ⊢ a0 = an`, one `rw` per hypothesis.
pub fn chain_source(name: &str, n: usize) -> String {
    let vars: Vec<String> = (0..=n).map(|i| format!("a{i}")).collect();
    let hyps: Vec<String> = (1..=n)
        .map(|i| format!("(h{i} : a{} = a{i})", i - 1))
        .collect();
    let mut s = format!(
        "import Mathlib\n\ntheorem {name} ({} : ℕ) {} : a0 = a{n} := by\n",
        vars.join(" "),
        hyps.join(" ")
    );
    for i in 1..=n {
        s.push_str(&format!("  rw [h{i}]\n"));
    }
    s
}

/// `k` intermediate hypotheses, each a three-line `have` block, then a
/// closing `omega`: `3k + 1` proof lines.
pub fn structured_source(name: &str, k: usize) -> String {
    let mut s = format!(
        "import Mathlib\n\ntheorem {name} (x : ℕ) (h₀ : x = 2) : x + {k} = 2 + {k} := by\n"
    );
    for j in 1..=k {
        s.push_str(&format!("  have h{j} : x + {j} = 2 + {j} := by\n"));
        s.push_str("    have e : x = 2 := h₀\n");
        s.push_str("    omega\n");
    }
    s.push_str("  omega\n");
    s
}

/// A 15-line proof by case split: `constructor`, then two bullets of seven
/// rewrites each. No single automation tactic closes the goal.
pub fn case_analysis_source(name: &str) -> String {
    let avars: Vec<String> = (0..=7).map(|i| format!("a{i}")).collect();
    let bvars: Vec<String> = (0..=7).map(|i| format!("b{i}")).collect();
    let ah: Vec<String> = (1..=7)
        .map(|i| format!("(h{i} : a{} = a{i})", i - 1))
        .collect();
    let bh: Vec<String> = (1..=7)
        .map(|i| format!("(g{i} : b{} = b{i})", i - 1))
        .collect();
    let mut s = format!(
        "import Mathlib\n\ntheorem {name} ({} {} : ℕ) {} {} : a0 = a7 ∧ b0 = b7 := by\n  constructor\n",
        avars.join(" "),
        bvars.join(" "),
        ah.join(" "),
        bh.join(" ")
    );
    for prefix in ["h", "g"] {
        for i in 1..=7 {
            let lead = if i == 1 { "  · " } else { "    " };
            s.push_str(&format!("{lead}rw [{prefix}{i}]\n"));
        }
    }
    s
}

/// Goal closable by `omega` with a bloated multi-line proof.
pub fn omega_closable_source(name: &str) -> String {
    format!(
        "import Mathlib\n\ntheorem {name} (x y : ℕ) (h₀ : x = 3) (h₁ : y = 4) : x + y = 7 := by\n  rw [h₀]\n  rw [h₁]\n"
    )
}

/// A lemma file whose proof is a rewrite chain of `len` lines.
pub fn chain_lemma(name: &str, len: usize) -> String {
    chain_source(name, len)
}

/// Writes `lemmas/<problem>/<id>.lean` chain lemmas under `root` and a
/// manifest listing them as verified.
pub fn chain_dataset(
    root: &std::path::Path,
    specs: &[(&str, &str, usize)],
) -> lemmaforge::dataset::Manifest {
    for (problem, id, len) in specs {
        let path = root.join("lemmas").join(problem).join(format!("{id}.lean"));
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, chain_lemma(id, *len)).unwrap();
    }
    let report = lemmaforge::dataset::import_dataset(root, &Default::default()).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let mut manifest = report.manifest;
    for e in &mut manifest.entries {
        e.verified = true;
    }
    manifest.created_at = "fixture".into();
    manifest.write(root).unwrap();
    manifest
}

/// Redundant hypotheses and an intermediate fact before a closing `omega`
/// that needs none of them.
pub fn omega_finish_source(name: &str) -> String {
    format!(
        "import Mathlib\n\ntheorem {name} (x y : ℕ) (h₀ : x = 3) (h₁ : y = 4) : x + y = 7 := by\n  \
         have hx : x = 3 := h₀\n  have hy : y = 4 := h₁\n  have hsum : x + y = 3 + 4 := by\n    rw [hx, hy]\n  omega\n"
    )
}

/// Re-proves both given hypotheses, then uses the copies.
pub fn rederivation_source(name: &str) -> String {
    format!(
        "import Mathlib\n\ntheorem {name} (a b c : ℕ) (h₀ : a = b) (h₁ : b = c) : a = c := by\n  \
         have h₂ : a = b := by\n    exact h₀\n  have h₃ : b = c := by\n    exact h₁\n  rw [h₂]\n  exact h₃\n"
    )
}
