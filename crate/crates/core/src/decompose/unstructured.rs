//! Lemmas from proof states along the tactic sequence: forward suffixes,
//! backward pairs and backward prefixes.

use std::collections::BTreeSet;

use crate::proof_model::{lex, reindent_lines, Binder, TheoremScript};
use crate::repl::ProofState;

use super::{Candidate, Rule};

/// Why a position produced no candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skip {
    MissingState,
    MultiGoal,
    Terminal,
    Unrenderable,
    DependentDelta,
}

#[derive(Debug, Default)]
pub struct Extraction {
    pub candidates: Vec<Candidate>,
    pub skipped: Vec<(Rule, usize, Skip)>,
}

fn renderable(text: &str) -> bool {
    !text.contains('✝') && !text.contains("?m") && !text.contains("?_") && !text.contains("?u")
}

/// The single goal of a state, with its hypotheses.
fn single_goal(state: Option<&ProofState>) -> Result<&ProofState, Skip> {
    let s = state.ok_or(Skip::MissingState)?;
    match s.goals.len() {
        0 => Err(Skip::Terminal),
        1 => {
            let texts = s
                .hypotheses
                .iter()
                .flat_map(|(n, t)| [n, t])
                .chain(s.goals.iter());
            if texts.into_iter().all(|t| renderable(t)) {
                Ok(s)
            } else {
                Err(Skip::Unrenderable)
            }
        }
        _ => Err(Skip::MultiGoal),
    }
}

/// Hypotheses as explicit binders, grouping consecutive equal types.
pub fn state_binders(hyps: &[(String, String)]) -> Vec<Binder> {
    let mut out: Vec<Binder> = Vec::new();
    for (name, ty) in hyps {
        match out.last_mut() {
            Some(b) if &b.type_text == ty => b.names.push(name.clone()),
            _ => out.push(Binder::explicit(name.clone(), ty.clone())),
        }
    }
    out
}

/// Hypotheses of `post` that `pre` does not have with the same type.
fn delta<'a>(pre: &[(String, String)], post: &'a [(String, String)]) -> Vec<&'a (String, String)> {
    post.iter().filter(|h| !pre.contains(h)).collect()
}

/// Granted hypothesis type and the closing tactic that applies it.
fn grant(new: &[&(String, String)], goal: &str, name: &str) -> Result<(String, String), Skip> {
    // A new name mentioned by the goal or another new hypothesis is a
    // dependency a plain implication cannot express.
    for (i, (n, _)) in new.iter().map(|h| (&h.0, &h.1)).enumerate() {
        let mentioned = |text: &str| {
            lex::ident_tokens(text)
                .iter()
                .any(|t| !t.qualified && t.text == n.as_str())
        };
        if mentioned(goal)
            || new
                .iter()
                .enumerate()
                .any(|(j, h)| j != i && mentioned(&h.1))
        {
            return Err(Skip::DependentDelta);
        }
    }
    Ok(match new.len() {
        0 => (goal.to_string(), format!("exact {name}")),
        1 => (
            format!("{} → {goal}", wrap(&new[0].1, false)),
            format!("exact {name} {}", new[0].0),
        ),
        _ => {
            let premise = new
                .iter()
                .map(|h| wrap(&h.1, true))
                .collect::<Vec<_>>()
                .join(" ∧ ");
            let witness = new
                .iter()
                .map(|h| h.0.as_str())
                .collect::<Vec<_>>()
                .join(", ");
            (
                format!("{premise} → {goal}"),
                format!("exact {name} ⟨{witness}⟩"),
            )
        }
    })
}

/// Parenthesizes a premise whose top-level connective would otherwise
/// capture the surrounding `∧` or `→`.
fn wrap(text: &str, in_conjunction: bool) -> String {
    let loose = lex::top_level_chars(text).iter().any(|c| {
        matches!(c.ch, '→' | '↔' | '∀' | '∃' | '∑' | '∏' | 'λ')
            || (in_conjunction && matches!(c.ch, '∧' | '∨'))
    }) || text.starts_with("fun ");
    if loose {
        format!("({text})")
    } else {
        text.to_string()
    }
}

/// A hypothesis name not used anywhere in `taken`.
pub fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|n| !taken.contains(n))
        .expect("unbounded")
}

fn taken_names(script: &TheoremScript, states: &[Option<ProofState>]) -> BTreeSet<String> {
    let mut taken: BTreeSet<String> = script.binder_names().into_iter().collect();
    for s in states.iter().flatten() {
        taken.extend(s.hypotheses.iter().map(|(n, _)| n.clone()));
    }
    for l in &script.body {
        taken.extend(
            lex::ident_tokens(&l.text)
                .iter()
                .map(|t| t.text.to_string()),
        );
    }
    taken
}

/// Forward, backward-pair and backward-prefix candidates. `states` holds
/// one entry per top-level step boundary.
pub fn candidates(script: &TheoremScript, states: &[Option<ProofState>]) -> Extraction {
    let steps = script.steps();
    let n = steps.len();
    let mut ex = Extraction::default();
    if n < 3 || states.len() != n + 1 {
        return ex;
    }
    let lines_of = |from: usize, to: usize| -> Vec<String> {
        if from >= to {
            return Vec::new();
        }
        reindent_lines(&script.body[steps[from].start..steps[to - 1].end], 2)
    };
    let granted = fresh_name("h_grant", &taken_names(script, states));

    for m in 1..=n - 2 {
        match single_goal(states[m].as_ref()) {
            Ok(s) => ex.candidates.push(Candidate {
                rule: Rule::Forward,
                param: m,
                binders: state_binders(&s.hypotheses),
                goal_text: s.goals[0].clone(),
                proof_lines: lines_of(m, n),
            }),
            Err(why) => ex.skipped.push((Rule::Forward, m, why)),
        }
    }

    for i in 0..=n - 3 {
        let result = single_goal(states[i].as_ref()).and_then(|pre| {
            let post = single_goal(states[i + 2].as_ref())?;
            let new = delta(&pre.hypotheses, &post.hypotheses);
            let (ty, close) = grant(&new, &post.goals[0], &granted)?;
            let mut binders = state_binders(&pre.hypotheses);
            binders.push(Binder::explicit(granted.clone(), ty));
            let mut proof_lines = lines_of(i, i + 2);
            proof_lines.push(format!("  {close}"));
            Ok(Candidate {
                rule: Rule::BackwardPair,
                param: i,
                binders,
                goal_text: pre.goals[0].clone(),
                proof_lines,
            })
        });
        match result {
            Ok(c) => ex.candidates.push(c),
            Err(why) => ex.skipped.push((Rule::BackwardPair, i, why)),
        }
    }

    if n >= 4 {
        for m in 2..=n - 2 {
            let result = single_goal(states[0].as_ref()).and_then(|start| {
                let post = single_goal(states[m].as_ref())?;
                let new = delta(&start.hypotheses, &post.hypotheses);
                let (ty, close) = grant(&new, &post.goals[0], &granted)?;
                let mut binders = script.binders.clone();
                binders.push(Binder::explicit(granted.clone(), ty));
                let mut proof_lines = lines_of(0, m);
                proof_lines.push(format!("  {close}"));
                Ok(Candidate {
                    rule: Rule::BackwardPrefix,
                    param: m,
                    binders,
                    goal_text: script.goal_text.clone(),
                    proof_lines,
                })
            });
            match result {
                Ok(c) => ex.candidates.push(c),
                Err(why) => ex.skipped.push((Rule::BackwardPrefix, m, why)),
            }
        }
    }
    ex
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(n: &str, t: &str) -> (String, String) {
        (n.to_string(), t.to_string())
    }

    #[test]
    fn grant_shapes() {
        assert_eq!(
            grant(&[], "a = b", "g").unwrap(),
            ("a = b".into(), "exact g".into())
        );
        let one = h("hx", "0 < x");
        assert_eq!(
            grant(&[&one], "x ≠ 0", "g").unwrap(),
            ("0 < x → x ≠ 0".into(), "exact g hx".into())
        );
        let two = h("hy", "P");
        assert_eq!(
            grant(&[&one, &two], "Q", "g").unwrap(),
            ("0 < x ∧ P → Q".into(), "exact g ⟨hx, hy⟩".into())
        );
        let var = h("k", "ℕ");
        assert_eq!(grant(&[&var], "k = 1", "g"), Err(Skip::DependentDelta));
    }

    #[test]
    fn binders_group_equal_types() {
        let b = state_binders(&[h("x", "ℕ"), h("y", "ℕ"), h("h", "x < y")]);
        assert_eq!(
            b.iter().map(Binder::render).collect::<Vec<_>>(),
            vec!["(x y : ℕ)", "(h : x < y)"]
        );
    }

    #[test]
    fn fresh_names_avoid_collisions() {
        let taken: BTreeSet<String> = ["h_grant".to_string(), "h_grant_1".to_string()].into();
        assert_eq!(fresh_name("h_grant", &taken), "h_grant_2");
    }
}
