//! Lemmas from intermediate `have` hypotheses.

use crate::proof_model::{lex, reindent_lines, Binder, LineKind, TacticLine, TheoremScript};

use super::{Candidate, Rule};

struct HaveBlock {
    start: usize,
    end: usize,
    name: String,
    type_text: String,
}

fn have_blocks(script: &TheoremScript) -> Vec<HaveBlock> {
    script
        .top_level_haves()
        .into_iter()
        .map(|start| {
            let line = &script.body[start];
            let intro = line.introduced.clone().unwrap_or_default();
            HaveBlock {
                start,
                end: crate::proof_model::block_end(&script.body, start),
                name: intro.hyp_name,
                type_text: intro.hyp_type_text,
            }
        })
        .collect()
}

/// The sub-proof of a `have` block as standalone tactic lines.
fn sub_proof(body: &[TacticLine], block: &HaveBlock) -> Vec<String> {
    let first = lex::strip_comments(body[block.start].text.trim());
    let continuation = &body[block.start + 1..block.end];
    let rest = lex::find_assign(&first).map(|a| first[a + 2..].trim().to_string());
    match rest {
        Some(r) if r == "by" || r.starts_with("by ") => {
            let mut lines = Vec::new();
            let inline = r[2..].trim();
            if !inline.is_empty() {
                lines.push(format!("  {inline}"));
            }
            lines.extend(reindent_lines(continuation, 2));
            lines
        }
        Some(term) => {
            let mut lines = vec![format!("  exact {term}")];
            lines.extend(reindent_lines(continuation, 4));
            lines
        }
        None => reindent_lines(continuation, 2),
    }
}

/// `2k` candidates: one lifted hypothesis and one cumulative grant per
/// top-level `have`. Empty when the script has no top-level `have`.
pub fn candidates(script: &TheoremScript) -> Vec<Candidate> {
    let blocks = have_blocks(script);
    let mut out = Vec::with_capacity(2 * blocks.len());
    let granted = |upto: usize| -> Vec<Binder> {
        let mut b = script.binders.clone();
        b.extend(
            blocks[..upto]
                .iter()
                .map(|h| Binder::explicit(h.name.clone(), h.type_text.clone())),
        );
        b
    };
    for (j, block) in blocks.iter().enumerate() {
        out.push(Candidate {
            rule: Rule::HypothesisLift,
            param: j + 1,
            binders: granted(j),
            goal_text: block.type_text.clone(),
            proof_lines: sub_proof(&script.body, block),
        });
    }
    for j in 1..=blocks.len() {
        let removed = |i: usize| blocks[..j].iter().any(|b| (b.start..b.end).contains(&i));
        let remaining: Vec<TacticLine> = script
            .body
            .iter()
            .filter(|l| !removed(l.index))
            .cloned()
            .collect();
        // Leading comment lines left behind by removed blocks carry no proof.
        let first_code = remaining
            .iter()
            .position(|l| l.kind != LineKind::CommentOrBlank)
            .unwrap_or(remaining.len());
        out.push(Candidate {
            rule: Rule::CumulativeGrant,
            param: j,
            binders: granted(j),
            goal_text: script.goal_text.clone(),
            proof_lines: reindent_lines(&remaining[first_code..], 2),
        });
    }
    out
}
