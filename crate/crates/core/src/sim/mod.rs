//! A small stand-in for the Lean REPL.
//!
//! It speaks the REPL's JSON protocol (`cmd`/`env`, `tactic`/`proofState`)
//! and checks a deliberately tiny tactic language over propositions with
//! integer arithmetic: `intro`, `exact`, `apply`, `rw`, `have`, `constructor`,
//! `obtain`, bullets, and closing automation (`norm_num`, `simp`, `omega`,
//! `linarith`, ...) that decides closed arithmetic after substituting
//! `x = literal` hypotheses. Diagnostics follow Lean's message wording for
//! the cases the rest of the toolchain inspects (unknown identifiers,
//! unsolved goals, type mismatches, `sorry`).
//!
//! The simulator exists so the decomposition, evaluation and analysis
//! pipelines can be exercised end to end without a Lean installation. Two
//! extra tactics make the worker pool testable: `sim_loop` never returns and
//! `sim_crash` terminates the process.

pub mod expr;

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::proof_model::{self, lex, steps_of, LineKind, TacticLine};
use expr::{parse, BinOp, Expr};

/// Library constants available after `import Mathlib`.
const LIBRARY: &[(&str, &str)] = &[
    ("Nat.add_comm", "∀ (n m : ℕ), n + m = m + n"),
    ("Nat.mul_comm", "∀ (n m : ℕ), n * m = m * n"),
    ("Nat.add_zero", "∀ (n : ℕ), n + 0 = n"),
    ("Nat.zero_add", "∀ (n : ℕ), 0 + n = n"),
    ("Nat.mul_one", "∀ (n : ℕ), n * 1 = n"),
    ("Nat.one_mul", "∀ (n : ℕ), 1 * n = n"),
    ("Nat.le_refl", "∀ (n : ℕ), n ≤ n"),
    ("Nat.lt_irrefl", "∀ (n : ℕ), ¬n < n"),
    ("Nat.le_of_lt", "∀ (n m : ℕ), n < m → n ≤ m"),
    ("Nat.succ_le_of_lt", "∀ (n m : ℕ), n < m → n + 1 ≤ m"),
    ("Nat.pos_of_ne_zero", "∀ (n : ℕ), n ≠ 0 → 0 < n"),
    ("Nat.le_trans", "∀ (n m k : ℕ), n ≤ m → m ≤ k → n ≤ k"),
    ("Nat.lt_of_lt_of_le", "∀ (n m k : ℕ), n < m → m ≤ k → n < k"),
    ("add_comm", "∀ (a b : ℕ), a + b = b + a"),
    ("mul_comm", "∀ (a b : ℕ), a * b = b * a"),
    ("add_assoc", "∀ (a b c : ℕ), a + b + c = a + (b + c)"),
    ("mul_assoc", "∀ (a b c : ℕ), a * b * c = a * (b * c)"),
    ("two_mul", "∀ (a : ℕ), 2 * a = a + a"),
    ("pow_two", "∀ (a : ℕ), a ^ 2 = a * a"),
    ("sq_nonneg", "∀ (a : ℤ), 0 ≤ a ^ 2"),
    ("le_refl", "∀ (a : ℕ), a ≤ a"),
    ("le_trans", "∀ (a b c : ℕ), a ≤ b → b ≤ c → a ≤ c"),
    ("lt_of_le_of_lt", "∀ (a b c : ℕ), a ≤ b → b < c → a < c"),
    ("Eq.symm", "∀ (a b : ℕ), a = b → b = a"),
    ("Eq.trans", "∀ (a b c : ℕ), a = b → b = c → a = c"),
    ("True.intro", "True"),
];

/// Names and statements of the simulated library.
pub fn library() -> BTreeMap<String, Expr> {
    LIBRARY
        .iter()
        .map(|(n, t)| (n.to_string(), parse(t)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    pub hyps: Vec<(String, Expr)>,
    pub target: Expr,
}

impl Goal {
    /// Lean-style rendering; consecutive hypotheses of equal type share a line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut i = 0;
        while i < self.hyps.len() {
            let ty = &self.hyps[i].1;
            let mut names = vec![self.hyps[i].0.as_str()];
            let mut j = i + 1;
            while j < self.hyps.len() && &self.hyps[j].1 == ty {
                names.push(&self.hyps[j].0);
                j += 1;
            }
            out.push_str(&format!("{} : {}\n", names.join(" "), ty));
            i = j;
        }
        out.push_str(&format!("⊢ {}", self.target));
        out
    }

    fn hyp(&self, name: &str) -> Option<&Expr> {
        self.hyps
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    fn add_hyp(&mut self, name: &str, ty: Expr) {
        self.hyps.retain(|(n, _)| n != name);
        self.hyps.push((name.to_string(), ty));
    }
}

fn render_goals(goals: &[Goal]) -> String {
    goals
        .iter()
        .map(Goal::render)
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[derive(Debug)]
struct TacErr {
    line: usize,
    col: usize,
    msg: String,
}

struct SorryRec {
    line: usize,
    col: usize,
    goal: String,
    state: usize,
}

/// Whether a type expression denotes a proposition rather than a data type.
fn is_prop(e: &Expr) -> bool {
    match e {
        Expr::Bin(op, _, r) => match op {
            BinOp::Imp => is_prop(r),
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod | BinOp::Pow => false,
            _ => true,
        },
        Expr::Not(_) | Expr::Forall(..) | Expr::Exists(..) => true,
        Expr::Var(s) => s == "True" || s == "False",
        Expr::App(f, _) => {
            matches!(f.as_ref(), Expr::Var(s) if s.ends_with("Prime") || s.ends_with("Even") || s.ends_with("Odd"))
        }
        _ => false,
    }
}

fn closes_by_rfl(target: &Expr) -> bool {
    match target {
        Expr::Bin(BinOp::Eq, l, r) | Expr::Bin(BinOp::Iff, l, r) if l == r => true,
        Expr::Bin(BinOp::Le, l, r) | Expr::Bin(BinOp::Ge, l, r) if l == r => true,
        Expr::Var(s) if s == "True" => true,
        e => e.eval_prop() == Some(true),
    }
}

/// First-order matching of `pat` against `e`; `metas` are pattern variables.
fn match_expr(pat: &Expr, e: &Expr, metas: &[String], subst: &mut BTreeMap<String, Expr>) -> bool {
    if let Expr::Var(v) = pat {
        if metas.contains(v) {
            return match subst.get(v) {
                Some(bound) => bound == e,
                None => {
                    subst.insert(v.clone(), e.clone());
                    true
                }
            };
        }
    }
    match (pat, e) {
        (Expr::App(f1, a1), Expr::App(f2, a2)) => {
            a1.len() == a2.len()
                && match_expr(f1, f2, metas, subst)
                && a1
                    .iter()
                    .zip(a2)
                    .all(|(x, y)| match_expr(x, y, metas, subst))
        }
        (Expr::Bin(o1, l1, r1), Expr::Bin(o2, l2, r2)) => {
            o1 == o2 && match_expr(l1, l2, metas, subst) && match_expr(r1, r2, metas, subst)
        }
        (Expr::Not(a), Expr::Not(b)) | (Expr::Neg(a), Expr::Neg(b)) => {
            match_expr(a, b, metas, subst)
        }
        _ => pat == e,
    }
}

fn apply_subst(e: &Expr, subst: &BTreeMap<String, Expr>) -> Expr {
    subst.iter().fold(e.clone(), |acc, (k, v)| {
        acc.replace(&Expr::Var(k.clone()), v).0
    })
}

/// Splits `∀ binders, A → B → C` into metavariables, premises and conclusion.
fn telescope(ty: &Expr) -> (Vec<String>, Vec<Expr>, Expr) {
    let mut metas = Vec::new();
    let mut premises = Vec::new();
    let mut cur = ty.clone();
    loop {
        match cur {
            Expr::Forall(bs, body) => {
                for (n, t) in bs {
                    match t {
                        Some(t) if is_prop(&t) => premises.push(t),
                        _ => metas.push(n),
                    }
                }
                cur = *body;
            }
            Expr::Bin(BinOp::Imp, l, r) if is_prop(&l) => {
                premises.push(*l);
                cur = *r;
            }
            Expr::Not(inner) => {
                premises.push(*inner);
                cur = Expr::var("False");
            }
            other => return (metas, premises, other),
        }
    }
}

fn split_and(e: &Expr, n: usize) -> Option<Vec<Expr>> {
    if n == 1 {
        return Some(vec![e.clone()]);
    }
    match e {
        Expr::Bin(BinOp::And, l, r) => {
            let mut out = vec![(**l).clone()];
            out.extend(split_and(r, n - 1)?);
            Some(out)
        }
        _ => None,
    }
}

struct Elab<'a> {
    consts: &'a BTreeMap<String, Expr>,
    states: &'a mut Vec<Vec<Goal>>,
    sorries: Vec<SorryRec>,
    /// Source line (1-based) of body line index 0.
    line_base: usize,
    /// Position used for errors raised while checking terms.
    pos: (usize, usize),
}

impl<'a> Elab<'a> {
    fn err(&self, msg: impl Into<String>) -> TacErr {
        TacErr {
            line: self.pos.0,
            col: self.pos.1,
            msg: msg.into(),
        }
    }

    fn line_of(&self, l: &TacticLine) -> (usize, usize) {
        (self.line_base + l.index, l.indent)
    }

    fn record_sorry(&mut self, goal: &Goal) {
        self.states.push(vec![goal.clone()]);
        self.sorries.push(SorryRec {
            line: self.pos.0,
            col: self.pos.1,
            goal: goal.render(),
            state: self.states.len() - 1,
        });
    }

    fn lookup(&self, name: &str, goal: &Goal) -> Result<Expr, String> {
        if let Some(t) = goal.hyp(name) {
            return Ok(t.clone());
        }
        if let Some(t) = self.consts.get(name) {
            return Ok(t.clone());
        }
        if let Some((base, proj)) = name.rsplit_once('.') {
            if let Ok(t) = self.lookup(base, goal) {
                return project(&t, proj).ok_or_else(|| {
                    format!("invalid field '{proj}', the environment does not contain it\n  {base}\nhas type\n  {t}")
                });
            }
        }
        Err(format!("unknown identifier '{name}'"))
    }

    fn infer(&mut self, term: &Expr, goal: &Goal) -> Result<Expr, String> {
        match term {
            Expr::Var(name) => self.lookup(name, goal),
            Expr::Num(_) => Ok(Expr::var("ℕ")),
            Expr::App(f, args) => {
                let mut ty = self.infer(f, goal)?;
                for arg in args {
                    ty = self.apply_arg(ty, f, arg, goal)?;
                }
                Ok(ty)
            }
            other => Err(format!("sim: cannot infer the type of `{other}`")),
        }
    }

    fn apply_arg(&mut self, ty: Expr, f: &Expr, arg: &Expr, goal: &Goal) -> Result<Expr, String> {
        let mismatch = |this: &mut Self, expected: &Expr| -> Result<(), String> {
            this.check(arg, expected, goal).map_err(|e| {
                if e.starts_with("unknown identifier") {
                    e
                } else {
                    let has = this
                        .infer(arg, goal)
                        .map(|t| t.to_string())
                        .unwrap_or_else(|_| "?".into());
                    format!(
                        "application type mismatch\n  {f} {}\nargument\n  {arg}\nhas type\n  {has} : Prop\nbut is expected to have type\n  {expected} : Prop",
                        arg_text(arg)
                    )
                }
            })
        };
        match ty {
            Expr::Forall(mut bs, body) => {
                let (name, bty) = bs.remove(0);
                if let Some(t) = bty.as_ref().filter(|t| is_prop(t)) {
                    mismatch(self, t)?;
                }
                let from = Expr::Var(name);
                let rest: Vec<(String, Option<Expr>)> = bs
                    .into_iter()
                    .map(|(n, t)| (n, t.map(|t| t.replace(&from, arg).0)))
                    .collect();
                let body = body.replace(&from, arg).0;
                Ok(if rest.is_empty() {
                    body
                } else {
                    Expr::Forall(rest, Box::new(body))
                })
            }
            Expr::Bin(BinOp::Imp, a, b) => {
                mismatch(self, &a)?;
                Ok(*b)
            }
            Expr::Not(a) => {
                mismatch(self, &a)?;
                Ok(Expr::var("False"))
            }
            other => Err(format!(
                "function expected\n  {f}\nterm has type\n  {other}"
            )),
        }
    }

    fn check(&mut self, term: &Expr, expected: &Expr, goal: &Goal) -> Result<(), String> {
        match term {
            Expr::Anon(items) => {
                if let Expr::Bin(BinOp::Iff, l, r) = expected {
                    if items.len() == 2 {
                        self.check(
                            &items[0],
                            &Expr::bin(BinOp::Imp, (**l).clone(), (**r).clone()),
                            goal,
                        )?;
                        return self.check(
                            &items[1],
                            &Expr::bin(BinOp::Imp, (**r).clone(), (**l).clone()),
                            goal,
                        );
                    }
                }
                if let Expr::Exists(bs, body) = expected {
                    if items.len() == 2 && bs.len() == 1 {
                        let inst = body.replace(&Expr::Var(bs[0].0.clone()), &items[0]).0;
                        return self.check(&items[1], &inst, goal);
                    }
                }
                let parts = split_and(expected, items.len()).ok_or_else(|| {
                    format!("invalid constructor ⟨...⟩, expected type must be an inductive type \n  {expected}")
                })?;
                for (item, part) in items.iter().zip(parts) {
                    self.check(item, &part, goal)?;
                }
                Ok(())
            }
            Expr::ByTactic(text) => {
                let sub = Goal {
                    hyps: goal.hyps.clone(),
                    target: expected.clone(),
                };
                let rest = self.run_tactic_text(text, vec![sub]).map_err(|e| e.msg)?;
                if rest.is_empty() {
                    Ok(())
                } else {
                    Err(format!("unsolved goals\n{}", render_goals(&rest)))
                }
            }
            Expr::Var(s) if s == "rfl" => {
                if closes_by_rfl(expected) {
                    Ok(())
                } else {
                    Err(format!(
                        "The rfl tactic failed. The goal is not reflexive\n  {expected}"
                    ))
                }
            }
            Expr::Var(s) if s == "trivial" && closes_by_rfl(expected) => Ok(()),
            Expr::Var(s) if s == "sorry" => {
                let g = Goal {
                    hyps: goal.hyps.clone(),
                    target: expected.clone(),
                };
                self.record_sorry(&g);
                Ok(())
            }
            _ => {
                let ty = self.infer(term, goal)?;
                if &ty == expected || ty.fold_constants() == expected.fold_constants() {
                    return Ok(());
                }
                let (metas, premises, concl) = telescope(&ty);
                let mut subst = BTreeMap::new();
                if !metas.is_empty()
                    && premises.is_empty()
                    && match_expr(&concl, expected, &metas, &mut subst)
                {
                    return Ok(());
                }
                Err(format!(
                    "type mismatch\n  {term}\nhas type\n  {ty} : Prop\nbut is expected to have type\n  {expected} : Prop"
                ))
            }
        }
    }

    fn run_lines(
        &mut self,
        lines: &[TacticLine],
        mut goals: Vec<Goal>,
    ) -> Result<Vec<Goal>, TacErr> {
        for step in steps_of(lines) {
            goals = self.run_step(&lines[step.start..step.end], goals)?;
        }
        Ok(goals)
    }

    fn run_step(
        &mut self,
        lines: &[TacticLine],
        mut goals: Vec<Goal>,
    ) -> Result<Vec<Goal>, TacErr> {
        let first = &lines[0];
        self.pos = self.line_of(first);
        let text = first.text.trim();
        let rest: Vec<TacticLine> = lines[1..].to_vec();

        if let Some(inner) = text.strip_prefix('·').or_else(|| text.strip_prefix(". ")) {
            if goals.is_empty() {
                return Err(self.err("no goals to be proved"));
            }
            let focus = goals.remove(0);
            let mut sub = vec![synthetic(first, inner.trim(), first.indent + 2)];
            sub.extend(rest);
            let left = self.run_lines(&sub, vec![focus])?;
            if !left.is_empty() {
                self.pos = self.line_of(first);
                return Err(self.err(format!("unsolved goals\n{}", render_goals(&left))));
            }
            return Ok(goals);
        }

        if first.kind == LineKind::HaveIntro || text.starts_with("have ") {
            return self.run_have(lines, goals);
        }

        let mut joined = text.to_string();
        for l in &rest {
            if l.is_code() {
                joined.push(' ');
                joined.push_str(l.text.trim());
            }
        }
        self.run_tactic_text(&lex::strip_comments(&joined), goals)
    }

    fn run_have(
        &mut self,
        lines: &[TacticLine],
        mut goals: Vec<Goal>,
    ) -> Result<Vec<Goal>, TacErr> {
        let first = &lines[0];
        let text = lex::strip_comments(first.text.trim());
        let after = text
            .trim_start()
            .strip_prefix("have")
            .unwrap_or("")
            .to_string();
        let (head, proof) = match lex::find_assign(&after) {
            Some(a) => (
                after[..a].to_string(),
                Some(after[a + 2..].trim().to_string()),
            ),
            None => (after.clone(), None),
        };
        let colon = lex::find_type_colon(&head)
            .ok_or_else(|| self.err("sim: `have` without a type ascription"))?;
        let name = head[..colon].trim();
        let name = if name.is_empty() { "this" } else { name };
        let mut ty_text = head[colon + 1..].to_string();
        let mut continuation: Vec<TacticLine> = lines[1..].to_vec();
        // The statement may continue on deeper lines before `:=`.
        let mut proof = proof;
        if proof.is_none() {
            while let Some(l) = continuation.first().cloned() {
                let t = lex::strip_comments(l.text.trim());
                continuation.remove(0);
                if let Some(a) = lex::find_assign(&t) {
                    ty_text.push(' ');
                    ty_text.push_str(&t[..a]);
                    proof = Some(t[a + 2..].trim().to_string());
                    break;
                }
                ty_text.push(' ');
                ty_text.push_str(&t);
            }
        }
        let ty = parse(&ty_text);
        if goals.is_empty() {
            return Err(self.err("no goals to be proved"));
        }
        let current = goals[0].clone();
        match proof {
            Some(p) if p == "by" || p.starts_with("by ") || p.starts_with("by\t") => {
                let inline = p[2..].trim();
                let mut sub = Vec::new();
                if !inline.is_empty() {
                    sub.push(synthetic(first, inline, first.indent + 2));
                }
                sub.extend(continuation);
                let sub_goal = Goal {
                    hyps: current.hyps.clone(),
                    target: ty.clone(),
                };
                let left = self.run_lines(&sub, vec![sub_goal])?;
                if !left.is_empty() {
                    self.pos = self.line_of(first);
                    return Err(self.err(format!("unsolved goals\n{}", render_goals(&left))));
                }
                goals[0].add_hyp(name, ty);
                Ok(goals)
            }
            Some(term_text) => {
                let mut full = term_text;
                for l in &continuation {
                    if l.is_code() {
                        full.push(' ');
                        full.push_str(l.text.trim());
                    }
                }
                self.pos = self.line_of(first);
                let term = parse(&full);
                self.check(&term, &ty, &current).map_err(|m| self.err(m))?;
                goals[0].add_hyp(name, ty);
                Ok(goals)
            }
            None => {
                let new_goal = Goal {
                    hyps: current.hyps.clone(),
                    target: ty.clone(),
                };
                goals[0].add_hyp(name, ty);
                goals.insert(0, new_goal);
                Ok(goals)
            }
        }
    }

    fn run_tactic_text(&mut self, text: &str, mut goals: Vec<Goal>) -> Result<Vec<Goal>, TacErr> {
        for part in lex::split_top_level(text, "<;>")
            .into_iter()
            .flat_map(|p| lex::split_top_level(p, ";"))
        {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            goals = self.run_tactic(part, goals).map_err(|m| self.err(m))?;
        }
        Ok(goals)
    }

    fn run_tactic(&mut self, text: &str, mut goals: Vec<Goal>) -> Result<Vec<Goal>, String> {
        let head: String = text
            .chars()
            .take_while(|c| !c.is_whitespace() && *c != '[')
            .collect();
        let arg = text[head.len()..].trim();
        match head.as_str() {
            "skip" => return Ok(goals),
            "done" => {
                return if goals.is_empty() {
                    Ok(goals)
                } else {
                    Err(format!("unsolved goals\n{}", render_goals(&goals)))
                }
            }
            "sim_loop" => loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            },
            "sim_crash" => std::process::exit(101),
            _ => {}
        }
        if goals.is_empty() {
            return Err("no goals to be proved".into());
        }
        let goal = goals.remove(0);
        let push_front = |new: Vec<Goal>, mut rest: Vec<Goal>| {
            let mut out = new;
            out.append(&mut rest);
            out
        };
        match head.as_str() {
            "sorry" | "admit" => {
                self.record_sorry(&goal);
                Ok(goals)
            }
            "exact" | "exact_mod_cast" => {
                let term = parse(arg);
                self.check(&term, &goal.target, &goal)?;
                Ok(goals)
            }
            "apply" => {
                let term = parse(arg);
                let ty = self.infer(&term, &goal)?;
                if ty == goal.target {
                    return Ok(goals);
                }
                let (metas, premises, concl) = telescope(&ty);
                for keep in (0..=premises.len()).rev() {
                    // Conclusion after consuming only the first `keep` premises.
                    let mut c = concl.clone();
                    for p in premises[keep..].iter().rev() {
                        c = Expr::bin(BinOp::Imp, p.clone(), c);
                    }
                    let mut subst = BTreeMap::new();
                    if match_expr(&c, &goal.target, &metas, &mut subst) {
                        let new: Vec<Goal> = premises[..keep]
                            .iter()
                            .map(|p| Goal {
                                hyps: goal.hyps.clone(),
                                target: apply_subst(p, &subst),
                            })
                            .collect();
                        return Ok(push_front(new, goals));
                    }
                }
                Err(format!(
                    "tactic 'apply' failed, could not unify the conclusion of `{term}`\n  {ty}\nwith the goal\n  {}",
                    goal.target
                ))
            }
            "intro" | "intros" => {
                let mut g = goal;
                let names: Vec<String> = if arg.is_empty() {
                    vec!["a✝".to_string()]
                } else {
                    arg.split_whitespace().map(str::to_string).collect()
                };
                for n in names {
                    g = intro_one(g, &n).ok_or_else(|| {
                        "no additional binders or hypotheses to introduce".to_string()
                    })?;
                }
                Ok(push_front(vec![g], goals))
            }
            "constructor" => match &goal.target {
                Expr::Bin(BinOp::And, l, r) => Ok(push_front(
                    vec![
                        Goal {
                            hyps: goal.hyps.clone(),
                            target: (**l).clone(),
                        },
                        Goal {
                            hyps: goal.hyps.clone(),
                            target: (**r).clone(),
                        },
                    ],
                    goals,
                )),
                Expr::Bin(BinOp::Iff, l, r) => Ok(push_front(
                    vec![
                        Goal {
                            hyps: goal.hyps.clone(),
                            target: Expr::bin(BinOp::Imp, (**l).clone(), (**r).clone()),
                        },
                        Goal {
                            hyps: goal.hyps.clone(),
                            target: Expr::bin(BinOp::Imp, (**r).clone(), (**l).clone()),
                        },
                    ],
                    goals,
                )),
                t => Err(format!(
                    "tactic 'constructor' failed, target is not an inductive datatype\n  {t}"
                )),
            },
            "left" | "right" => match &goal.target {
                Expr::Bin(BinOp::Or, l, r) => {
                    let t = if head == "left" { l } else { r };
                    Ok(push_front(
                        vec![Goal {
                            hyps: goal.hyps.clone(),
                            target: (**t).clone(),
                        }],
                        goals,
                    ))
                }
                t => Err(format!(
                    "tactic '{head}' failed, target is not a disjunction\n  {t}"
                )),
            },
            "exfalso" => Ok(push_front(
                vec![Goal {
                    hyps: goal.hyps.clone(),
                    target: Expr::var("False"),
                }],
                goals,
            )),
            "show" => {
                let t = parse(arg);
                if t == goal.target || t.fold_constants() == goal.target.fold_constants() {
                    Ok(push_front(
                        vec![Goal {
                            hyps: goal.hyps,
                            target: t,
                        }],
                        goals,
                    ))
                } else {
                    Err(format!(
                        "type mismatch\n  {t}\nis not definitionally equal to the goal\n  {}",
                        goal.target
                    ))
                }
            }
            "obtain" | "rcases" => {
                let (pattern, source) = if head == "obtain" {
                    let a = lex::find_assign(arg).ok_or("sim: `obtain` needs `:=`")?;
                    (arg[..a].trim(), arg[a + 2..].trim())
                } else {
                    let (s, p) = arg
                        .split_once(" with ")
                        .ok_or("sim: `rcases` needs `with`")?;
                    (p.trim(), s.trim())
                };
                let names: Vec<String> = pattern
                    .trim_start_matches('⟨')
                    .trim_end_matches('⟩')
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .collect();
                let src_ty = self.infer(&parse(source), &goal)?;
                let mut g = goal.clone();
                if let Expr::Exists(bs, body) = &src_ty {
                    if names.len() == 2 && bs.len() == 1 {
                        let witness = Expr::Var(names[0].clone());
                        g.hyps.retain(|(n, _)| n != source);
                        g.add_hyp(&names[0], bs[0].1.clone().unwrap_or(Expr::var("ℕ")));
                        g.add_hyp(
                            &names[1],
                            body.replace(&Expr::Var(bs[0].0.clone()), &witness).0,
                        );
                        return Ok(push_front(vec![g], goals));
                    }
                }
                let parts = split_and(&src_ty, names.len()).ok_or_else(|| {
                    format!("rcases: pattern does not match the type\n  {src_ty}")
                })?;
                g.hyps.retain(|(n, _)| n != source);
                for (n, t) in names.iter().zip(parts) {
                    g.add_hyp(n, t);
                }
                Ok(push_front(vec![g], goals))
            }
            "rw" | "rewrite" | "rwa" => {
                let g = self.rewrite(arg, goal, head == "rwa")?;
                Ok(match g {
                    Some(g) => push_front(vec![g], goals),
                    None => goals,
                })
            }
            "norm_num" | "simp" | "simp_all" | "simp_arith" | "decide" | "rfl" | "ring"
            | "ring_nf" | "norm_cast" | "push_cast" | "field_simp" | "trivial" | "nlinarith"
            | "linarith" | "omega" | "positivity" | "assumption" | "exact?" | "hint" | "aesop"
            | "tauto" | "polyrith" => {
                if arg.contains(" at ") || arg.starts_with("at ") {
                    return Err(format!("sim: `{head} at` is not supported"));
                }
                if self.automation(&head, arg, &goal) {
                    Ok(goals)
                } else {
                    Err(automation_failure(&head, &goal))
                }
            }
            "calc" | "induction" | "cases" | "by_cases" | "interval_cases" | "by_contra"
            | "nth_rewrite" | "use" | "refine" | "specialize" | "unfold" | "contrapose"
            | "push_neg" | "subst" | "conv" | "change" | "set" | "let" | "suffices" => {
                Err(format!("sim: tactic '{head}' is not supported"))
            }
            _ => Err(format!("unknown tactic '{head}'")),
        }
    }

    fn rewrite(
        &mut self,
        arg: &str,
        goal: Goal,
        close_with_assumption: bool,
    ) -> Result<Option<Goal>, String> {
        let (rules, at) = match arg.rfind(" at ") {
            Some(i) => (&arg[..i], Some(arg[i + 4..].trim().to_string())),
            None => (arg, None),
        };
        let rules = rules.trim();
        let inner = rules
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| "sim: `rw` expects a bracketed rule list".to_string())?;
        let mut g = goal;
        for rule in lex::split_top_level(inner, ",") {
            let rule = rule.trim();
            let (rev, term_text) = match rule.strip_prefix('←').or_else(|| rule.strip_prefix("<-"))
            {
                Some(r) => (true, r.trim()),
                None => (false, rule),
            };
            let term = parse(term_text);
            let ty = self.infer(&term, &g)?;
            let subject = match &at {
                Some(h) => g
                    .hyp(h)
                    .cloned()
                    .ok_or_else(|| format!("unknown identifier '{h}'"))?,
                None => g.target.clone(),
            };
            let (metas, premises, concl) = telescope(&ty);
            if !premises.is_empty() {
                return Err(format!(
                    "sim: conditional rewrite with `{term_text}` is not supported"
                ));
            }
            let (lhs, rhs) = match concl {
                Expr::Bin(BinOp::Eq, l, r) | Expr::Bin(BinOp::Iff, l, r) => {
                    if rev {
                        (*r, *l)
                    } else {
                        (*l, *r)
                    }
                }
                other => return Err(format!("equality or iff proof expected\n  {other}")),
            };
            let (lhs, rhs) = if metas.is_empty() {
                (lhs, rhs)
            } else {
                let subst = first_instance(&lhs, &subject, &metas).ok_or_else(|| {
                    format!("tactic 'rewrite' failed, did not find instance of the pattern in the target expression\n  {lhs}")
                })?;
                (apply_subst(&lhs, &subst), apply_subst(&rhs, &subst))
            };
            let (new, hit) = subject.replace(&lhs, &rhs);
            if !hit {
                return Err(format!(
                    "tactic 'rewrite' failed, did not find instance of the pattern in the target expression\n  {lhs}"
                ));
            }
            match &at {
                Some(h) => {
                    if let Some(slot) = g.hyps.iter_mut().rev().find(|(n, _)| n == h) {
                        slot.1 = new;
                    }
                }
                None => g.target = new,
            }
        }
        if closes_by_rfl(&g.target) {
            return Ok(None);
        }
        if close_with_assumption {
            if g.hyps.iter().any(|(_, t)| t == &g.target) {
                return Ok(None);
            }
            return Err(format!("tactic 'assumption' failed\n{}", g.render()));
        }
        Ok(Some(g))
    }

    fn automation(&mut self, head: &str, arg: &str, goal: &Goal) -> bool {
        let mut hyps: Vec<Expr> = goal.hyps.iter().map(|(_, t)| t.clone()).collect();
        // Bracketed extra facts, e.g. `simp [h]` or `linarith [h₁, h₂]`.
        if let Some(inner) = arg
            .trim()
            .trim_start_matches("only")
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
        {
            for fact in lex::split_top_level(inner, ",") {
                let fact = fact.trim();
                if fact == "*" || fact.is_empty() {
                    continue;
                }
                if let Ok(t) = self.infer(&parse(fact.trim_start_matches('←')), goal) {
                    hyps.push(t);
                }
            }
        }
        let target = &goal.target;
        if closes_by_rfl(target) {
            return true;
        }
        if head == "rfl"
            || head == "decide"
            || head == "ring"
            || head == "ring_nf"
            || head == "norm_cast"
            || head == "push_cast"
            || head == "trivial"
        {
            return target.fold_constants().eval_prop() == Some(true)
                || closes_by_rfl(&target.fold_constants());
        }
        if hyps.iter().any(|h| h == target) {
            return true;
        }
        // Substitute `x = literal` facts, then decide the closed goal.
        let mut t = target.clone();
        for h in &hyps {
            if let Expr::Bin(BinOp::Eq, l, r) = h {
                match (l.as_ref(), r.eval_int(), l.eval_int()) {
                    (Expr::Var(_), Some(v), _) => t = t.replace(l, &Expr::Num(v)).0,
                    (_, _, Some(v)) if matches!(r.as_ref(), Expr::Var(_)) => {
                        t = t.replace(r, &Expr::Num(v)).0
                    }
                    _ => {}
                }
            }
        }
        closes_by_rfl(&t.fold_constants())
    }
}

fn automation_failure(head: &str, goal: &Goal) -> String {
    match head {
        "linarith" | "nlinarith" => format!("linarith failed to find a contradiction\n{}", goal.render()),
        "omega" => format!(
            "omega could not prove the goal:\nNo usable constraints found for the hypotheses and goal.\n{}",
            goal.render()
        ),
        "simp" | "simp_all" | "simp_arith" => "simp made no progress".to_string(),
        "decide" => format!("failed to reduce to true/false\n  {}", goal.target),
        "rfl" => format!("The rfl tactic failed. The goal is not reflexive\n  {}", goal.target),
        "assumption" => format!("tactic 'assumption' failed\n{}", goal.render()),
        "exact?" => "`exact?` could not close the goal. Try `apply?` to see partial suggestions.".to_string(),
        "positivity" => "failed to prove positivity".to_string(),
        "ring" | "ring_nf" => format!("ring failed, ring_nf subsidiary goal\n{}", goal.render()),
        other => format!("{other} failed\n{}", goal.render()),
    }
}

fn first_instance(pat: &Expr, e: &Expr, metas: &[String]) -> Option<BTreeMap<String, Expr>> {
    let mut subst = BTreeMap::new();
    if match_expr(pat, e, metas, &mut subst) {
        return Some(subst);
    }
    match e {
        Expr::App(f, args) => std::iter::once(f.as_ref())
            .chain(args.iter())
            .find_map(|x| first_instance(pat, x, metas)),
        Expr::Bin(_, l, r) => {
            first_instance(pat, l, metas).or_else(|| first_instance(pat, r, metas))
        }
        Expr::Not(x) | Expr::Neg(x) => first_instance(pat, x, metas),
        _ => None,
    }
}

fn project(t: &Expr, proj: &str) -> Option<Expr> {
    match (proj, t) {
        ("1" | "left", Expr::Bin(BinOp::And, l, _)) => Some((**l).clone()),
        ("2" | "right", Expr::Bin(BinOp::And, _, r)) => Some((**r).clone()),
        ("mp" | "1", Expr::Bin(BinOp::Iff, l, r)) => {
            Some(Expr::bin(BinOp::Imp, (**l).clone(), (**r).clone()))
        }
        ("mpr" | "2", Expr::Bin(BinOp::Iff, l, r)) => {
            Some(Expr::bin(BinOp::Imp, (**r).clone(), (**l).clone()))
        }
        ("symm", Expr::Bin(op @ (BinOp::Eq | BinOp::Ne), l, r)) => {
            Some(Expr::bin(*op, (**r).clone(), (**l).clone()))
        }
        ("le", Expr::Bin(BinOp::Lt, l, r)) => {
            Some(Expr::bin(BinOp::Le, (**l).clone(), (**r).clone()))
        }
        ("le", Expr::Bin(BinOp::Eq, l, r)) => {
            Some(Expr::bin(BinOp::Le, (**l).clone(), (**r).clone()))
        }
        ("ne", Expr::Bin(BinOp::Lt, l, r)) => {
            Some(Expr::bin(BinOp::Ne, (**l).clone(), (**r).clone()))
        }
        _ => None,
    }
}

fn arg_text(arg: &Expr) -> String {
    match arg {
        Expr::Var(_) | Expr::Num(_) | Expr::Anon(_) => arg.to_string(),
        other => format!("({other})"),
    }
}

fn intro_one(mut g: Goal, name: &str) -> Option<Goal> {
    match g.target.clone() {
        Expr::Bin(BinOp::Imp, l, r) => {
            g.add_hyp(name, *l);
            g.target = *r;
            Some(g)
        }
        Expr::Not(inner) => {
            g.add_hyp(name, *inner);
            g.target = Expr::var("False");
            Some(g)
        }
        Expr::Forall(mut bs, body) => {
            let (bound, ty) = bs.remove(0);
            let rename = |e: &Expr| {
                e.replace(&Expr::Var(bound.clone()), &Expr::Var(name.to_string()))
                    .0
            };
            g.add_hyp(name, ty.unwrap_or(Expr::var("ℕ")));
            let body = rename(&body);
            g.target = if bs.is_empty() {
                body
            } else {
                let bs = bs
                    .into_iter()
                    .map(|(n, t)| (n, t.map(|t| rename(&t))))
                    .collect();
                Expr::Forall(bs, Box::new(body))
            };
            Some(g)
        }
        _ => None,
    }
}

fn synthetic(base: &TacticLine, text: &str, indent: usize) -> TacticLine {
    TacticLine {
        index: base.index,
        text: format!("{}{}", " ".repeat(indent), text),
        indent,
        kind: if text.starts_with("have") {
            LineKind::HaveIntro
        } else {
            LineKind::Plain
        },
        introduced: None,
    }
}

/// Replaces comment characters with spaces, keeping line structure.
fn blank_comments(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let n = chars.get(i + 1).copied();
        if c == '-' && n == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                out.push(' ');
                i += 1;
            }
        } else if c == '/' && n == Some('-') {
            let mut nest = 0;
            loop {
                if i >= chars.len() {
                    break;
                }
                let c = chars[i];
                let n = chars.get(i + 1).copied();
                if c == '/' && n == Some('-') {
                    nest += 1;
                    out.push_str("  ");
                    i += 2;
                } else if c == '-' && n == Some('/') {
                    nest -= 1;
                    out.push_str("  ");
                    i += 2;
                    if nest == 0 {
                        break;
                    }
                } else {
                    out.push(if c == '\n' { '\n' } else { ' ' });
                    i += 1;
                }
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

fn position_of(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rsplit('\n')
        .next()
        .map(|s| s.chars().count())
        .unwrap_or(0);
    (line, col)
}

fn message(severity: &str, line: usize, col: usize, data: &str) -> Value {
    json!({
        "severity": severity,
        "pos": {"line": line, "column": col},
        "endPos": {"line": line, "column": col},
        "data": data,
    })
}

/// REPL state: environments and saved proof states.
pub struct Simulator {
    envs: Vec<BTreeMap<String, Expr>>,
    states: Vec<Vec<Goal>>,
    tactic_mode: bool,
}

impl Default for Simulator {
    fn default() -> Self {
        Self {
            envs: Vec::new(),
            states: Vec::new(),
            tactic_mode: true,
        }
    }
}

impl Simulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mimics REPL builds without tactic mode: no proof-state ids are
    /// reported and `tactic` requests are rejected.
    pub fn without_tactic_mode() -> Self {
        Self {
            tactic_mode: false,
            ..Self::default()
        }
    }

    /// Handles one request object and returns the response object.
    pub fn handle(&mut self, req: &Value) -> Value {
        if let Some(cmd) = req.get("cmd").and_then(Value::as_str) {
            let env = req.get("env").and_then(Value::as_u64);
            return self.command(cmd, env);
        }
        if let Some(tactic) = req
            .get("tactic")
            .and_then(Value::as_str)
            .filter(|_| self.tactic_mode)
        {
            let ps = req.get("proofState").and_then(Value::as_u64);
            return self.tactic(tactic, ps);
        }
        json!({"message": "Could not parse as a valid JSON command"})
    }

    fn command(&mut self, cmd: &str, env: Option<u64>) -> Value {
        let mut consts = match env {
            Some(id) => match self.envs.get(id as usize) {
                Some(c) => c.clone(),
                None => return json!({"message": format!("Unknown environment {id}.")}),
            },
            None => BTreeMap::new(),
        };
        let blank = blank_comments(cmd);
        if blank
            .lines()
            .any(|l| l.trim_start().starts_with("import Mathlib"))
        {
            consts.extend(library());
        }
        let mut messages = Vec::new();
        let mut sorries = Vec::new();

        if blank.contains("#eval") && blank.contains(".constants") {
            let (line, _) = position_of(&blank, blank.find("#eval").unwrap_or(0));
            let names: Vec<&str> = consts.keys().map(String::as_str).collect();
            messages.push(message("info", line, 0, &names.join("\n")));
        }

        let decls = proof_model::list_declarations(&blank);
        for (i, decl) in decls.iter().enumerate() {
            let end = decls
                .get(i + 1)
                .map(|d| d.line_start)
                .unwrap_or(blank.len());
            let region = &blank[..end];
            let (decl_line, _) = position_of(&blank, decl.line_start);
            let sig = match proof_model::signature(region, decl) {
                Ok(s) => s,
                Err(e) => {
                    messages.push(message(
                        "error",
                        decl_line,
                        decl.indent,
                        &format!("sim: {e}"),
                    ));
                    continue;
                }
            };
            let mut hyps = Vec::new();
            for b in &sig.binders {
                for n in &b.names {
                    hyps.push((n.clone(), parse(&b.type_text)));
                }
            }
            let goal = Goal {
                hyps,
                target: parse(&sig.goal_text),
            };
            let mut elab = Elab {
                consts: &consts,
                states: &mut self.states,
                sorries: Vec::new(),
                line_base: 1,
                pos: (decl_line, decl.indent),
            };
            let outcome: Result<(), TacErr> = match sig.by_end {
                Some(by_end) => match proof_model::parse_declaration(region, decl) {
                    Ok(script) => {
                        let (by_line, by_col) = position_of(&blank, by_end - 2);
                        elab.line_base = if script.inline_first {
                            by_line
                        } else {
                            by_line + 1
                        };
                        match elab.run_lines(&script.body, vec![goal.clone()]) {
                            Ok(left) if left.is_empty() => Ok(()),
                            Ok(left) => Err(TacErr {
                                line: by_line,
                                col: by_col,
                                msg: format!("unsolved goals\n{}", render_goals(&left)),
                            }),
                            Err(e) => Err(e),
                        }
                    }
                    Err(e) => Err(TacErr {
                        line: decl_line,
                        col: decl.indent,
                        msg: format!("sim: {e}"),
                    }),
                },
                None => {
                    let (line, col) = position_of(&blank, sig.proof_start);
                    elab.pos = (line, col);
                    let term = parse(&region[sig.proof_start..]);
                    elab.check(&term, &goal.target, &goal)
                        .map_err(|m| TacErr { line, col, msg: m })
                }
            };
            let recorded = std::mem::take(&mut elab.sorries);
            if let Err(e) = &outcome {
                messages.push(message("error", e.line, e.col, &e.msg));
            }
            if !recorded.is_empty() {
                messages.push(message(
                    "warning",
                    decl_line,
                    decl.indent,
                    "declaration uses 'sorry'",
                ));
            }
            for s in recorded {
                sorries.push(json!({
                    "pos": {"line": s.line, "column": s.col},
                    "endPos": {"line": s.line, "column": s.col + 5},
                    "goal": s.goal,
                    "proofState": s.state,
                }));
                if !self.tactic_mode {
                    if let Some(obj) = sorries.last_mut().and_then(Value::as_object_mut) {
                        obj.remove("proofState");
                    }
                }
            }
            if !decl.name.is_empty() {
                let mut bs: Vec<(String, Option<Expr>)> = Vec::new();
                for b in &sig.binders {
                    for n in &b.names {
                        bs.push((n.clone(), Some(parse(&b.type_text))));
                    }
                }
                let ty = if bs.is_empty() {
                    goal.target.clone()
                } else {
                    Expr::Forall(bs, Box::new(goal.target.clone()))
                };
                consts.insert(decl.name.clone(), ty);
            }
        }

        self.envs.push(consts);
        let mut resp = json!({"env": self.envs.len() - 1});
        if !messages.is_empty() {
            resp["messages"] = Value::Array(messages);
        }
        if !sorries.is_empty() {
            resp["sorries"] = Value::Array(sorries);
        }
        resp
    }

    fn tactic(&mut self, tactic: &str, ps: Option<u64>) -> Value {
        let goals = match ps.and_then(|p| self.states.get(p as usize)) {
            Some(g) => g.clone(),
            None => return json!({"message": "Unknown proof state."}),
        };
        let texts: Vec<String> = tactic.lines().map(str::to_string).collect();
        let body = proof_model::build_body(&texts);
        let consts = self.envs.last().cloned().unwrap_or_else(library);
        let mut elab = Elab {
            consts: &consts,
            states: &mut self.states,
            sorries: Vec::new(),
            line_base: 1,
            pos: (1, 0),
        };
        match elab.run_lines(&body, goals) {
            Ok(left) => {
                let rendered: Vec<String> = left.iter().map(Goal::render).collect();
                self.states.push(left);
                json!({"proofState": self.states.len() - 1, "goals": rendered})
            }
            Err(e) => json!({"message": format!("Lean error:\n{}", e.msg)}),
        }
    }
}

/// Runs the simulator over newline-delimited JSON on stdin/stdout. Requests
/// may span several lines; a blank line or a complete JSON value ends one.
pub fn serve(
    mut sim: Simulator,
    input: impl std::io::BufRead,
    mut output: impl std::io::Write,
) -> std::io::Result<()> {
    let mut buf = String::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() && buf.trim().is_empty() {
            continue;
        }
        buf.push_str(&line);
        buf.push('\n');
        let req: Value = match serde_json::from_str(&buf) {
            Ok(v) => v,
            Err(e) if e.is_eof() => continue,
            Err(_) => {
                buf.clear();
                writeln!(
                    output,
                    "{}\n",
                    json!({"message": "Could not parse as a valid JSON command"})
                )?;
                output.flush()?;
                continue;
            }
        };
        buf.clear();
        let resp = sim.handle(&req);
        writeln!(output, "{resp}\n")?;
        output.flush()?;
    }
    Ok(())
}

/// The simulator as an in-process [`Oracle`](crate::repl::Oracle), for tests
/// that do not need process isolation. `sim_loop` hangs it.
pub struct LocalOracle {
    client: std::sync::Mutex<crate::repl::Client<LocalSession>>,
}

pub struct LocalSession(Simulator);

impl crate::repl::Session for LocalSession {
    fn request(
        &mut self,
        req: &Value,
        _timeout: std::time::Duration,
    ) -> Result<Value, crate::repl::SessionError> {
        Ok(self.0.handle(req))
    }

    fn restart(&mut self) -> Result<(), crate::repl::OracleError> {
        self.0 = Simulator::new();
        Ok(())
    }
}

impl LocalOracle {
    pub fn new() -> Self {
        let client = crate::repl::Client::new(
            LocalSession(Simulator::new()),
            std::time::Duration::from_secs(60),
            None,
        );
        Self {
            client: std::sync::Mutex::new(client),
        }
    }
}

impl Default for LocalOracle {
    fn default() -> Self {
        Self::new()
    }
}

impl crate::repl::Oracle for LocalOracle {
    fn verify(
        &self,
        request: &crate::repl::OracleRequest,
    ) -> Result<crate::repl::VerificationResult, crate::repl::OracleError> {
        let mut client = self.client.lock().unwrap_or_else(|p| p.into_inner());
        client.verify(request)
    }
}
