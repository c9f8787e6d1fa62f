//! Lean-flavoured expressions for the simulator: a Pratt parser, a printer
//! that emits minimal parentheses, closed-term evaluation and substitution.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Iff,
    Imp,
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Dvd,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
}

impl BinOp {
    fn from_sym(s: &str) -> Option<BinOp> {
        Some(match s {
            "↔" | "<->" => BinOp::Iff,
            "→" | "->" => BinOp::Imp,
            "∨" | "\\/" => BinOp::Or,
            "∧" | "/\\" => BinOp::And,
            "=" => BinOp::Eq,
            "≠" | "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            ">" => BinOp::Gt,
            "≤" | "<=" => BinOp::Le,
            "≥" | ">=" => BinOp::Ge,
            "∣" => BinOp::Dvd,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Mod,
            "^" => BinOp::Pow,
            _ => return None,
        })
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Iff => "↔",
            BinOp::Imp => "→",
            BinOp::Or => "∨",
            BinOp::And => "∧",
            BinOp::Eq => "=",
            BinOp::Ne => "≠",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "≤",
            BinOp::Ge => "≥",
            BinOp::Dvd => "∣",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Pow => "^",
        }
    }

    fn prec(self) -> u32 {
        match self {
            BinOp::Iff => 20,
            BinOp::Imp => 25,
            BinOp::Or => 30,
            BinOp::And => 35,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge | BinOp::Dvd => {
                50
            }
            BinOp::Add | BinOp::Sub => 65,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 70,
            BinOp::Pow => 75,
        }
    }

    fn right_assoc(self) -> bool {
        matches!(self, BinOp::Imp | BinOp::Or | BinOp::And | BinOp::Pow)
    }

    fn relation(self) -> bool {
        self.prec() == 50
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(i128),
    Var(String),
    App(Box<Expr>, Vec<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Forall(Vec<(String, Option<Expr>)>, Box<Expr>),
    Exists(Vec<(String, Option<Expr>)>, Box<Expr>),
    Anon(Vec<Expr>),
    ByTactic(String),
    Opaque(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Num(i128),
    Ident(String),
    Sym(String),
}

const MULTI_SYMS: &[&str] = &["<->", "->", "<=", ">=", "!=", "=>", "/\\", "\\/", ":="];

fn tokenize(text: &str) -> Option<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            toks.push(Tok::Num(s.parse().ok()?));
            i = j;
            continue;
        }
        if crate::proof_model::lex::is_ident_start(c) {
            let mut j = i;
            loop {
                while j < chars.len() && crate::proof_model::lex::is_ident_char(chars[j]) {
                    j += 1;
                }
                // Dotted continuation: `Nat.succ`, `h.1`, `h.symm`.
                if j + 1 < chars.len()
                    && chars[j] == '.'
                    && (crate::proof_model::lex::is_ident_char(chars[j + 1]))
                {
                    j += 1;
                    continue;
                }
                break;
            }
            toks.push(Tok::Ident(chars[i..j].iter().collect()));
            i = j;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        if let Some(m) = MULTI_SYMS.iter().find(|m| rest.starts_with(**m)) {
            toks.push(Tok::Sym(m.to_string()));
            i += m.chars().count();
            continue;
        }
        toks.push(Tok::Sym(c.to_string()));
        i += 1;
    }
    Some(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if x == s)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect_sym(&mut self, s: &str) -> Option<()> {
        if self.peek_sym(s) {
            self.pos += 1;
            Some(())
        } else {
            None
        }
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Some(Tok::Num(_)) => true,
            Some(Tok::Ident(s)) => s != "fun" && s != "by",
            Some(Tok::Sym(s)) => s == "(" || s == "⟨" || s == "↑",
            None => false,
        }
    }

    fn atom(&mut self) -> Option<Expr> {
        match self.bump()? {
            Tok::Num(n) => Some(Expr::Num(n)),
            Tok::Ident(s) => Some(Expr::Var(s)),
            Tok::Sym(s) if s == "(" => {
                let e = self.expr(0)?;
                self.expect_sym(")")?;
                Some(e)
            }
            Tok::Sym(s) if s == "⟨" => {
                let mut items = Vec::new();
                if !self.peek_sym("⟩") {
                    loop {
                        items.push(self.expr(0)?);
                        if self.expect_sym(",").is_none() {
                            break;
                        }
                    }
                }
                self.expect_sym("⟩")?;
                Some(Expr::Anon(items))
            }
            Tok::Sym(s) if s == "↑" => {
                let inner = self.atom()?;
                Some(Expr::App(Box::new(Expr::Var("↑".into())), vec![inner]))
            }
            _ => None,
        }
    }

    fn binders(&mut self) -> Option<Vec<(String, Option<Expr>)>> {
        let mut out = Vec::new();
        loop {
            match self.peek()? {
                Tok::Ident(_) => {
                    if let Some(Tok::Ident(n)) = self.bump() {
                        out.push((n, None));
                    }
                }
                Tok::Sym(s) if s == "(" => {
                    self.bump();
                    let mut names = Vec::new();
                    while let Some(Tok::Ident(n)) = self.peek().cloned() {
                        self.bump();
                        names.push(n);
                    }
                    self.expect_sym(":")?;
                    let ty = self.expr(0)?;
                    self.expect_sym(")")?;
                    out.extend(names.into_iter().map(|n| (n, Some(ty.clone()))));
                }
                Tok::Sym(s) if s == ":" => {
                    self.bump();
                    let ty = self.expr(0)?;
                    for b in out.iter_mut().filter(|b| b.1.is_none()) {
                        b.1 = Some(ty.clone());
                    }
                }
                Tok::Sym(s) if s == "," => {
                    self.bump();
                    return (!out.is_empty()).then_some(out);
                }
                _ => return None,
            }
        }
    }

    fn prefix(&mut self) -> Option<Expr> {
        match self.peek()?.clone() {
            Tok::Sym(s) if s == "¬" => {
                self.bump();
                Some(Expr::Not(Box::new(self.expr(40)?)))
            }
            Tok::Sym(s) if s == "-" => {
                self.bump();
                let inner = self.expr(75)?;
                Some(match inner {
                    Expr::Num(n) => Expr::Num(-n),
                    e => Expr::Neg(Box::new(e)),
                })
            }
            Tok::Sym(s) if s == "∀" || s == "∃" => {
                self.bump();
                let bs = self.binders()?;
                let body = Box::new(self.expr(0)?);
                Some(if s == "∀" {
                    Expr::Forall(bs, body)
                } else {
                    Expr::Exists(bs, body)
                })
            }
            Tok::Ident(s) if s == "by" => {
                self.bump();
                let rest: Vec<String> = self.toks[self.pos..].iter().map(tok_text).collect();
                self.pos = self.toks.len();
                Some(Expr::ByTactic(rest.join(" ")))
            }
            _ => {
                let head = self.atom()?;
                let mut args = Vec::new();
                while self.starts_atom() {
                    args.push(self.atom()?);
                }
                Some(if args.is_empty() {
                    head
                } else {
                    Expr::App(Box::new(head), args)
                })
            }
        }
    }

    fn expr(&mut self, min_prec: u32) -> Option<Expr> {
        let mut lhs = self.prefix()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(s)) => match BinOp::from_sym(s) {
                    Some(op) => op,
                    None => break,
                },
                _ => break,
            };
            let p = op.prec();
            if p < min_prec {
                break;
            }
            self.bump();
            let next_min = if op.right_assoc() { p } else { p + 1 };
            let rhs = self.expr(next_min)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
            if op.relation()
                && matches!(self.peek(), Some(Tok::Sym(s)) if BinOp::from_sym(s).map(|o| o.relation()).unwrap_or(false))
            {
                return None;
            }
        }
        Some(lhs)
    }
}

fn tok_text(t: &Tok) -> String {
    match t {
        Tok::Num(n) => n.to_string(),
        Tok::Ident(s) | Tok::Sym(s) => s.clone(),
    }
}

/// Parses `text`; anything the grammar does not cover becomes an opaque
/// atom compared by its whitespace-normalised text.
pub fn parse(text: &str) -> Expr {
    let trimmed = text.trim();
    if let Some(toks) = tokenize(trimmed) {
        let mut p = Parser { toks, pos: 0 };
        if let Some(e) = p.expr(0) {
            if p.pos == p.toks.len() {
                return e;
            }
        }
    }
    Expr::Opaque(crate::proof_model::lex::collapse_ws(trimmed))
}

impl Expr {
    pub fn var(s: &str) -> Expr {
        Expr::Var(s.to_string())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    fn prec(&self) -> u32 {
        match self {
            Expr::Bin(op, ..) => op.prec(),
            Expr::Not(_) => 40,
            Expr::Neg(_) => 75,
            Expr::Forall(..) | Expr::Exists(..) | Expr::ByTactic(_) => 0,
            Expr::App(..) => 1000,
            Expr::Opaque(s) if s.contains(' ') => 0,
            _ => 1024,
        }
    }

    fn fmt_prec(&self, ctx: u32) -> String {
        let body = match self {
            Expr::Num(n) => n.to_string(),
            Expr::Var(s) => s.clone(),
            Expr::Opaque(s) => s.clone(),
            Expr::ByTactic(t) => format!("by {t}"),
            Expr::App(f, args) => {
                if matches!(f.as_ref(), Expr::Var(s) if s == "↑") && args.len() == 1 {
                    format!("↑{}", args[0].fmt_prec(1024))
                } else {
                    let mut s = f.fmt_prec(1000);
                    for a in args {
                        s.push(' ');
                        s.push_str(&a.fmt_prec(1024));
                    }
                    s
                }
            }
            Expr::Bin(op, l, r) => {
                let p = op.prec();
                let (lp, rp) = if op.right_assoc() {
                    (p + 1, p)
                } else {
                    (p, p + 1)
                };
                let (lp, rp) = if op.relation() {
                    (p + 1, p + 1)
                } else {
                    (lp, rp)
                };
                format!("{} {} {}", l.fmt_prec(lp), op.symbol(), r.fmt_prec(rp))
            }
            Expr::Not(e) => format!("¬{}", e.fmt_prec(40)),
            Expr::Neg(e) => format!("-{}", e.fmt_prec(75)),
            Expr::Forall(bs, body) | Expr::Exists(bs, body) => {
                let q = if matches!(self, Expr::Forall(..)) {
                    "∀"
                } else {
                    "∃"
                };
                let mut s = String::from(q);
                let mut i = 0;
                while i < bs.len() {
                    let ty = &bs[i].1;
                    let mut names = vec![bs[i].0.clone()];
                    let mut j = i + 1;
                    while j < bs.len() && &bs[j].1 == ty {
                        names.push(bs[j].0.clone());
                        j += 1;
                    }
                    match ty {
                        Some(t) => {
                            s.push_str(&format!(" ({} : {})", names.join(" "), t.fmt_prec(0)))
                        }
                        None => s.push_str(&format!(" {}", names.join(" "))),
                    }
                    i = j;
                }
                format!("{s}, {}", body.fmt_prec(0))
            }
            Expr::Anon(items) => {
                let parts: Vec<String> = items.iter().map(|e| e.fmt_prec(0)).collect();
                format!("⟨{}⟩", parts.join(", "))
            }
        };
        if self.prec() < ctx {
            format!("({body})")
        } else {
            body
        }
    }

    /// Integer value of a closed arithmetic term.
    pub fn eval_int(&self) -> Option<i128> {
        match self {
            Expr::Num(n) => Some(*n),
            Expr::Neg(e) => e.eval_int().map(|v| -v),
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval_int()?, r.eval_int()?);
                match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                    BinOp::Div => (b != 0).then(|| a.div_euclid(b)),
                    BinOp::Mod => (b != 0).then(|| a.rem_euclid(b)),
                    BinOp::Pow => u32::try_from(b).ok().and_then(|e| a.checked_pow(e)),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Truth value of a closed proposition.
    pub fn eval_prop(&self) -> Option<bool> {
        match self {
            Expr::Var(s) if s == "True" => Some(true),
            Expr::Var(s) if s == "False" => Some(false),
            Expr::Not(e) => e.eval_prop().map(|v| !v),
            Expr::Bin(op, l, r) => match op {
                BinOp::And => Some(l.eval_prop()? && r.eval_prop()?),
                BinOp::Or => Some(l.eval_prop()? || r.eval_prop()?),
                BinOp::Imp => Some(!l.eval_prop()? || r.eval_prop()?),
                BinOp::Iff => Some(l.eval_prop()? == r.eval_prop()?),
                _ => {
                    let (a, b) = (l.eval_int()?, r.eval_int()?);
                    Some(match op {
                        BinOp::Eq => a == b,
                        BinOp::Ne => a != b,
                        BinOp::Lt => a < b,
                        BinOp::Gt => a > b,
                        BinOp::Le => a <= b,
                        BinOp::Ge => a >= b,
                        BinOp::Dvd => {
                            if a == 0 {
                                b == 0
                            } else {
                                b % a == 0
                            }
                        }
                        _ => return None,
                    })
                }
            },
            _ => None,
        }
    }

    /// Replaces every subterm equal to `from` with `to`; reports whether any
    /// replacement happened.
    pub fn replace(&self, from: &Expr, to: &Expr) -> (Expr, bool) {
        if self == from {
            return (to.clone(), true);
        }
        let mut hit = false;
        let mut go = |e: &Expr| {
            let (n, h) = e.replace(from, to);
            hit |= h;
            n
        };
        let out = match self {
            Expr::App(f, args) => Expr::App(Box::new(go(f)), args.iter().map(&mut go).collect()),
            Expr::Bin(op, l, r) => Expr::Bin(*op, Box::new(go(l)), Box::new(go(r))),
            Expr::Not(e) => Expr::Not(Box::new(go(e))),
            Expr::Neg(e) => Expr::Neg(Box::new(go(e))),
            Expr::Forall(bs, body) => Expr::Forall(bs.clone(), Box::new(go(body))),
            Expr::Exists(bs, body) => Expr::Exists(bs.clone(), Box::new(go(body))),
            Expr::Anon(items) => Expr::Anon(items.iter().map(&mut go).collect()),
            e => e.clone(),
        };
        (out, hit)
    }

    /// Evaluates closed arithmetic subterms in place (`3 * 2` becomes `6`).
    pub fn fold_constants(&self) -> Expr {
        if let Some(v) = self.eval_int() {
            return Expr::Num(v);
        }
        match self {
            Expr::App(f, args) => {
                Expr::App(f.clone(), args.iter().map(Expr::fold_constants).collect())
            }
            Expr::Bin(op, l, r) => Expr::Bin(
                *op,
                Box::new(l.fold_constants()),
                Box::new(r.fold_constants()),
            ),
            Expr::Not(e) => Expr::Not(Box::new(e.fold_constants())),
            Expr::Neg(e) => Expr::Neg(Box::new(e.fold_constants())),
            e => e.clone(),
        }
    }

    /// Free variable names (binders of quantifiers excluded).
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(s) => {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
            Expr::App(f, args) => {
                f.vars(out);
                args.iter().for_each(|a| a.vars(out));
            }
            Expr::Bin(_, l, r) => {
                l.vars(out);
                r.vars(out);
            }
            Expr::Not(e) | Expr::Neg(e) => e.vars(out),
            Expr::Forall(bs, body) | Expr::Exists(bs, body) => {
                let mut inner = Vec::new();
                body.vars(&mut inner);
                for v in inner {
                    if !bs.iter().any(|b| b.0 == v) && !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
            Expr::Anon(items) => items.iter().for_each(|a| a.vars(out)),
            _ => {}
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_prec(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_printing() {
        let e = parse("a + b * c ^ 2 = (a + b) * c");
        assert_eq!(e.to_string(), "a + b * c ^ 2 = (a + b) * c");
        let e = parse("0 < x ∧ 0 < y → y ^ 2 ∣ x");
        assert_eq!(e.to_string(), "0 < x ∧ 0 < y → y ^ 2 ∣ x");
        assert!(matches!(e, Expr::Bin(BinOp::Imp, ..)));
        assert_eq!(parse("((x))").to_string(), "x");
        assert_eq!(
            parse("(x ^ y) ^ 2 = y ^ x").to_string(),
            "(x ^ y) ^ 2 = y ^ x"
        );
    }

    #[test]
    fn quantifiers_and_application() {
        let e = parse("∀ (n m : ℕ), n + m = m + n");
        assert_eq!(e.to_string(), "∀ (n m : ℕ), n + m = m + n");
        let e = parse("Nat.Prime p ∧ f (x + 1) = 2");
        assert_eq!(e.to_string(), "Nat.Prime p ∧ f (x + 1) = 2");
    }

    #[test]
    fn evaluation() {
        assert_eq!(parse("2 + 2 = 4").eval_prop(), Some(true));
        assert_eq!(parse("3 ∣ 12 ∧ ¬ 5 < 2").eval_prop(), Some(true));
        assert_eq!(parse("x + 1 = 2").eval_prop(), None);
        assert_eq!(parse("2 ^ 10").eval_int(), Some(1024));
    }

    #[test]
    fn replace_is_structural() {
        let e = parse("2 * x + x = 9");
        let (r, hit) = e.replace(&parse("x"), &parse("y + 1"));
        assert!(hit);
        assert_eq!(r.to_string(), "2 * (y + 1) + (y + 1) = 9");
    }

    #[test]
    fn unparseable_is_opaque() {
        assert!(matches!(parse("{x | x > 0}"), Expr::Opaque(_)));
        assert_eq!(parse("a   <  b"), parse("a < b"));
    }
}
