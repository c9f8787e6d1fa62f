//! Structural model of Lean 4 theorem scripts.
//!
//! Parsing is line- and indentation-based: a script is split into its
//! preamble, declaration header (binders and goal) and tactic body, and the
//! body is segmented into lines and top-level steps. No elaboration happens
//! here; the verification oracle is the semantic authority.

pub mod lex;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use lex::{collapse_ws, find_assign, find_type_colon, indent_of};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no `theorem` or `lemma` named `{0}`")]
    NotFound(String),
    #[error("`{0}` is declared more than once")]
    DuplicateDeclaration(String),
    #[error("`{0}` is not proved in tactic mode")]
    TermModeProof(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("`{0}` has an empty tactic body")]
    EmptyBody(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinderKind {
    Explicit,
    Implicit,
    StrictImplicit,
    Instance,
}

impl BinderKind {
    fn delimiters(self) -> (&'static str, &'static str) {
        match self {
            BinderKind::Explicit => ("(", ")"),
            BinderKind::Implicit => ("{", "}"),
            BinderKind::StrictImplicit => ("⦃", "⦄"),
            BinderKind::Instance => ("[", "]"),
        }
    }
}

/// One bracketed binder group such as `(x y : ℕ)`. An anonymous instance
/// binder like `[Fintype α]` has no names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binder {
    pub names: Vec<String>,
    pub type_text: String,
    pub kind: BinderKind,
}

impl Binder {
    pub fn explicit(name: impl Into<String>, type_text: impl Into<String>) -> Self {
        Binder {
            names: vec![name.into()],
            type_text: type_text.into(),
            kind: BinderKind::Explicit,
        }
    }

    pub fn render(&self) -> String {
        let (open, close) = self.kind.delimiters();
        if self.names.is_empty() {
            format!("{open}{}{close}", self.type_text)
        } else {
            format!("{open}{} : {}{close}", self.names.join(" "), self.type_text)
        }
    }
}

impl fmt::Display for Binder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    HaveIntro,
    Plain,
    BlockOpen,
    BlockClose,
    CommentOrBlank,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Introduced {
    pub hyp_name: String,
    pub hyp_type_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticLine {
    pub index: usize,
    pub text: String,
    pub indent: usize,
    pub kind: LineKind,
    pub introduced: Option<Introduced>,
}

impl TacticLine {
    pub fn is_code(&self) -> bool {
        self.kind != LineKind::CommentOrBlank
    }
}

/// A parsed theorem with a tactic-mode proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremScript {
    pub name: String,
    /// `theorem` or `lemma`.
    pub keyword: String,
    pub binders: Vec<Binder>,
    pub goal_text: String,
    pub body: Vec<TacticLine>,
    pub source_path: Option<PathBuf>,
    /// Everything before the declaration, verbatim.
    pub preamble: String,
    /// Declaration text from the keyword line through `by`, verbatim.
    pub header_text: String,
    /// The first tactic shares the header line (`:= by trivial`).
    pub inline_first: bool,
    /// Everything after the body, verbatim.
    pub trailer: String,
}

/// A declaration located in a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclInfo {
    pub keyword: String,
    pub name: String,
    /// 0-based line of the declaration keyword.
    pub line: usize,
    /// Byte offset of the start of that line.
    pub line_start: usize,
    pub indent: usize,
}

const MODIFIERS: &[&str] = &[
    "private",
    "protected",
    "noncomputable",
    "nonrec",
    "unsafe",
    "partial",
];

/// Lists `theorem`, `lemma` and `example` declarations in source order,
/// skipping block comments.
pub fn list_declarations(source: &str) -> Vec<DeclInfo> {
    let mut out = Vec::new();
    let mut offset = 0;
    let mut in_block = 0i32;
    for (lineno, line) in source.split_inclusive('\n').enumerate() {
        let line_start = offset;
        offset += line.len();
        let was_in_block = in_block > 0;
        in_block += block_comment_delta(line);
        if was_in_block {
            continue;
        }
        let indent = indent_of(line);
        let mut rest = line.trim_start();
        if rest.starts_with("@[") {
            if let Some(end) = rest.find(']') {
                rest = rest[end + 1..].trim_start();
            }
        }
        loop {
            let word = rest.split_whitespace().next().unwrap_or("");
            if MODIFIERS.contains(&word) {
                rest = rest[word.len()..].trim_start();
            } else {
                break;
            }
        }
        let keyword = ["theorem", "lemma", "example"]
            .into_iter()
            .find(|kw| rest.starts_with(kw) && rest[kw.len()..].starts_with(char::is_whitespace));
        let keyword = match keyword {
            Some(k) => k,
            None => {
                if rest.trim_end() == "example" || rest.starts_with("example:") {
                    "example"
                } else {
                    continue;
                }
            }
        };
        let after = rest[keyword.len()..].trim_start();
        let name = if keyword == "example" {
            String::new()
        } else {
            after
                .chars()
                .take_while(|c| lex::is_ident_char(*c) || *c == '.')
                .collect()
        };
        out.push(DeclInfo {
            keyword: keyword.to_string(),
            name,
            line: lineno,
            line_start,
            indent,
        });
    }
    out
}

fn block_comment_delta(line: &str) -> i32 {
    // Counts `/-` openings and `-/` closings outside line comments.
    let code = match line.find("--") {
        Some(i) if !line[..i].contains("/-") => &line[..i],
        _ => line,
    };
    code.matches("/-").count() as i32 - code.matches("-/").count() as i32
}

/// Parses the tactic-mode declaration named `theorem_name` out of `source`.
pub fn parse_theorem(source: &str, theorem_name: &str) -> Result<TheoremScript, ParseError> {
    let decls: Vec<DeclInfo> = list_declarations(source)
        .into_iter()
        .filter(|d| d.keyword != "example" && d.name == theorem_name)
        .collect();
    let decl = match decls.as_slice() {
        [] => return Err(ParseError::NotFound(theorem_name.to_string())),
        [d] => d.clone(),
        _ => return Err(ParseError::DuplicateDeclaration(theorem_name.to_string())),
    };
    parse_decl_at(source, &decl)
}

/// Parses the last `theorem`/`lemma` in `source`; earlier declarations are
/// treated as preamble helpers.
pub fn parse_last_theorem(source: &str) -> Result<TheoremScript, ParseError> {
    let decl = list_declarations(source)
        .into_iter()
        .rfind(|d| d.keyword != "example")
        .ok_or_else(|| ParseError::NotFound("<any>".to_string()))?;
    parse_decl_at(source, &decl)
}

/// Signature of a declaration: binders, goal and where its proof starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub binders: Vec<Binder>,
    pub goal_text: String,
    /// Byte offset (in the whole source) just past `:=`.
    pub proof_start: usize,
    /// Byte offset just past the `by` keyword, for tactic proofs.
    pub by_end: Option<usize>,
}

/// Splits the signature of `decl` into binders and goal.
pub fn signature(source: &str, decl: &DeclInfo) -> Result<Signature, ParseError> {
    let name = decl.name.clone();
    let decl_text = &source[decl.line_start..];
    let kw_pos = decl_text
        .find(&format!("{} {}", decl.keyword, name))
        .or_else(|| decl_text.find(&decl.keyword))
        .ok_or_else(|| ParseError::MalformedHeader(name.clone()))?;
    let after_name = kw_pos + decl.keyword.len() + if name.is_empty() { 0 } else { 1 + name.len() };
    let sig = &decl_text[after_name..];

    let assign = find_assign(sig).ok_or_else(|| {
        ParseError::MalformedHeader(format!("`{name}` has no `:=` after its signature"))
    })?;
    let colon = find_type_colon(&sig[..assign])
        .ok_or_else(|| ParseError::MalformedHeader(format!("`{name}` has no type ascription")))?;
    let binders = parse_binders(&sig[..colon])?;
    let goal_text = collapse_ws(&sig[colon + 1..assign]);
    if goal_text.is_empty() {
        return Err(ParseError::MalformedHeader(format!(
            "`{name}` has an empty goal"
        )));
    }
    let proof_start = decl.line_start + after_name + assign + 2;
    let after_assign = &source[proof_start..];
    let by_rel = after_assign.len() - after_assign.trim_start().len();
    let rest = &after_assign[by_rel..];
    let is_by = rest.starts_with("by")
        && rest[2..]
            .chars()
            .next()
            .map(|c| c.is_whitespace())
            .unwrap_or(true);
    Ok(Signature {
        name,
        binders,
        goal_text,
        proof_start,
        by_end: is_by.then_some(proof_start + by_rel + 2),
    })
}

/// Parses the tactic-mode declaration located at `decl`.
pub fn parse_declaration(source: &str, decl: &DeclInfo) -> Result<TheoremScript, ParseError> {
    parse_decl_at(source, decl)
}

fn parse_decl_at(source: &str, decl: &DeclInfo) -> Result<TheoremScript, ParseError> {
    let Signature {
        name,
        binders,
        goal_text,
        by_end,
        ..
    } = signature(source, decl)?;
    let by_end = by_end.ok_or_else(|| ParseError::TermModeProof(name.clone()))?;
    let header_text = source[decl.line_start..by_end].to_string();

    // Remainder of the `by` line, then the following lines.
    let line_end = source[by_end..]
        .find('\n')
        .map(|i| by_end + i)
        .unwrap_or(source.len());
    let inline = source[by_end..line_end].trim();
    let inline_first = !inline.is_empty() && !inline.starts_with("--");
    let after_line = (line_end + 1).min(source.len());
    let inline_comment = if !inline_first && !inline.is_empty() {
        Some(source[by_end..line_end].to_string())
    } else {
        None
    };

    let mut raw_lines: Vec<(usize, String)> = Vec::new();
    let mut consumed = after_line;
    let mut in_block = 0i32;
    {
        for line in source[after_line..].split_inclusive('\n') {
            let content = line.strip_suffix('\n').unwrap_or(line);
            let content = content.strip_suffix('\r').unwrap_or(content);
            let blank = content.trim().is_empty();
            let comment = in_block > 0
                || content.trim_start().starts_with("--")
                || content.trim_start().starts_with("/-");
            if !blank && !comment && indent_of(content) <= decl.indent {
                break;
            }
            in_block += block_comment_delta(content);
            raw_lines.push((consumed, content.to_string()));
            consumed += line.len();
        }
    }
    // Trailing blank and comment lines belong to the trailer.
    let texts_only: Vec<String> = raw_lines.iter().map(|(_, t)| t.clone()).collect();
    let kinds = classify_lines(&texts_only);
    let mut keep = raw_lines.len();
    while keep > 0 && kinds[keep - 1] == LineKind::CommentOrBlank {
        keep -= 1;
    }
    let trailer_start = raw_lines.get(keep).map(|(off, _)| *off).unwrap_or(consumed);
    let trailer = source.get(trailer_start..).unwrap_or("").to_string();
    raw_lines.truncate(keep);
    let raw_lines: Vec<String> = raw_lines.into_iter().map(|(_, t)| t).collect();

    let mut texts: Vec<String> = Vec::new();
    if inline_first {
        texts.push(source[by_end..line_end].trim().to_string());
    }
    texts.extend(raw_lines);
    let mut body = build_body(&texts);
    if inline_first {
        let base = body
            .iter()
            .skip(1)
            .filter(|l| l.is_code())
            .map(|l| l.indent)
            .min()
            .unwrap_or(2);
        body[0].indent = base;
    }
    if !body.iter().any(TacticLine::is_code) {
        return Err(ParseError::EmptyBody(name));
    }
    let mut header_text = header_text;
    if let Some(c) = inline_comment {
        header_text.push_str(&c);
    }

    Ok(TheoremScript {
        name,
        keyword: decl.keyword.clone(),
        binders,
        goal_text,
        body,
        source_path: None,
        preamble: source[..decl.line_start].to_string(),
        header_text,
        inline_first,
        trailer,
    })
}

/// Segments a binder list such as `(x y : ℕ) {n : ℕ} [Fintype α]`.
pub fn parse_binders(text: &str) -> Result<Vec<Binder>, ParseError> {
    let mut binders = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let (kind, close) = match c {
            '(' => (BinderKind::Explicit, ')'),
            '{' => (BinderKind::Implicit, '}'),
            '⦃' => (BinderKind::StrictImplicit, '⦄'),
            '[' => (BinderKind::Instance, ']'),
            _ => {
                return Err(ParseError::MalformedHeader(format!(
                    "unexpected `{}` in binder list",
                    &text[start..]
                )))
            }
        };
        let mut depth = 0i32;
        let mut end = None;
        let mut j = i;
        while j < chars.len() {
            let ch = chars[j].1;
            if matches!(ch, '(' | '[' | '{' | '⟨' | '⦃') {
                depth += 1;
            } else if matches!(ch, ')' | ']' | '}' | '⟩' | '⦄') {
                depth -= 1;
                if depth == 0 {
                    if ch != close {
                        return Err(ParseError::MalformedHeader(format!(
                            "mismatched bracket in `{}`",
                            &text[start..]
                        )));
                    }
                    end = Some(j);
                    break;
                }
            }
            j += 1;
        }
        let end = end.ok_or_else(|| {
            ParseError::MalformedHeader(format!("unclosed binder `{}`", &text[start..]))
        })?;
        let inner = &text[start + c.len_utf8()..chars[end].0];
        binders.push(parse_binder_group(inner, kind)?);
        i = end + 1;
    }
    let mut seen = std::collections::HashSet::new();
    for b in &binders {
        for n in &b.names {
            if n != "_" && !seen.insert(n.clone()) {
                return Err(ParseError::MalformedHeader(format!(
                    "duplicate binder name `{n}`"
                )));
            }
        }
    }
    Ok(binders)
}

fn parse_binder_group(inner: &str, kind: BinderKind) -> Result<Binder, ParseError> {
    match find_type_colon(inner) {
        Some(colon) => {
            let names: Vec<String> = inner[..colon]
                .split_whitespace()
                .map(str::to_string)
                .collect();
            let type_text = collapse_ws(&inner[colon + 1..]);
            if names.is_empty() || type_text.is_empty() {
                return Err(ParseError::MalformedHeader(format!(
                    "incomplete binder `{inner}`"
                )));
            }
            Ok(Binder {
                names,
                type_text,
                kind,
            })
        }
        None if kind == BinderKind::Instance => Ok(Binder {
            names: Vec::new(),
            type_text: collapse_ws(inner),
            kind,
        }),
        None => Err(ParseError::MalformedHeader(format!(
            "binder `{inner}` has no type"
        ))),
    }
}

fn classify_lines(texts: &[String]) -> Vec<LineKind> {
    let mut kinds = Vec::with_capacity(texts.len());
    let mut in_block = 0i32;
    for (i, t) in texts.iter().enumerate() {
        let trimmed = t.trim();
        let was_in_block = in_block > 0;
        in_block += block_comment_delta(t);
        let only_comment = trimmed.is_empty()
            || trimmed.starts_with("--")
            || was_in_block
            || (trimmed.starts_with("/-") && lex::strip_comments(trimmed).trim().is_empty());
        let kind = if only_comment {
            LineKind::CommentOrBlank
        } else if is_have_intro(trimmed) {
            LineKind::HaveIntro
        } else if trimmed.chars().all(|c| matches!(c, ')' | ']' | '}' | '⟩')) {
            LineKind::BlockClose
        } else {
            let code = lex::strip_comments(trimmed);
            let code = code.trim_end();
            let next_deeper = texts[i + 1..]
                .iter()
                .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with("--"))
                .map(|l| indent_of(l) > indent_of(t))
                .unwrap_or(false);
            if code.ends_with(" by")
                || code == "by"
                || code.ends_with("=>")
                || code.ends_with(":=")
                || next_deeper
            {
                LineKind::BlockOpen
            } else {
                LineKind::Plain
            }
        };
        kinds.push(kind);
    }
    kinds
}

fn is_have_intro(trimmed: &str) -> bool {
    let rest = match trimmed.strip_prefix("have") {
        Some(r) if r.starts_with(char::is_whitespace) || r.starts_with(':') => r,
        _ => return false,
    };
    let code = lex::strip_comments(rest);
    let head = match find_assign(&code) {
        Some(a) => &code[..a],
        None => &code[..],
    };
    find_type_colon(head).is_some()
}

/// Builds tactic lines with kinds and introduced hypotheses from raw text.
pub fn build_body(texts: &[String]) -> Vec<TacticLine> {
    let kinds = classify_lines(texts);
    let mut body: Vec<TacticLine> = texts
        .iter()
        .zip(kinds)
        .enumerate()
        .map(|(index, (text, kind))| TacticLine {
            index,
            text: text.clone(),
            indent: indent_of(text),
            kind,
            introduced: None,
        })
        .collect();
    for i in 0..body.len() {
        if body[i].kind == LineKind::HaveIntro {
            let end = block_end(&body, i);
            let block: Vec<&str> = body[i..end].iter().map(|l| l.text.as_str()).collect();
            body[i].introduced = introduced_from_block(&block.join("\n"));
        }
    }
    body
}

fn introduced_from_block(block: &str) -> Option<Introduced> {
    let code = lex::strip_comments(block);
    let rest = code.trim_start().strip_prefix("have")?;
    let head = match find_assign(rest) {
        Some(a) => &rest[..a],
        None => rest,
    };
    let colon = find_type_colon(head)?;
    let name_part = head[..colon].trim();
    let hyp_name = if name_part.is_empty() {
        "this".to_string()
    } else if name_part.chars().all(lex::is_ident_char) {
        name_part.to_string()
    } else {
        return None;
    };
    Some(Introduced {
        hyp_name,
        hyp_type_text: collapse_ws(&head[colon + 1..]),
    })
}

/// End (exclusive) of the block starting at line `start`: the maximal run of
/// strictly deeper-indented lines after it, ignoring trailing comments.
pub fn block_end(body: &[TacticLine], start: usize) -> usize {
    let base = body[start].indent;
    let mut end = start + 1;
    let mut j = start + 1;
    while j < body.len() {
        let l = &body[j];
        if l.is_code() {
            if l.indent > base {
                end = j + 1;
            } else {
                break;
            }
        }
        j += 1;
    }
    end
}

/// A top-level step: one top-level code line plus its deeper continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub start: usize,
    pub end: usize,
}

impl TheoremScript {
    /// Minimum indentation over code lines of the body.
    pub fn base_indent(&self) -> usize {
        self.body
            .iter()
            .filter(|l| l.is_code())
            .map(|l| l.indent)
            .min()
            .unwrap_or(2)
    }

    /// Top-level steps in order.
    pub fn steps(&self) -> Vec<Step> {
        steps_of(&self.body)
    }

    /// Top-level `have` lines (the intermediate hypotheses).
    pub fn top_level_haves(&self) -> Vec<usize> {
        let base = self.base_indent();
        self.body
            .iter()
            .filter(|l| l.kind == LineKind::HaveIntro && l.indent == base)
            .map(|l| l.index)
            .collect()
    }

    pub fn proof_length(&self) -> usize {
        proof_length(&self.body)
    }

    /// All binder names, in declaration order.
    pub fn binder_names(&self) -> Vec<String> {
        self.binders
            .iter()
            .flat_map(|b| b.names.iter().cloned())
            .collect()
    }

    pub fn statement(&self) -> String {
        render_statement(&self.keyword, &self.name, &self.binders, &self.goal_text)
    }
}

pub fn steps_of(body: &[TacticLine]) -> Vec<Step> {
    let base = body
        .iter()
        .filter(|l| l.is_code())
        .map(|l| l.indent)
        .min()
        .unwrap_or(0);
    let mut steps = Vec::new();
    let mut i = 0;
    while i < body.len() {
        let l = &body[i];
        if l.is_code() && l.indent <= base {
            let end = block_end(body, i);
            steps.push(Step { start: i, end });
            i = end;
        } else {
            i += 1;
        }
    }
    steps
}

/// Number of non-comment, non-blank lines. A line joining tactics with `;`
/// or `<;>` counts once.
pub fn proof_length(body: &[TacticLine]) -> usize {
    body.iter().filter(|l| l.is_code()).count()
}

/// `theorem name binders : goal` on one line.
pub fn render_statement(keyword: &str, name: &str, binders: &[Binder], goal: &str) -> String {
    let mut s = format!("{keyword} {name}");
    for b in binders {
        s.push(' ');
        s.push_str(&b.render());
    }
    s.push_str(" : ");
    s.push_str(&collapse_ws(goal));
    s
}

/// Re-indents lines so their minimum code indentation becomes `indent`.
pub fn reindent(lines: &[&str], indent: usize) -> Vec<String> {
    let min = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| indent_of(l))
        .min()
        .unwrap_or(0);
    lines
        .iter()
        .map(|l| {
            if l.trim().is_empty() {
                String::new()
            } else {
                let cut = indent_of(l).min(min);
                format!("{}{}", " ".repeat(indent), &l[cut..])
            }
        })
        .collect()
}

/// Re-indents body lines using their recorded indentation, so an inline
/// first tactic (stored without leading spaces) lines up with the rest.
pub fn reindent_lines(lines: &[TacticLine], indent: usize) -> Vec<String> {
    let min = lines
        .iter()
        .filter(|l| l.is_code())
        .map(|l| l.indent)
        .min()
        .unwrap_or(0);
    lines
        .iter()
        .map(|l| {
            let text = l.text.trim_start();
            if text.is_empty() {
                String::new()
            } else {
                let rel = if l.is_code() {
                    l.indent.saturating_sub(min)
                } else {
                    indent_of(&l.text).saturating_sub(min)
                };
                format!("{}{}", " ".repeat(indent + rel), text)
            }
        })
        .collect()
}

/// Full Lean source for a statement and tactic body.
pub fn render_source(preamble: &str, statement: &str, proof_lines: &[String]) -> String {
    let mut out = String::new();
    out.push_str(preamble);
    if !preamble.is_empty() && !preamble.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(statement);
    out.push_str(" := by\n");
    for l in proof_lines {
        out.push_str(l);
        out.push('\n');
    }
    out
}

/// Re-prints a script: preamble, verbatim header, body and trailer.
pub fn print_theorem(script: &TheoremScript) -> String {
    let mut out = String::new();
    out.push_str(&script.preamble);
    out.push_str(&script.header_text);
    let mut lines = script.body.iter();
    if script.inline_first {
        if let Some(first) = lines.next() {
            out.push(' ');
            out.push_str(&first.text);
        }
    }
    for l in lines {
        out.push('\n');
        out.push_str(&l.text);
    }
    out.push('\n');
    out.push_str(&script.trailer);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const P5: &str = "import Mathlib\n\ntheorem t (x y : ℕ) (h₀ : 0 < x ∧ 0 < y) (h₁ : (x ^ y) ^ 2 = y ^ x) (h₂ : y < x) : y ^ 2 ∣ x := by\n  have h₃ : y ^ 2 < x := by\n    nlinarith\n  sorry\n";

    #[test]
    fn parses_binder_groups_and_goal() {
        let s = parse_theorem(P5, "t").unwrap();
        assert_eq!(s.binders.len(), 4);
        assert_eq!(s.binders[0].names, vec!["x", "y"]);
        assert_eq!(s.binders[0].type_text, "ℕ");
        assert_eq!(s.binders[1].names, vec!["h₀"]);
        assert_eq!(s.binders[1].type_text, "0 < x ∧ 0 < y");
        assert_eq!(s.goal_text, "y ^ 2 ∣ x");
        assert_eq!(s.preamble, "import Mathlib\n\n");
        assert_eq!(s.body.len(), 3);
        assert_eq!(s.body[0].kind, LineKind::HaveIntro);
        assert_eq!(
            s.body[0].introduced,
            Some(Introduced {
                hyp_name: "h₃".into(),
                hyp_type_text: "y ^ 2 < x".into()
            })
        );
        assert_eq!(s.top_level_haves(), vec![0]);
    }

    #[test]
    fn minimal_inline_proof() {
        let src = "theorem t : True := by trivial";
        let s = parse_theorem(src, "t").unwrap();
        assert!(s.binders.is_empty());
        assert_eq!(s.body.len(), 1);
        assert_eq!(s.body[0].text, "trivial");
        assert!(s.top_level_haves().is_empty());
        assert_eq!(print_theorem(&s).trim_end(), src);
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse_theorem("theorem a : True := trivial", "a"),
            Err(ParseError::TermModeProof("a".into()))
        );
        assert_eq!(
            parse_theorem("theorem a : True := by trivial", "b"),
            Err(ParseError::NotFound("b".into()))
        );
        assert!(matches!(
            parse_theorem("theorem a (x) : True := by trivial", "a"),
            Err(ParseError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_theorem("theorem a (x : ℕ) (x : ℕ) : True := by trivial", "a"),
            Err(ParseError::MalformedHeader(_))
        ));
    }

    #[test]
    fn round_trip_preserves_text() {
        let src = "import Mathlib\nopen Nat\n\n/-- doc -/\ntheorem t (a : ℕ)\n    (h : a = 1) :\n    a + 1 = 2 := by\n  -- rewrite\n  rw [h]\n\n  -- trailing\n\ntheorem u : True := by trivial\n";
        let s = parse_theorem(src, "t").unwrap();
        let printed = print_theorem(&s);
        assert_eq!(printed, src);
        assert_eq!(s.goal_text, "a + 1 = 2");
        assert_eq!(s.proof_length(), 1);
        assert_eq!(s.body.len(), 2);
    }

    #[test]
    fn comments_and_blanks_do_not_count() {
        let texts: Vec<String> = [
            "  intro x",
            "  -- note",
            "",
            "  simp",
            "  /- block",
            "  still -/",
            "  ring",
            "  norm_num; linarith",
            "  exact h <;> simp",
            "  done",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let body = build_body(&texts);
        assert_eq!(proof_length(&body), 6);
    }

    #[test]
    fn steps_group_nested_lines() {
        let texts: Vec<String> = [
            "  have h : a := by",
            "    simp",
            "",
            "    ring",
            "  exact h",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let body = build_body(&texts);
        assert_eq!(
            steps_of(&body),
            vec![Step { start: 0, end: 4 }, Step { start: 4, end: 5 }]
        );
    }

    #[test]
    fn anonymous_have_is_this() {
        let texts = vec!["  have : 1 = 1 := rfl".to_string()];
        let body = build_body(&texts);
        assert_eq!(body[0].introduced.as_ref().unwrap().hyp_name, "this");
        let texts = vec!["  have h := foo".to_string()];
        assert_eq!(build_body(&texts)[0].kind, LineKind::Plain);
    }
}
