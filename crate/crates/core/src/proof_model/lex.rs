//! Bracket-aware scanning helpers for Lean source fragments.
//!
//! Nothing here understands Lean grammar. The helpers only track bracket
//! depth, string literals and comments so callers can find delimiters such
//! as the `:` of a type ascription or the `:=` of a definition body.

/// A character that sits outside every bracket, string literal and comment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopChar {
    pub offset: usize,
    pub ch: char,
}

fn opens(c: char) -> bool {
    matches!(c, '(' | '[' | '{' | '⟨' | '⦃' | '⟦')
}

fn closes(c: char) -> bool {
    matches!(c, ')' | ']' | '}' | '⟩' | '⦄' | '⟧')
}

/// Characters of `text` at bracket depth zero, skipping comments and strings.
pub fn top_level_chars(text: &str) -> Vec<TopChar> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut depth: i32 = 0;
    let mut i = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        let next = chars.get(i + 1).map(|&(_, c)| c);
        match c {
            '-' if next == Some('-') => {
                while i < chars.len() && chars[i].1 != '\n' {
                    i += 1;
                }
                continue;
            }
            '/' if next == Some('-') => {
                let mut nest = 1;
                i += 2;
                while i < chars.len() && nest > 0 {
                    let c = chars[i].1;
                    let n = chars.get(i + 1).map(|&(_, c)| c);
                    if c == '/' && n == Some('-') {
                        nest += 1;
                        i += 2;
                    } else if c == '-' && n == Some('/') {
                        nest -= 1;
                        i += 2;
                    } else {
                        i += 1;
                    }
                }
                continue;
            }
            '"' => {
                i += 1;
                while i < chars.len() && chars[i].1 != '"' {
                    if chars[i].1 == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i += 1;
                continue;
            }
            c if opens(c) => depth += 1,
            c if closes(c) => depth = (depth - 1).max(0),
            _ if depth == 0 => out.push(TopChar { offset: off, ch: c }),
            _ => {}
        }
        i += 1;
    }
    out
}

/// Byte offset of the first depth-0 `:` that is not the start of `:=`.
pub fn find_type_colon(text: &str) -> Option<usize> {
    let top = top_level_chars(text);
    top.iter().enumerate().find_map(|(i, tc)| {
        let is_assign = top
            .get(i + 1)
            .map(|n| n.ch == '=' && n.offset == tc.offset + 1)
            .unwrap_or(false);
        (tc.ch == ':' && !is_assign).then_some(tc.offset)
    })
}

/// Byte offset of the first depth-0 `:=`.
pub fn find_assign(text: &str) -> Option<usize> {
    let top = top_level_chars(text);
    top.windows(2)
        .find(|w| w[0].ch == ':' && w[1].ch == '=' && w[1].offset == w[0].offset + 1)
        .map(|w| w[0].offset)
}

/// Splits `text` on a depth-0 separator string such as `,` or `;`.
pub fn split_top_level<'a>(text: &'a str, sep: &str) -> Vec<&'a str> {
    let top = top_level_chars(text);
    let first = sep.chars().next().expect("non-empty separator");
    let mut parts = Vec::new();
    let mut start = 0;
    for tc in &top {
        if tc.ch == first && tc.offset >= start && text[tc.offset..].starts_with(sep) {
            parts.push(&text[start..tc.offset]);
            start = tc.offset + sep.len();
        }
    }
    parts.push(&text[start..]);
    parts
}

/// Collapses every whitespace run to one space and trims the ends.
pub fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Removes `--` line comments and `/- -/` block comments.
pub fn strip_comments(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let n = chars.get(i + 1).copied();
        if c == '-' && n == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && n == Some('-') {
            let mut nest = 1;
            i += 2;
            while i < chars.len() && nest > 0 {
                let n = chars.get(i + 1).copied();
                if chars[i] == '/' && n == Some('-') {
                    nest += 1;
                    i += 2;
                } else if chars[i] == '-' && n == Some('/') {
                    nest -= 1;
                    i += 2;
                } else {
                    i += 1;
                }
            }
        } else if c == '"' {
            out.push(c);
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                out.push(chars[i]);
                i += 1;
            }
            if i < chars.len() {
                out.push('"');
                i += 1;
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

/// True for characters that may appear inside a Lean identifier segment.
pub fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '!' || c == '?'
}

/// True for characters that may start a Lean identifier segment.
pub fn is_ident_start(c: char) -> bool {
    (c.is_alphabetic() || c == '_') && !matches!(c, 'λ' | 'Π' | 'Σ')
}

/// An identifier occurrence; `qualified` is set when it follows a `.`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentToken<'a> {
    pub start: usize,
    pub end: usize,
    pub text: &'a str,
    pub qualified: bool,
}

/// Identifier segments of `text`, in order. `Nat.succ` yields `Nat` and a
/// qualified `succ`.
pub fn ident_tokens(text: &str) -> Vec<IdentToken<'_>> {
    let mut out = Vec::new();
    let mut iter = text.char_indices().peekable();
    let mut prev: Option<char> = None;
    while let Some((start, c)) = iter.next() {
        let after_ident = prev.map(is_ident_char).unwrap_or(false);
        if is_ident_start(c) && !after_ident {
            let mut end = start + c.len_utf8();
            while let Some(&(off, nc)) = iter.peek() {
                if is_ident_char(nc) {
                    end = off + nc.len_utf8();
                    iter.next();
                } else {
                    break;
                }
            }
            let qualified = text[..start].ends_with('.')
                && text[..start - 1]
                    .chars()
                    .next_back()
                    .map(is_ident_char)
                    .unwrap_or(false);
            out.push(IdentToken {
                start,
                end,
                text: &text[start..end],
                qualified,
            });
            prev = text[..end].chars().next_back();
            continue;
        }
        prev = Some(c);
    }
    out
}

/// Full dotted name starting at an unqualified identifier token, e.g.
/// `Nat.succ_le` for the token `Nat`.
pub fn dotted_names(text: &str) -> Vec<String> {
    let toks = ident_tokens(text);
    let mut out: Vec<String> = Vec::new();
    for t in toks {
        if t.qualified {
            if let Some(last) = out.last_mut() {
                last.push('.');
                last.push_str(t.text);
                continue;
            }
        }
        out.push(t.text.to_string());
    }
    out
}

/// Replaces unqualified identifier tokens according to `rename`.
pub fn rename_idents(text: &str, rename: &dyn Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for t in ident_tokens(text) {
        if t.qualified {
            continue;
        }
        if let Some(new) = rename(t.text) {
            out.push_str(&text[last..t.start]);
            out.push_str(&new);
            last = t.end;
        }
    }
    out.push_str(&text[last..]);
    out
}

/// Number of leading space characters (tabs count as one).
pub fn indent_of(line: &str) -> usize {
    line.chars().take_while(|c| *c == ' ' || *c == '\t').count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colon_skips_brackets() {
        let s = "(x y : ℕ) (h : x = y) : y = x := by";
        let c = find_type_colon(s).unwrap();
        assert_eq!(&s[c..c + 1], ":");
        assert_eq!(s[..c].trim(), "(x y : ℕ) (h : x = y)");
        let a = find_assign(s).unwrap();
        assert_eq!(s[c + 1..a].trim(), "y = x");
    }

    #[test]
    fn assign_not_confused_with_colon() {
        assert_eq!(find_type_colon("h := foo"), None);
        assert_eq!(find_assign("h : a = b := rfl"), Some(10));
    }

    #[test]
    fn comments_are_ignored() {
        assert_eq!(find_type_colon("-- a : b\nfoo"), None);
        assert_eq!(find_type_colon("/- a : b -/ c : d"), Some(14));
    }

    #[test]
    fn ident_tokens_handle_subscripts_and_dots() {
        let names: Vec<_> = ident_tokens("h₀.le (Nat.succ x') 2")
            .into_iter()
            .map(|t| (t.text, t.qualified))
            .collect();
        assert_eq!(
            names,
            vec![
                ("h₀", false),
                ("le", true),
                ("Nat", false),
                ("succ", true),
                ("x'", false)
            ]
        );
        assert_eq!(
            dotted_names("exact Nat.le_of_lt h"),
            vec!["exact", "Nat.le_of_lt", "h"]
        );
    }

    #[test]
    fn rename_keeps_qualified_segments() {
        let r = rename_idents("h.h + Foo.h", &|s| (s == "h").then(|| "b0".to_string()));
        assert_eq!(r, "b0.h + Foo.h");
    }

    #[test]
    fn split_respects_depth() {
        assert_eq!(
            split_top_level("a; (b; c); d", ";"),
            vec!["a", " (b; c)", " d"]
        );
    }
}
