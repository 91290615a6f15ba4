//! Line-oriented spec files: one declaration per line, `#` comments, and
//! indented lines continuing the previous declaration.

use thiserror::Error;

use crate::syntax::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("{0}")]
    Invalid(String),
}

impl SpecError {
    pub fn syntax(line: usize, message: impl Into<String>) -> Self {
        SpecError::Syntax { line, message: message.into() }
    }
}

/// A declaration with the line it starts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecLine {
    pub line: usize,
    pub keyword: String,
    pub rest: String,
}

pub fn spec_lines(text: &str) -> Result<Vec<SpecLine>, SpecError> {
    let mut out: Vec<SpecLine> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split_once('#').map_or(raw, |(a, _)| a);
        if content.trim().is_empty() {
            continue;
        }
        if content.starts_with(char::is_whitespace) {
            match out.last_mut() {
                Some(prev) => {
                    prev.rest.push(' ');
                    prev.rest.push_str(content.trim());
                }
                None => return Err(SpecError::syntax(line, "continuation line without a declaration")),
            }
            continue;
        }
        let content = content.trim();
        let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        out.push(SpecLine { line, keyword: keyword.to_string(), rest: rest.trim().to_string() });
    }
    Ok(out)
}

/// Splits `lhs = rhs` at the first `=`.
pub fn split_eq(l: &SpecLine) -> Result<(&str, &str), SpecError> {
    l.rest
        .split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .ok_or_else(|| SpecError::syntax(l.line, format!("expected `=` in `{} {}`", l.keyword, l.rest)))
}

/// Splits the leading name token, which is either an identifier or an
/// identifier followed by a bracketed group such as `T[down,"\x. >x<",""]`.
/// Inside brackets, double-quoted text is taken verbatim.
pub fn take_name(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    let mut depth = 0usize;
    let mut in_str = false;
    let mut end = 0;
    for (i, ch) in s.char_indices() {
        if in_str {
            if ch == '"' {
                in_str = false;
            }
            end = i + 1;
            continue;
        }
        match ch {
            '"' if depth > 0 => in_str = true,
            '[' => depth += 1,
            ']' if depth > 0 => depth -= 1,
            c if depth == 0 && !(c.is_alphanumeric() || c == '_' || c == '@') => break,
            _ => {}
        }
        end = i + ch.len_utf8();
    }
    if end == 0 || depth > 0 || in_str {
        return None;
    }
    Some((&s[..end], &s[end..]))
}

/// Splits `s` into whitespace-separated name tokens.
pub fn names(s: &str) -> Option<Vec<&str>> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let (n, r) = take_name(rest)?;
        out.push(n);
        rest = r.trim_start();
    }
    Some(out)
}

/// Quotes a name for a spec file if it is not a plain identifier.
pub fn is_plain_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '@')
}
