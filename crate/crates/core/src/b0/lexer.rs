use super::ast::Pos;
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// Reserved word, stored verbatim (`MACHINE`, `div`, `not`, ...).
    Kw(&'static str),
    /// Punctuation, stored verbatim (`:=`, `..`, `/=`, ...).
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Kw(k) => format!("`{k}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "MACHINE", "INPUTS", "OUTPUTS", "VARS", "INVARIANT", "INIT", "CYCLE", "END", "BOOL", "INT", "ARRAY", "OF", "IF",
    "THEN", "ELSIF", "ELSE", "FOR", "TO", "DO", "div", "mod", "or", "not", "true", "false",
];

const SYMBOLS: &[&str] = &[":=", "..", "/=", "<=", ">=", "<", ">", "=", "+", "-", "*", "(", ")", ",", ";", ":", "&"];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn tokenize(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let pos = Pos::new(line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word),
            };
            out.push((tok, pos));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let v = text.parse::<i64>().ok().filter(|v| *v <= 1 << 31).ok_or_else(|| ParseError::Syntax {
                pos,
                found: format!("integer `{text}`"),
                expected: vec!["an integer that fits 32 bits".into()],
            })?;
            out.push((Tok::Int(v), pos));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len() as u32;
                out.push((Tok::Sym(s), pos));
            }
            None => {
                return Err(ParseError::Syntax { pos, found: format!("character `{c}`"), expected: vec![] });
            }
        }
    }
    out.push((Tok::Eof, Pos::new(line, col)));
    Ok(out)
}
