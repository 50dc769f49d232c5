//! Relay schematics as text, and their translation to B0.
//!
//! ```text
//! RELAYNET Crossing
//! INPUT train_in train_out
//! RELAY occupied
//! OUTPUT barrier_down
//! LATCH occupied SET NO(train_in) RESET NO(train_out)
//! barrier_down := NO(occupied) OR NO(train_in)
//! ```
//!
//! `NO(x)` is a normally-open contact (closed while `x` is energised),
//! `NC(x)` a normally-closed one. `AND` is series wiring and binds tighter
//! than `OR`, parallel wiring. Latches are reset-dominant. Lines may carry
//! `--` comments; an optional `INVARIANT` line passes B0 text through.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use thiserror::Error;

use crate::b0::{expr_to_string, is_keyword, Expr};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CExpr {
    No(String),
    Nc(String),
    And(Box<CExpr>, Box<CExpr>),
    Or(Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    fn names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            CExpr::No(n) | CExpr::Nc(n) => out.push(n),
            CExpr::And(a, b) | CExpr::Or(a, b) => {
                a.names(out);
                b.names(out);
            }
        }
    }

    fn to_b0(&self) -> Expr {
        match self {
            CExpr::No(n) => Expr::var(n),
            CExpr::Nc(n) => Expr::not(Expr::var(n)),
            CExpr::And(a, b) => Expr::And(Box::new(a.to_b0()), Box::new(b.to_b0())),
            CExpr::Or(a, b) => Expr::or(a.to_b0(), b.to_b0()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Drive {
    Rung(CExpr),
    Latch { set: CExpr, reset: CExpr },
}

/// A relay or output coil and what energises it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coil {
    pub name: String,
    pub drive: Drive,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayNet {
    pub name: String,
    pub inputs: Vec<String>,
    pub relays: Vec<String>,
    pub outputs: Vec<String>,
    /// Coils in evaluation order: each reads only inputs, itself (latches)
    /// and coils earlier in the list.
    pub coils: Vec<Coil>,
    pub invariant: Option<String>,
}

impl RelayNet {
    pub fn coil(&self, name: &str) -> Option<&Coil> {
        self.coils.iter().find(|c| c.name == name)
    }

    pub fn signal_count(&self) -> usize {
        self.inputs.len() + self.relays.len() + self.outputs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelayError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: `{name}` is not declared")]
    Undeclared { line: usize, name: String },
    #[error("line {line}: `{name}` declared twice")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: `{name}` is an input and cannot be driven")]
    DrivesInput { line: usize, name: String },
    #[error("line {line}: `{name}` is driven twice")]
    DrivenTwice { line: usize, name: String },
    #[error("coil `{0}` has no rung")]
    Undriven(String),
    #[error("combinational loop through {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("line {line}: `{name}` is reserved")]
    Reserved { line: usize, name: String },
    #[error("missing RELAYNET header")]
    NoHeader,
}

const DSL_WORDS: &[&str] = &["RELAYNET", "INPUT", "RELAY", "OUTPUT", "LATCH", "SET", "RESET", "AND", "OR", "NO", "NC", "INVARIANT"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Assign,
    Open,
    Close,
}

fn tokens(line: &str, n: usize) -> Result<Vec<Tok>, RelayError> {
    let mut out = vec![];
    let mut chars = line.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            c if c.is_whitespace() => {}
            '(' => out.push(Tok::Open),
            ')' => out.push(Tok::Close),
            ':' if chars.peek().map(|p| p.1) == Some('=') => {
                chars.next();
                out.push(Tok::Assign);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = i + 1;
                while let Some(&(j, d)) = chars.peek() {
                    if !(d.is_ascii_alphanumeric() || d == '_') {
                        break;
                    }
                    end = j + 1;
                    chars.next();
                }
                out.push(Tok::Word(line[i..end].to_string()));
            }
            c => return Err(RelayError::Syntax { line: n, msg: format!("unexpected `{c}`") }),
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Tok],
    at: usize,
    line: usize,
}

impl Cursor<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, RelayError> {
        Err(RelayError::Syntax { line: self.line, msg: msg.into() })
    }

    fn peek_word(&self) -> Option<&str> {
        match self.toks.get(self.at) {
            Some(Tok::Word(w)) => Some(w),
            _ => None,
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), RelayError> {
        if self.toks.get(self.at) == Some(&t) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String, RelayError> {
        match self.peek_word() {
            Some(w) if !DSL_WORDS.contains(&w) => {
                let w = w.to_string();
                self.at += 1;
                Ok(w)
            }
            _ => self.err("expected a name"),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), RelayError> {
        if self.peek_word() == Some(kw) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {kw}"))
        }
    }

    fn or(&mut self) -> Result<CExpr, RelayError> {
        let mut e = self.and()?;
        while self.peek_word() == Some("OR") {
            self.at += 1;
            e = CExpr::Or(Box::new(e), Box::new(self.and()?));
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<CExpr, RelayError> {
        let mut e = self.atom()?;
        while self.peek_word() == Some("AND") {
            self.at += 1;
            e = CExpr::And(Box::new(e), Box::new(self.atom()?));
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<CExpr, RelayError> {
        if self.toks.get(self.at) == Some(&Tok::Open) {
            self.at += 1;
            let e = self.or()?;
            self.expect(Tok::Close, "`)`")?;
            return Ok(e);
        }
        let normally_open = match self.peek_word() {
            Some("NO") => true,
            Some("NC") => false,
            _ => return self.err("expected NO(..), NC(..) or `(`"),
        };
        self.at += 1;
        self.expect(Tok::Open, "`(`")?;
        let n = self.ident()?;
        self.expect(Tok::Close, "`)`")?;
        Ok(if normally_open { CExpr::No(n) } else { CExpr::Nc(n) })
    }

    fn done(&self) -> Result<(), RelayError> {
        if self.at == self.toks.len() {
            Ok(())
        } else {
            self.err("unexpected trailing text")
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Input,
    Relay,
    Output,
}

pub fn parse_relay(text: &str) -> Result<RelayNet, RelayError> {
    let mut name = None;
    let mut declared: BTreeMap<String, Role> = BTreeMap::new();
    let (mut inputs, mut relays, mut outputs) = (vec![], vec![], vec![]);
    let mut coils: Vec<Coil> = vec![];
    let mut invariant = None;

    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split("--").next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.trim().strip_prefix("INVARIANT") {
            if rest.starts_with(char::is_whitespace) {
                invariant = Some(rest.trim().to_string());
                continue;
            }
        }
        let toks = tokens(line, n)?;
        let mut c = Cursor { toks: &toks, at: 0, line: n };
        let head = c.peek_word().map(str::to_string);
        match head.as_deref() {
            Some("RELAYNET") => {
                c.at += 1;
                if name.is_some() {
                    return c.err("second RELAYNET header");
                }
                name = Some(c.ident()?);
                c.done()?;
            }
            Some(kw @ ("INPUT" | "RELAY" | "OUTPUT")) => {
                c.at += 1;
                let (role, list) = match kw {
                    "INPUT" => (Role::Input, &mut inputs),
                    "RELAY" => (Role::Relay, &mut relays),
                    _ => (Role::Output, &mut outputs),
                };
                while c.at < toks.len() {
                    let id = c.ident()?;
                    if is_keyword(&id) {
                        return Err(RelayError::Reserved { line: n, name: id });
                    }
                    if declared.insert(id.clone(), role).is_some() {
                        return Err(RelayError::Duplicate { line: n, name: id });
                    }
                    list.push(id);
                }
            }
            Some("LATCH") => {
                c.at += 1;
                let target = c.ident()?;
                c.keyword("SET")?;
                let set = c.or()?;
                c.keyword("RESET")?;
                let reset = c.or()?;
                c.done()?;
                coils.push(Coil { name: target, drive: Drive::Latch { set, reset }, line: n });
            }
            _ => {
                let target = c.ident()?;
                c.expect(Tok::Assign, "`:=`")?;
                let e = c.or()?;
                c.done()?;
                coils.push(Coil { name: target, drive: Drive::Rung(e), line: n });
            }
        }
    }
    let name = name.ok_or(RelayError::NoHeader)?;

    let mut driven = BTreeSet::new();
    for coil in &coils {
        match declared.get(&coil.name) {
            None => return Err(RelayError::Undeclared { line: coil.line, name: coil.name.clone() }),
            Some(Role::Input) => return Err(RelayError::DrivesInput { line: coil.line, name: coil.name.clone() }),
            Some(_) => {}
        }
        if !driven.insert(coil.name.as_str()) {
            return Err(RelayError::DrivenTwice { line: coil.line, name: coil.name.clone() });
        }
        for r in reads(coil) {
            if !declared.contains_key(r) {
                return Err(RelayError::Undeclared { line: coil.line, name: r.to_string() });
            }
        }
    }
    if let Some(c) = relays.iter().chain(&outputs).find(|c| !driven.contains(c.as_str())) {
        return Err(RelayError::Undriven(c.clone()));
    }
    let coils = order(coils)?;
    Ok(RelayNet { name, inputs, relays, outputs, coils, invariant })
}

fn reads(c: &Coil) -> Vec<&str> {
    let mut out = vec![];
    match &c.drive {
        Drive::Rung(e) => e.names(&mut out),
        Drive::Latch { set, reset } => {
            set.names(&mut out);
            reset.names(&mut out);
        }
    }
    out
}

/// Depth-first topological sort over coil-to-coil reads. A latch reading
/// itself sees its held state and is not a loop.
fn order(coils: Vec<Coil>) -> Result<Vec<Coil>, RelayError> {
    let index: BTreeMap<&str, usize> = coils.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
    let deps: Vec<Vec<usize>> = coils
        .iter()
        .map(|c| {
            let latch = matches!(c.drive, Drive::Latch { .. });
            reads(c).into_iter().filter(|r| !(latch && *r == c.name)).filter_map(|r| index.get(r).copied()).collect()
        })
        .collect();
    // 0 unvisited, 1 on the stack, 2 done
    let mut mark = vec![0u8; coils.len()];
    let mut out = vec![];
    fn visit(
        i: usize,
        deps: &[Vec<usize>],
        mark: &mut [u8],
        stack: &mut Vec<usize>,
        out: &mut Vec<usize>,
    ) -> Result<(), Vec<usize>> {
        match mark[i] {
            2 => return Ok(()),
            1 => {
                let from = stack.iter().position(|&s| s == i).unwrap();
                let mut path = stack[from..].to_vec();
                path.push(i);
                return Err(path);
            }
            _ => {}
        }
        mark[i] = 1;
        stack.push(i);
        for &d in &deps[i] {
            visit(d, deps, mark, stack, out)?;
        }
        stack.pop();
        mark[i] = 2;
        out.push(i);
        Ok(())
    }
    for i in 0..coils.len() {
        visit(i, &deps, &mut mark, &mut vec![], &mut out)
            .map_err(|p| RelayError::Cycle(p.into_iter().map(|k| coils[k].name.clone()).collect()))?;
    }
    let mut slots: Vec<Option<Coil>> = coils.into_iter().map(Some).collect();
    Ok(out.into_iter().map(|i| slots[i].take().unwrap()).collect())
}

fn decl(names: &[String]) -> String {
    names.iter().map(|n| format!("{n}: BOOL")).collect::<Vec<_>>().join(", ")
}

/// B0 source for a net. Relays become VARS, coils outputs, contacts
/// inputs, all BOOL; every coil starts de-energised.
pub fn translate(net: &RelayNet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "-- Generated from relay net {}.", net.name);
    let _ = writeln!(s, "MACHINE {}", net.name);
    for (kw, list) in [("INPUTS", &net.inputs), ("OUTPUTS", &net.outputs), ("VARS", &net.relays)] {
        if !list.is_empty() {
            let _ = writeln!(s, "{kw} {}", decl(list));
        }
    }
    let _ = writeln!(s, "INVARIANT {}", net.invariant.as_deref().unwrap_or("true"));
    let coils: Vec<&String> = net.relays.iter().chain(&net.outputs).collect();
    let _ = writeln!(s, "INIT");
    if coils.is_empty() {
        let _ = writeln!(s, "CYCLE");
    } else {
        let init: Vec<String> = coils.iter().map(|c| format!("  {c} := false")).collect();
        let _ = writeln!(s, "{}", init.join(";\n"));
        let _ = writeln!(s, "CYCLE");
        let body: Vec<String> = net
            .coils
            .iter()
            .map(|c| {
                let e = match &c.drive {
                    Drive::Rung(e) => e.to_b0(),
                    Drive::Latch { set, reset } => Expr::And(
                        Box::new(Expr::or(Expr::var(&c.name), set.to_b0())),
                        Box::new(Expr::not(reset.to_b0())),
                    ),
                };
                format!("  {} := {}", c.name, expr_to_string(&e))
            })
            .collect();
        let _ = writeln!(s, "{}", body.join(";\n"));
    }
    let _ = writeln!(s, "END");
    s
}

#[cfg(test)]
mod tests;
