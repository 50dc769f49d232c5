//! Recursive-descent parser for B0 source text.
//!
//! Expressions and predicates share one precedence ladder (loosest first):
//! `or`, `&`, `not`, relational operators, `+ -`, `* div mod`, unary `-`.
//! Typing later separates boolean from integer expressions.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok};
use super::ParseError;

pub fn parse(src: &str) -> Result<Model, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, at: 0 };
    let model = p.model()?;
    p.expect_eof()?;
    check_unique(&model)?;
    Ok(model)
}

/// Parses a standalone expression or predicate.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

fn check_unique(m: &Model) -> Result<(), ParseError> {
    let mut seen = HashSet::new();
    for d in m.all_decls() {
        if !seen.insert(d.name.as_str()) {
            return Err(ParseError::Duplicate { name: d.name.clone(), pos: d.pos });
        }
    }
    Ok(())
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            found: self.peek().describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Kw(k) if *k == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.is_kw(kw);
        if hit {
            self.bump();
        }
        hit
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        let hit = self.is_sym(sym);
        if hit {
            self.bump();
        }
        hit
    }

    fn kw(&mut self, kw: &str) -> Result<Pos, ParseError> {
        let pos = self.pos();
        if self.eat_kw(kw) {
            Ok(pos)
        } else {
            self.error(&[kw])
        }
    }

    fn sym(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.error(&[sym])
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat_sym("-");
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => self.error(&["integer"]),
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.error(&["end of input"])
        }
    }

    fn model(&mut self) -> Result<Model, ParseError> {
        self.kw("MACHINE")?;
        let name = self.ident()?;
        let inputs = if self.eat_kw("INPUTS") { self.varlist()? } else { vec![] };
        let outputs = if self.eat_kw("OUTPUTS") { self.varlist()? } else { vec![] };
        let vars = if self.eat_kw("VARS") { self.varlist()? } else { vec![] };
        if !self.is_kw("INVARIANT") {
            let mut expected = vec![];
            if inputs.is_empty() && outputs.is_empty() && vars.is_empty() {
                expected.push("INPUTS");
            }
            if outputs.is_empty() && vars.is_empty() {
                expected.push("OUTPUTS");
            }
            if vars.is_empty() {
                expected.push("VARS");
            }
            expected.push("INVARIANT");
            return self.error(&expected);
        }
        self.bump();
        let invariant = self.expr()?;
        let init_pos = self.kw("INIT")?;
        let init = self.stmts(&["CYCLE"])?;
        let cycle_pos = self.kw("CYCLE")?;
        let cycle = self.stmts(&["END"])?;
        self.kw("END")?;
        Ok(Model { name, inputs, outputs, vars, invariant, init, cycle, init_pos, cycle_pos })
    }

    fn varlist(&mut self) -> Result<Vec<Decl>, ParseError> {
        let mut out = vec![];
        loop {
            let pos = self.pos();
            let name = self.ident()?;
            self.sym(":")?;
            let ty = self.ty()?;
            out.push(Decl { name, ty, pos });
            if !self.eat_sym(",") {
                return Ok(out);
            }
        }
    }

    fn ty(&mut self) -> Result<B0Type, ParseError> {
        if self.eat_kw("BOOL") {
            return Ok(B0Type::Bool);
        }
        if self.eat_kw("INT") {
            self.sym("(")?;
            let lo = self.int()?;
            self.sym("..")?;
            let hi = self.int()?;
            self.sym(")")?;
            return Ok(B0Type::Int { lo, hi });
        }
        if self.eat_kw("ARRAY") {
            let pos = self.pos();
            let len = self.int()?;
            self.kw("OF")?;
            let elem = self.ty()?;
            let len = u32::try_from(len).map_err(|_| ParseError::Syntax {
                pos,
                found: format!("integer `{len}`"),
                expected: vec!["array length".into()],
            })?;
            return Ok(B0Type::Array { len, elem: Box::new(elem) });
        }
        self.error(&["BOOL", "INT", "ARRAY"])
    }

    /// A possibly empty `;`-separated statement list ended by one of `stop`.
    fn stmts(&mut self, stop: &[&str]) -> Result<Vec<Stmt>, ParseError> {
        let mut out = vec![];
        if stop.iter().any(|k| self.is_kw(k)) {
            return Ok(out);
        }
        loop {
            out.push(self.stmt()?);
            if self.eat_sym(";") {
                continue;
            }
            if stop.iter().any(|k| self.is_kw(k)) {
                return Ok(out);
            }
            let mut expected = vec![";"];
            expected.extend_from_slice(stop);
            return self.error(&expected);
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.pos();
        if self.eat_kw("IF") {
            let mut arms = vec![];
            let g = self.expr()?;
            self.kw("THEN")?;
            arms.push((g, self.stmts(&["ELSIF", "ELSE", "END"])?));
            let mut els = None;
            loop {
                if self.eat_kw("ELSIF") {
                    let g = self.expr()?;
                    self.kw("THEN")?;
                    arms.push((g, self.stmts(&["ELSIF", "ELSE", "END"])?));
                } else if self.eat_kw("ELSE") {
                    els = Some(self.stmts(&["END"])?);
                    self.kw("END")?;
                    break;
                } else {
                    self.kw("END")?;
                    break;
                }
            }
            return Ok(Stmt { kind: StmtKind::If(arms, els), pos });
        }
        if self.eat_kw("FOR") {
            let var = self.ident()?;
            self.sym(":=")?;
            let from = self.sum()?;
            self.kw("TO")?;
            let to = self.sum()?;
            self.kw("DO")?;
            let body = self.stmts(&["END"])?;
            self.kw("END")?;
            return Ok(Stmt { kind: StmtKind::For { var, from, to, body }, pos });
        }
        if !matches!(self.peek(), Tok::Ident(_)) {
            return self.error(&["identifier", "IF", "FOR"]);
        }
        let name = self.ident()?;
        let target = if self.eat_sym("(") {
            let idx = self.expr()?;
            self.sym(")")?;
            Target::Elem(name, idx)
        } else {
            Target::Var(name)
        };
        self.sym(":=")?;
        let value = self.expr()?;
        Ok(Stmt { kind: StmtKind::Assign(target, value), pos })
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.conj()?;
        while self.eat_kw("or") {
            lhs = Expr::or(lhs, self.conj()?);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.negation()?;
        while self.eat_sym("&") {
            lhs = Expr::And(Box::new(lhs), Box::new(self.negation()?));
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw("not") {
            return Ok(Expr::not(self.negation()?));
        }
        self.relation()
    }

    fn relation(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Tok::Sym("=") => RelOp::Eq,
            Tok::Sym("/=") => RelOp::Ne,
            Tok::Sym("<") => RelOp::Lt,
            Tok::Sym("<=") => RelOp::Le,
            Tok::Sym(">") => RelOp::Gt,
            Tok::Sym(">=") => RelOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        Ok(Expr::rel(op, lhs, self.sum()?))
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => ArithOp::Add,
                Tok::Sym("-") => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::arith(op, lhs, self.product()?);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => ArithOp::Mul,
                Tok::Kw("div") => ArithOp::Div,
                Tok::Kw("mod") => ArithOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::arith(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym("-") {
            if let Tok::Int(v) = *self.peek() {
                self.bump();
                return Ok(Expr::Int(-v));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat_sym("(") {
                    let idx = self.expr()?;
                    self.sym(")")?;
                    Ok(Expr::index(Expr::Var(name), idx))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.sym(")")?;
                Ok(e)
            }
            _ => self.error(&["expression"]),
        }
    }
}
