//! Concrete-syntax printing of models and predicates.
//!
//! Output re-parses to the same tree; parentheses are emitted only where
//! precedence or associativity demands them.

use std::fmt::Write;

use super::ast::*;

const OR: u8 = 1;
const AND: u8 = 2;
const NOT: u8 = 3;
const REL: u8 = 4;
const SUM: u8 = 5;
const PROD: u8 = 6;
const UNARY: u8 = 7;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Or(..) => OR,
        Expr::And(..) => AND,
        Expr::Not(_) => NOT,
        Expr::Rel(..) => REL,
        Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => SUM,
        Expr::Arith(..) => PROD,
        Expr::Int(v) if *v < 0 => UNARY,
        Expr::Neg(_) => UNARY,
        _ => UNARY + 1,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    if level(e) < min {
        out.push('(');
        write_expr(out, e, 0);
        out.push(')');
        return;
    }
    match e {
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Index(a, i) => {
            write_array(out, a);
            out.push('(');
            write_expr(out, i, 0);
            out.push(')');
        }
        Expr::Store(..) => write_array(out, e),
        Expr::Neg(inner) => {
            out.push('-');
            match **inner {
                Expr::Var(_) | Expr::Index(..) => write_expr(out, inner, 0),
                _ => {
                    out.push('(');
                    write_expr(out, inner, 0);
                    out.push(')');
                }
            }
        }
        Expr::Arith(op, a, b) => {
            let l = level(e);
            write_expr(out, a, l);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, l + 1);
        }
        Expr::Rel(op, a, b) => {
            write_expr(out, a, SUM);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, SUM);
        }
        Expr::And(a, b) => {
            write_expr(out, a, AND);
            out.push_str(" & ");
            write_expr(out, b, NOT);
        }
        Expr::Or(a, b) => {
            write_expr(out, a, OR);
            out.push_str(" or ");
            write_expr(out, b, AND);
        }
        Expr::Not(inner) => {
            out.push_str("not ");
            write_expr(out, inner, NOT);
        }
    }
}

/// Array-valued terms: a variable, or an override `(a <+ {i |-> v})`.
fn write_array(out: &mut String, e: &Expr) {
    match e {
        Expr::Store(a, i, v) => {
            out.push('(');
            write_array(out, a);
            out.push_str(" <+ {");
            write_expr(out, i, 0);
            out.push_str(" |-> ");
            write_expr(out, v, 0);
            out.push_str("})");
        }
        other => write_expr(out, other, UNARY + 1),
    }
}

pub fn model_to_string(m: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MACHINE {}", m.name);
    for (kw, decls) in [("INPUTS", &m.inputs), ("OUTPUTS", &m.outputs), ("VARS", &m.vars)] {
        if decls.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{kw}");
        for (i, d) in decls.iter().enumerate() {
            let sep = if i + 1 < decls.len() { "," } else { "" };
            let _ = writeln!(out, "  {}: {}{sep}", d.name, d.ty);
        }
    }
    let _ = writeln!(out, "INVARIANT\n  {}", expr_to_string(&m.invariant));
    out.push_str("INIT\n");
    write_stmts(&mut out, &m.init, 1);
    out.push_str("CYCLE\n");
    write_stmts(&mut out, &m.cycle, 1);
    out.push_str("END\n");
    out
}

fn write_stmts(out: &mut String, stmts: &[Stmt], depth: usize) {
    for (i, s) in stmts.iter().enumerate() {
        write_stmt(out, s, depth);
        if i + 1 < stmts.len() {
            out.push(';');
        }
        out.push('\n');
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    match &s.kind {
        StmtKind::Assign(t, e) => {
            out.push_str(&pad);
            match t {
                Target::Var(n) => out.push_str(n),
                Target::Elem(n, i) => {
                    let _ = write!(out, "{n}({})", expr_to_string(i));
                }
            }
            let _ = write!(out, " := {}", expr_to_string(e));
        }
        StmtKind::If(arms, els) => {
            for (i, (g, body)) in arms.iter().enumerate() {
                let kw = if i == 0 { format!("{pad}IF") } else { format!("{pad}ELSIF") };
                let _ = writeln!(out, "{kw} {} THEN", expr_to_string(g));
                write_stmts(out, body, depth + 1);
            }
            if let Some(body) = els {
                let _ = writeln!(out, "{pad}ELSE");
                write_stmts(out, body, depth + 1);
            }
            let _ = write!(out, "{pad}END");
        }
        StmtKind::For { var, from, to, body } => {
            let _ = writeln!(out, "{pad}FOR {var} := {} TO {} DO", expr_to_string(from), expr_to_string(to));
            write_stmts(out, body, depth + 1);
            let _ = write!(out, "{pad}END");
        }
    }
}
