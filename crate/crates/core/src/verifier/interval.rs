//! Interval abstract interpretation of obligation predicates.
//!
//! Integers are tracked as closed `i128` intervals and booleans as the set
//! of values they may take. Any subterm that may be undefined (possible
//! zero divisor, out-of-range index, leaving `i64`) makes the enclosing
//! evaluation inconclusive, so a definite answer holds for every valuation
//! in the domains.

use std::collections::HashMap;

use crate::b0::ast::{ArithOp, B0Type, Expr, RelOp};

use super::ProofObligation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
enum Abs {
    I(i128, i128),
    /// (may be true, may be false)
    B(bool, bool),
    A(Vec<Abs>),
}

impl Abs {
    fn of_type(ty: &B0Type) -> Abs {
        match ty {
            B0Type::Bool => Abs::B(true, true),
            B0Type::Int { lo, hi } => Abs::I(*lo as i128, *hi as i128),
            B0Type::Array { len, elem } => Abs::A(vec![Abs::of_type(elem); *len as usize]),
        }
    }

    fn join(&self, other: &Abs) -> Option<Abs> {
        match (self, other) {
            (Abs::I(a, b), Abs::I(c, d)) => Some(Abs::I(*a.min(c), *b.max(d))),
            (Abs::B(a, b), Abs::B(c, d)) => Some(Abs::B(*a || *c, *b || *d)),
            _ => None,
        }
    }
}

type Env = HashMap<String, Abs>;

const MIN: i128 = i64::MIN as i128;
const MAX: i128 = i64::MAX as i128;

fn checked(lo: i128, hi: i128) -> Option<Abs> {
    (lo >= MIN && hi <= MAX).then_some(Abs::I(lo, hi))
}

/// What interval reasoning alone concludes about the goal under the
/// obligation's domains and simple hypotheses.
pub fn interval_truth(po: &ProofObligation) -> Truth {
    let mut env: Env = po.domains.iter().map(|(n, t)| (n.clone(), Abs::of_type(t))).collect();
    for h in &po.hypotheses {
        if !refine(&mut env, h) {
            // Hypotheses are contradictory: the goal holds vacuously.
            return Truth::True;
        }
    }
    match eval(&po.goal, &env) {
        Some(Abs::B(true, false)) => Truth::True,
        Some(Abs::B(false, true)) => Truth::False,
        _ => Truth::Unknown,
    }
}

/// Narrows `env` with conjuncts of the form `name op literal`. Returns
/// false if some variable's interval becomes empty.
fn refine(env: &mut Env, h: &Expr) -> bool {
    match h {
        Expr::And(a, b) => refine(env, a) && refine(env, b),
        Expr::Rel(op, x, y) => match (&**x, &**y) {
            (t, Expr::Int(c)) => narrow(env, t, *op, *c),
            (Expr::Int(c), t) => narrow(env, t, flip(*op), *c),
            _ => true,
        },
        Expr::Var(n) => set_bool(env, n, true),
        Expr::Not(inner) => match &**inner {
            Expr::Var(n) => set_bool(env, n, false),
            _ => true,
        },
        _ => true,
    }
}

fn flip(op: RelOp) -> RelOp {
    match op {
        RelOp::Lt => RelOp::Gt,
        RelOp::Le => RelOp::Ge,
        RelOp::Gt => RelOp::Lt,
        RelOp::Ge => RelOp::Le,
        o => o,
    }
}

fn set_bool(env: &mut Env, name: &str, value: bool) -> bool {
    match env.get_mut(name) {
        Some(slot @ Abs::B(..)) => {
            let Abs::B(t, f) = *slot else { unreachable!() };
            *slot = Abs::B(t && value, f && !value);
            t && value || f && !value
        }
        _ => true,
    }
}

fn narrow(env: &mut Env, term: &Expr, op: RelOp, c: i64) -> bool {
    let slot = match term {
        Expr::Var(n) => env.get_mut(n),
        Expr::Index(a, i) => match (&**a, &**i) {
            (Expr::Var(n), Expr::Int(k)) => match env.get_mut(n) {
                Some(Abs::A(cells)) => usize::try_from(*k).ok().and_then(|k| cells.get_mut(k)),
                _ => None,
            },
            _ => None,
        },
        _ => None,
    };
    let Some(Abs::I(lo, hi)) = slot else { return true };
    let c = c as i128;
    match op {
        RelOp::Eq => {
            *lo = (*lo).max(c);
            *hi = (*hi).min(c);
        }
        RelOp::Lt => *hi = (*hi).min(c - 1),
        RelOp::Le => *hi = (*hi).min(c),
        RelOp::Gt => *lo = (*lo).max(c + 1),
        RelOp::Ge => *lo = (*lo).max(c),
        RelOp::Ne => {
            if *lo == c {
                *lo += 1;
            } else if *hi == c {
                *hi -= 1;
            }
        }
    }
    lo <= hi
}

fn int(e: &Expr, env: &Env) -> Option<(i128, i128)> {
    match eval(e, env)? {
        Abs::I(a, b) => Some((a, b)),
        _ => None,
    }
}

fn boolean(e: &Expr, env: &Env) -> Option<(bool, bool)> {
    match eval(e, env)? {
        Abs::B(t, f) => Some((t, f)),
        _ => None,
    }
}

fn eval(e: &Expr, env: &Env) -> Option<Abs> {
    match e {
        Expr::Bool(b) => Some(Abs::B(*b, !*b)),
        Expr::Int(v) => Some(Abs::I(*v as i128, *v as i128)),
        Expr::Var(n) => env.get(n).cloned(),
        Expr::Index(a, i) => {
            let Abs::A(cells) = eval(a, env)? else { return None };
            let (lo, hi) = int(i, env)?;
            if lo < 0 || hi >= cells.len() as i128 {
                return None;
            }
            let mut acc = cells[lo as usize].clone();
            for c in &cells[lo as usize + 1..=hi as usize] {
                acc = acc.join(c)?;
            }
            Some(acc)
        }
        Expr::Store(a, i, v) => {
            let Abs::A(mut cells) = eval(a, env)? else { return None };
            let (lo, hi) = int(i, env)?;
            let v = eval(v, env)?;
            if lo < 0 || hi >= cells.len() as i128 {
                return None;
            }
            if lo == hi {
                cells[lo as usize] = v;
            } else {
                for c in &mut cells[lo as usize..=hi as usize] {
                    *c = c.join(&v)?;
                }
            }
            Some(Abs::A(cells))
        }
        Expr::Neg(x) => {
            let (lo, hi) = int(x, env)?;
            checked(-hi, -lo)
        }
        Expr::Arith(op, x, y) => arith(*op, int(x, env)?, int(y, env)?),
        Expr::Rel(op, x, y) => match (eval(x, env)?, eval(y, env)?) {
            (Abs::I(a, b), Abs::I(c, d)) => Some(rel(*op, (a, b), (c, d))),
            (Abs::B(t1, f1), Abs::B(t2, f2)) => Some(rel(*op, bool_range(t1, f1), bool_range(t2, f2))),
            _ => None,
        },
        Expr::And(x, y) => {
            let (t1, f1) = boolean(x, env)?;
            if !t1 {
                return Some(Abs::B(false, true));
            }
            let (t2, f2) = boolean(y, env)?;
            Some(Abs::B(t1 && t2, f1 || f2))
        }
        Expr::Or(x, y) => {
            let (t1, f1) = boolean(x, env)?;
            if !f1 {
                return Some(Abs::B(true, false));
            }
            let (t2, f2) = boolean(y, env)?;
            Some(Abs::B(t1 || t2, f1 && f2))
        }
        Expr::Not(x) => {
            let (t, f) = boolean(x, env)?;
            Some(Abs::B(f, t))
        }
    }
}

/// Booleans compare as 0/1.
fn bool_range(t: bool, f: bool) -> (i128, i128) {
    (if f { 0 } else { 1 }, if t { 1 } else { 0 })
}

fn rel(op: RelOp, (a, b): (i128, i128), (c, d): (i128, i128)) -> Abs {
    // (definitely true, definitely false)
    let (yes, no) = match op {
        RelOp::Lt => (b < c, a >= d),
        RelOp::Le => (b <= c, a > d),
        RelOp::Gt => (a > d, b <= c),
        RelOp::Ge => (a >= d, b < c),
        RelOp::Eq => (a == b && c == d && a == c, b < c || d < a),
        RelOp::Ne => (b < c || d < a, a == b && c == d && a == c),
    };
    Abs::B(!no, !yes)
}

fn arith(op: ArithOp, (a, b): (i128, i128), (c, d): (i128, i128)) -> Option<Abs> {
    let corners = |f: &dyn Fn(i128, i128) -> i128| {
        let vs = [f(a, c), f(a, d), f(b, c), f(b, d)];
        checked(*vs.iter().min().unwrap(), *vs.iter().max().unwrap())
    };
    match op {
        ArithOp::Add => checked(a + c, b + d),
        ArithOp::Sub => checked(a - d, b - c),
        ArithOp::Mul => corners(&|x, y| x * y),
        ArithOp::Div => {
            if c <= 0 && 0 <= d {
                return None;
            }
            // Euclidean quotient is monotone in each argument on a
            // sign-constant divisor range, so corners bound it.
            corners(&|x, y| x.div_euclid(y))
        }
        ArithOp::Mod => {
            if c <= 0 && 0 <= d {
                return None;
            }
            let m = c.abs().max(d.abs());
            if c == d && a.div_euclid(m) == b.div_euclid(m) {
                Some(Abs::I(a.rem_euclid(m), b.rem_euclid(m)))
            } else {
                Some(Abs::I(0, m - 1))
            }
        }
    }
}
