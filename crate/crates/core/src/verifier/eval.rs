//! Concrete evaluation of obligation predicates.
//!
//! `&` and `or` short-circuit here, unlike program expressions: a guard
//! built by the generator protects the term it guards, and whatever the
//! program itself would trap on is covered by its own WD obligation.

use std::collections::HashMap;

use crate::b0::ast::{ArithOp, Expr};
use crate::b0::Value;

pub type Valuation = HashMap<String, Value>;

#[derive(Debug, Clone, PartialEq)]
enum V {
    B(bool),
    I(i64),
    A(Vec<i64>),
}

/// `Some(truth)`, or `None` when evaluation is undefined (unbound name,
/// out-of-range index, zero divisor, overflow).
pub fn eval_pred(e: &Expr, env: &Valuation) -> Option<bool> {
    match eval(e, env)? {
        V::B(b) => Some(b),
        _ => None,
    }
}

fn int(e: &Expr, env: &Valuation) -> Option<i64> {
    match eval(e, env)? {
        V::I(v) => Some(v),
        _ => None,
    }
}

fn boolean(e: &Expr, env: &Valuation) -> Option<bool> {
    eval_pred(e, env)
}

fn eval(e: &Expr, env: &Valuation) -> Option<V> {
    Some(match e {
        Expr::Bool(b) => V::B(*b),
        Expr::Int(v) => V::I(*v),
        Expr::Var(n) => match env.get(n)? {
            Value::Bool(b) => V::B(*b),
            Value::Int(v) => V::I(*v),
            Value::Array(cells) => V::A(cells.iter().map(Value::as_i64).collect()),
        },
        Expr::Index(a, i) => {
            let V::A(cells) = eval(a, env)? else { return None };
            let k = usize::try_from(int(i, env)?).ok()?;
            let raw = *cells.get(k)?;
            if array_is_bool(a, env) {
                V::B(raw != 0)
            } else {
                V::I(raw)
            }
        }
        Expr::Store(a, i, v) => {
            let V::A(mut cells) = eval(a, env)? else { return None };
            let k = usize::try_from(int(i, env)?).ok()?;
            let raw = match eval(v, env)? {
                V::B(b) => b as i64,
                V::I(x) => x,
                V::A(_) => return None,
            };
            *cells.get_mut(k)? = raw;
            V::A(cells)
        }
        Expr::Neg(x) => V::I(int(x, env)?.checked_neg()?),
        Expr::Arith(op, x, y) => {
            let (a, b) = (int(x, env)?, int(y, env)?);
            if b == 0 && matches!(op, ArithOp::Div | ArithOp::Mod) {
                return None;
            }
            V::I(op.apply(a, b)?)
        }
        Expr::Rel(op, x, y) => match (eval(x, env)?, eval(y, env)?) {
            (V::I(a), V::I(b)) => V::B(op.holds(a, b)),
            (V::B(a), V::B(b)) => V::B(op.holds(a as i64, b as i64)),
            _ => return None,
        },
        Expr::And(x, y) => V::B(boolean(x, env)? && boolean(y, env)?),
        Expr::Or(x, y) => V::B(boolean(x, env)? || boolean(y, env)?),
        Expr::Not(x) => V::B(!boolean(x, env)?),
    })
}

/// Arrays are stored as raw cells; the element kind comes from the base
/// variable's value.
fn array_is_bool(a: &Expr, env: &Valuation) -> bool {
    match a {
        Expr::Var(n) => matches!(env.get(n), Some(Value::Array(cells)) if matches!(cells.first(), Some(Value::Bool(_)))),
        Expr::Store(base, ..) => array_is_bool(base, env),
        _ => false,
    }
}
