//! Big-step reference interpreter. Both compiled images are checked
//! against it.

use serde::Serialize;

use super::ast::{B0Type, Pos};
use super::typed::*;
use super::RuntimeError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Array(Vec<Value>),
}

impl Value {
    /// The all-zero value of a type (`false`, `0`, arrays thereof).
    pub fn zero(ty: &B0Type) -> Value {
        match ty {
            B0Type::Bool => Value::Bool(false),
            B0Type::Int { .. } => Value::Int(0),
            B0Type::Array { len, elem } => Value::Array(vec![Value::zero(elem); *len as usize]),
        }
    }

    pub fn as_i64(&self) -> i64 {
        match self {
            Value::Bool(b) => *b as i64,
            Value::Int(v) => *v,
            Value::Array(_) => panic!("array used as scalar"),
        }
    }

    pub fn as_bool(&self) -> bool {
        self.as_i64() != 0
    }

    pub fn in_domain(&self, ty: &B0Type) -> bool {
        match (self, ty) {
            (Value::Bool(_), B0Type::Bool) => true,
            (Value::Int(v), B0Type::Int { lo, hi }) => lo <= v && v <= hi,
            (Value::Array(vs), B0Type::Array { len, elem }) => {
                vs.len() == *len as usize && vs.iter().all(|v| v.in_domain(elem))
            }
            _ => false,
        }
    }

    /// Every value of a type, in increasing order. Intended for small domains.
    pub fn enumerate(ty: &B0Type) -> Vec<Value> {
        match ty {
            B0Type::Bool => vec![Value::Bool(false), Value::Bool(true)],
            B0Type::Int { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            B0Type::Array { len, elem } => {
                let cells = Value::enumerate(elem);
                let mut out = vec![vec![]];
                for _ in 0..*len {
                    out = out
                        .into_iter()
                        .flat_map(|prefix: Vec<Value>| {
                            cells.iter().map(move |c| {
                                let mut p = prefix.clone();
                                p.push(c.clone());
                                p
                            })
                        })
                        .collect();
                }
                out.into_iter().map(Value::Array).collect()
            }
        }
    }

    pub(crate) fn cell_from_raw(raw: i64, ty: &B0Type) -> Option<Value> {
        match ty {
            B0Type::Bool => match raw {
                0 => Some(Value::Bool(false)),
                1 => Some(Value::Bool(true)),
                _ => None,
            },
            B0Type::Int { lo, hi } => (*lo..=*hi).contains(&raw).then_some(Value::Int(raw)),
            B0Type::Array { .. } => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Array(vs) => {
                f.write_str("[")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// Valuation of all vars and outputs, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MachineState {
    pub values: Vec<Value>,
}

impl MachineState {
    pub fn zeroed(tm: &TypedModel) -> Self {
        MachineState { values: tm.state.iter().map(|s| Value::zero(&s.ty)).collect() }
    }

    pub fn get(&self, tm: &TypedModel, name: &str) -> Option<&Value> {
        tm.state_index(name).map(|i| &self.values[i])
    }

    pub fn in_domain(&self, tm: &TypedModel) -> bool {
        self.values.len() == tm.state.len() && self.values.iter().zip(&tm.state).all(|(v, s)| v.in_domain(&s.ty))
    }

    /// Output values, in output declaration order.
    pub fn outputs(&self, tm: &TypedModel) -> Vec<Value> {
        tm.outputs().map(|(i, _)| self.values[i].clone()).collect()
    }

    /// Every state scalar, arrays flattened, in canonical order.
    pub fn cells(&self) -> Vec<i64> {
        let mut out = vec![];
        for v in &self.values {
            match v {
                Value::Array(vs) => out.extend(vs.iter().map(Value::as_i64)),
                v => out.push(v.as_i64()),
            }
        }
        out
    }

    /// Rebuilds a state from flattened raw cells. Fails with the index of
    /// the first cell outside its declared domain.
    pub fn from_cells(tm: &TypedModel, cells: &[i64]) -> Result<Self, usize> {
        let mut values = Vec::with_capacity(tm.state.len());
        let mut at = 0;
        for s in &tm.state {
            let cell_ty = s.ty.cell_type();
            let decode = |at: &mut usize| -> Result<Value, usize> {
                let raw = *cells.get(*at).ok_or(*at)?;
                let v = Value::cell_from_raw(raw, cell_ty).ok_or(*at)?;
                *at += 1;
                Ok(v)
            };
            match &s.ty {
                B0Type::Array { len, .. } => {
                    let mut vs = Vec::with_capacity(*len as usize);
                    for _ in 0..*len {
                        vs.push(decode(&mut at)?);
                    }
                    values.push(Value::Array(vs));
                }
                _ => values.push(decode(&mut at)?),
            }
        }
        Ok(MachineState { values })
    }
}

/// Runs INIT from the all-zero state.
pub fn interpret_init(tm: &TypedModel) -> Result<MachineState, RuntimeError> {
    let mut m = Machine { tm, state: MachineState::zeroed(tm), inputs: &[], loops: vec![0; tm.loop_slots] };
    m.stmts(&tm.init)?;
    Ok(m.state)
}

/// One read-compute-write cycle. Returns the post-state and the output
/// valuation (output declaration order).
pub fn interpret_cycle(
    tm: &TypedModel,
    s: &MachineState,
    inputs: &[Value],
) -> Result<(MachineState, Vec<Value>), RuntimeError> {
    if inputs.len() != tm.inputs.len() {
        return Err(RuntimeError::BadInput { reason: format!("expected {} inputs, got {}", tm.inputs.len(), inputs.len()) });
    }
    for (v, decl) in inputs.iter().zip(&tm.inputs) {
        if !v.in_domain(&decl.ty) {
            return Err(RuntimeError::BadInput { reason: format!("input `{}` = {v} outside {}", decl.name, decl.ty) });
        }
    }
    let mut m = Machine { tm, state: s.clone(), inputs, loops: vec![0; tm.loop_slots] };
    m.stmts(&tm.cycle)?;
    let outputs = m.state.outputs(tm);
    Ok((m.state, outputs))
}

/// Evaluates the invariant on a state.
pub fn eval_invariant(tm: &TypedModel, s: &MachineState) -> Result<bool, RuntimeError> {
    let m = Machine { tm, state: s.clone(), inputs: &[], loops: vec![] };
    Ok(m.eval(&tm.invariant, tm.model.init_pos)? != 0)
}

struct Machine<'a> {
    tm: &'a TypedModel,
    state: MachineState,
    inputs: &'a [Value],
    loops: Vec<i64>,
}

impl Machine<'_> {
    fn stmts(&mut self, stmts: &[TStmt]) -> Result<(), RuntimeError> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &TStmt) -> Result<(), RuntimeError> {
        match &s.kind {
            TStmtKind::Assign { target, value, .. } => {
                let v = self.eval(value, s.pos)?;
                match target {
                    TTarget::State(i) => {
                        let ty = &self.tm.state[*i].ty;
                        self.state.values[*i] = self.store_value(v, ty, &self.tm.state[*i].name, s.pos)?;
                    }
                    TTarget::Elem(i, idx) => {
                        let k = self.eval(idx, s.pos)?;
                        let var = &self.tm.state[*i];
                        let B0Type::Array { len, elem } = &var.ty else { unreachable!() };
                        let k = check_index(k, *len, &var.name, s.pos)?;
                        let cell = self.store_value(v, elem, &var.name, s.pos)?;
                        let Value::Array(cells) = &mut self.state.values[*i] else { unreachable!() };
                        cells[k] = cell;
                    }
                }
            }
            TStmtKind::If { arms, els } => {
                for (guard, body) in arms {
                    if self.eval(guard, s.pos)? != 0 {
                        return self.stmts(body);
                    }
                }
                self.stmts(els)?;
            }
            TStmtKind::For { slot, from, to, body } => {
                for k in *from..=*to {
                    self.loops[*slot] = k;
                    self.stmts(body)?;
                }
            }
        }
        Ok(())
    }

    fn store_value(&self, v: i64, ty: &B0Type, name: &str, pos: Pos) -> Result<Value, RuntimeError> {
        match ty {
            B0Type::Bool => Ok(Value::Bool(v != 0)),
            B0Type::Int { lo, hi } => {
                if v < *lo || v > *hi {
                    Err(RuntimeError::Range { name: name.to_string(), value: v, lo: *lo, hi: *hi, pos })
                } else {
                    Ok(Value::Int(v))
                }
            }
            B0Type::Array { .. } => unreachable!("whole-array assignment is rejected by the type checker"),
        }
    }

    /// Scalars evaluate to i64; booleans as 0/1. Evaluation is strict.
    fn eval(&self, e: &TExpr, pos: Pos) -> Result<i64, RuntimeError> {
        Ok(match &e.kind {
            TExprKind::Bool(b) => *b as i64,
            TExprKind::Int(v) => *v,
            TExprKind::Input(i) => self.inputs[*i].as_i64(),
            TExprKind::State(i) => self.state.values[*i].as_i64(),
            TExprKind::Loop(d) => self.loops[*d],
            TExprKind::InputElem(i, idx) => {
                let k = self.eval(idx, pos)?;
                elem(&self.inputs[*i], k, &self.tm.inputs[*i].name, pos)?
            }
            TExprKind::StateElem(i, idx) => {
                let k = self.eval(idx, pos)?;
                elem(&self.state.values[*i], k, &self.tm.state[*i].name, pos)?
            }
            TExprKind::Neg(x) => self.eval(x, pos)?.checked_neg().ok_or(RuntimeError::Overflow { pos })?,
            TExprKind::Arith(op, x, y) => {
                let (a, b) = (self.eval(x, pos)?, self.eval(y, pos)?);
                if b == 0 && matches!(op, super::ast::ArithOp::Div | super::ast::ArithOp::Mod) {
                    return Err(RuntimeError::DivByZero { pos });
                }
                op.apply(a, b).ok_or(RuntimeError::Overflow { pos })?
            }
            TExprKind::Rel(op, x, y) => {
                let (a, b) = (self.eval(x, pos)?, self.eval(y, pos)?);
                op.holds(a, b) as i64
            }
            TExprKind::And(x, y) => {
                let (a, b) = (self.eval(x, pos)?, self.eval(y, pos)?);
                (a != 0 && b != 0) as i64
            }
            TExprKind::Or(x, y) => {
                let (a, b) = (self.eval(x, pos)?, self.eval(y, pos)?);
                (a != 0 || b != 0) as i64
            }
            TExprKind::Not(x) => (self.eval(x, pos)? == 0) as i64,
        })
    }
}

fn check_index(k: i64, len: u32, name: &str, pos: Pos) -> Result<usize, RuntimeError> {
    if k < 0 || k >= len as i64 {
        Err(RuntimeError::Index { name: name.to_string(), index: k, len, pos })
    } else {
        Ok(k as usize)
    }
}

fn elem(arr: &Value, k: i64, name: &str, pos: Pos) -> Result<i64, RuntimeError> {
    let Value::Array(cells) = arr else { unreachable!() };
    let k = check_index(k, cells.len() as u32, name, pos)?;
    Ok(cells[k].as_i64())
}
